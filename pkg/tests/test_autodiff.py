"""Gradient correctness of the reverse-mode tape against central
finite differences, plus tape-reuse and optimizer semantics."""

import numpy as np
import pytest

import cbrbench.autodiff as ad
from cbrbench.errors import (DimensionError, InvalidArgumentError,
                             TrainingDivergenceError)

from helpers import fd_gradient, max_rel_err

TOL = 1e-4  # relative; FD error is O(eps^2) = 1e-12, far below this


def check(build_loss, params):
    loss = build_loss()
    ad.zero_grads(params)
    ad.backward(loss, params)
    fd = fd_gradient(build_loss, params)
    for p, g in zip(params, fd):
        assert max_rel_err(p.grad, g) <= TOL


def test_matmul_affine_elu_chain():
    rng = np.random.default_rng(0)
    x = ad.constant(rng.normal(size=(7, 5)) + 0.3)
    w = ad.parameter(rng.normal(size=(5, 4)))
    b = ad.parameter(rng.normal(size=(1, 4)))
    w2 = ad.parameter(rng.normal(size=(4, 1)))

    def build():
        h = ad.elu(ad.affine(x, w, b))
        return ad.mean_all(ad.square(ad.matmul(h, w2)))

    check(build, [w, b, w2])


def test_add_sub_neg_hadamard_scale():
    rng = np.random.default_rng(1)
    a = ad.parameter(rng.normal(size=(6, 3)))
    b = ad.parameter(rng.normal(size=(6, 3)))

    def build():
        t = ad.add(ad.hadamard(a, b), ad.neg(ad.sub(a, b)))
        return ad.sum_all(ad.scale(t, 0.37))

    check(build, [a, b])


def test_broadcast_add_row():
    rng = np.random.default_rng(2)
    a = ad.parameter(rng.normal(size=(9, 4)))
    row = ad.parameter(rng.normal(size=(1, 4)))

    def build():
        return ad.mean_all(ad.square(ad.add(a, row)))

    check(build, [a, row])


def test_exp_square_sum():
    rng = np.random.default_rng(3)
    a = ad.parameter(rng.normal(size=(5, 2)) * 0.5)

    def build():
        return ad.sum_all(ad.exp(ad.neg(ad.square(a))))

    check(build, [a])


def test_elu_gradient_away_from_kink():
    rng = np.random.default_rng(4)
    vals = rng.normal(size=(8, 3))
    vals[np.abs(vals) < 0.2] += 0.5  # FD straddles the kink otherwise
    a = ad.parameter(vals)

    def build():
        return ad.mean_all(ad.elu(a))

    check(build, [a])


def test_row_mean_concat_take_rows():
    rng = np.random.default_rng(5)
    a = ad.parameter(rng.normal(size=(8, 3)))
    b = ad.parameter(rng.normal(size=(8, 2)))
    idx = np.array([0, 3, 3, 7])

    def build():
        joint = ad.concat_cols(a, b)
        picked = ad.take_rows(joint, idx)
        return ad.sum_all(ad.square(ad.row_mean(picked)))

    check(build, [a, b])


def test_pairwise_sqdist_weighted_sum():
    rng = np.random.default_rng(6)
    a = ad.parameter(rng.normal(size=(5, 3)))
    b = ad.parameter(rng.normal(size=(4, 3)))
    w = rng.uniform(size=(5, 4))
    w /= w.sum()

    def build():
        return ad.weighted_sum(ad.pairwise_sqdist(a, b), w)

    check(build, [a, b])


def test_mse_gradient():
    rng = np.random.default_rng(7)
    pred = ad.parameter(rng.normal(size=(10, 1)))
    target = rng.normal(size=(10, 1))

    def build():
        return ad.mse(pred, target)

    check(build, [pred])


def test_mse_value_matches_numpy():
    rng = np.random.default_rng(8)
    p = rng.normal(size=(30, 1))
    t = rng.normal(size=(30, 1))
    node = ad.mse(ad.constant(p), t)
    assert node.item() == pytest.approx(float(np.mean((p - t) ** 2)), rel=1e-12)


def test_full_network_shaped_graph():
    # same wiring as one training step: two-layer body, concat dose, head
    rng = np.random.default_rng(9)
    x = ad.constant(rng.normal(size=(12, 6)))
    s = ad.constant(rng.uniform(size=(12, 1)))
    y = ad.constant(rng.normal(size=(12, 1)))
    w1 = ad.parameter(rng.normal(size=(6, 8)) * 0.4)
    b1 = ad.parameter(np.zeros((1, 8)))
    w2 = ad.parameter(rng.normal(size=(8, 4)) * 0.4)
    b2 = ad.parameter(np.zeros((1, 4)))
    w3 = ad.parameter(rng.normal(size=(5, 1)) * 0.4)
    b3 = ad.parameter(np.zeros((1, 1)))
    params = [w1, b1, w2, b2, w3, b3]

    def build():
        h = ad.elu(ad.affine(x, w1, b1))
        reps = ad.elu(ad.affine(h, w2, b2))
        pred = ad.affine(ad.concat_cols(reps, s), w3, b3)
        loss = ad.mse(pred, y.value)
        reg = ad.scale(ad.add(ad.sum_all(ad.square(w1)),
                              ad.sum_all(ad.square(w3))), 0.01)
        return ad.add(loss, reg)

    check(build, params)


def test_backward_twice_raises():
    a = ad.parameter(np.ones((2, 2)))
    loss = ad.sum_all(ad.square(a))
    ad.backward(loss, [a])
    with pytest.raises(InvalidArgumentError):
        ad.backward(loss, [a])


def test_backward_needs_scalar():
    a = ad.parameter(np.ones((2, 2)))
    with pytest.raises(InvalidArgumentError):
        ad.backward(ad.square(a), [a])


def test_unreachable_param_gets_zero_grad():
    a = ad.parameter(np.ones((2, 2)))
    other = ad.parameter(np.ones((3, 1)))
    loss = ad.sum_all(a)
    ad.backward(loss, [a, other])
    np.testing.assert_array_equal(other.grad, np.zeros((3, 1)))


def test_grad_accumulation_on_shared_node():
    # f = sum(a) + sum(a) must give gradient 2 everywhere
    a = ad.parameter(np.ones((3, 2)))
    loss = ad.add(ad.sum_all(a), ad.sum_all(a))
    ad.backward(loss, [a])
    np.testing.assert_allclose(a.grad, np.full((3, 2), 2.0))


def test_matmul_shape_mismatch():
    a = ad.constant(np.ones((2, 3)))
    b = ad.constant(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        ad.matmul(a, b)


def test_adam_single_step_oracle():
    # one bias-corrected step from zero moments: delta = -lr * g/(|g| + eps)
    p = np.array([[1.0, -2.0]])
    g = np.array([[0.5, -3.0]])
    st = ad.adam_init([p], lr=0.1)
    ad.adam_step([p], [g], st)
    expected = np.array([[1.0, -2.0]]) - 0.1 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(p, expected, rtol=1e-9)


def test_adam_nonfinite_gradient_raises():
    p = np.ones((1, 2))
    st = ad.adam_init([p], lr=0.1)
    with pytest.raises(TrainingDivergenceError):
        ad.adam_step([p], [np.array([[np.nan, 0.0]])], st)


def test_adam_length_mismatch():
    p = np.ones((1, 2))
    st = ad.adam_init([p], lr=0.1)
    with pytest.raises(InvalidArgumentError):
        ad.adam_step([p], [np.ones((1, 2)), np.ones((1, 2))], st)


def test_glorot_uniform_bounds_and_determinism():
    limit = np.sqrt(6.0 / (20 + 30))
    w1 = ad.glorot_uniform(np.random.default_rng(11), 20, 30)
    w2 = ad.glorot_uniform(np.random.default_rng(11), 20, 30)
    assert w1.shape == (20, 30)
    assert np.all(np.abs(w1) <= limit)
    np.testing.assert_array_equal(w1, w2)


def test_take_rows_duplicate_accumulates():
    a = ad.parameter(np.arange(6.0).reshape(3, 2))
    idx = np.array([1, 1, 1])
    loss = ad.sum_all(ad.take_rows(a, idx))
    ad.backward(loss, [a])
    np.testing.assert_array_equal(a.grad,
                                  np.array([[0, 0], [3, 3], [0, 0]], dtype=float))
