"""Checkpoint round trips: every estimator kind must reload to a model with
bit-identical predictions, and malformed files must be rejected."""

import numpy as np
import pytest

from cbrbench.clustering import fit_kmeans
from cbrbench.errors import InvalidArgumentError
from cbrbench.ipm import IPMKind
from cbrbench.models import NetworkSpec, fit_linear, train_cbrnet, train_drnet, train_mlp
from cbrbench.serialize import HEADER, load_model, save_model

SPEC = NetworkSpec(repr_hidden=8, repr_dim=8, inference_hidden=8,
                   batch_size=64, training_steps=40, seed=1)


def data(seed=0, n=160, d=5):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, d))
    s = rng.uniform(size=n)
    y = x.sum(axis=1) + s
    return x, s, y


def round_trip(tmp_path, model):
    path = tmp_path / "model.ckpt"
    save_model(path, model)
    return load_model(path)


def assert_same_predictions(a, b):
    x, s, _ = data(99, n=64)
    np.testing.assert_array_equal(a.predict(x, s), b.predict(x, s))


def test_cbrnet_with_delta_round_trip(tmp_path):
    x, s, y = data()
    delta = fit_kmeans(x, s, k=3, seed=7)
    model = train_cbrnet(x, s, y, SPEC, lambda_=0.05,
                         ipm=IPMKind("mmd_lin"), delta=delta)
    loaded = round_trip(tmp_path, model)
    assert_same_predictions(model, loaded)
    assert loaded.lambda_ == model.lambda_
    assert loaded.ipm.name == "mmd_lin"
    assert loaded.base_cluster == model.base_cluster
    assert loaded.delta.k == 3
    np.testing.assert_array_equal(loaded.delta.centroids, delta.centroids)
    # representations reload identically too (dump-repr depends on this)
    np.testing.assert_array_equal(model.representation(x[:8]),
                                  loaded.representation(x[:8]))


def test_mlp_without_delta_round_trip(tmp_path):
    x, s, y = data(1)
    model = train_mlp(x, s, y, SPEC)
    loaded = round_trip(tmp_path, model)
    assert_same_predictions(model, loaded)
    assert loaded.delta is None and loaded.ipm is None
    assert loaded.spec == SPEC


def test_drnet_round_trip(tmp_path):
    x, s, y = data(2)
    model = train_drnet(x, s, y, SPEC)
    loaded = round_trip(tmp_path, model)
    assert_same_predictions(model, loaded)
    assert loaded.y_scaler == model.y_scaler


def test_linear_round_trip(tmp_path):
    x, s, y = data(3)
    model = fit_linear(x, s, y, ridge=0.5)
    loaded = round_trip(tmp_path, model)
    assert_same_predictions(model, loaded)
    assert loaded.ridge == 0.5
    np.testing.assert_array_equal(loaded.coefficients, model.coefficients)


def test_header_is_validated(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("not a checkpoint\n")
    with pytest.raises(InvalidArgumentError, match="checkpoint"):
        load_model(path)
    path.write_text("")
    with pytest.raises(InvalidArgumentError):
        load_model(path)


def test_malformed_array_block_rejected(tmp_path):
    path = tmp_path / "trunc.ckpt"
    path.write_text(HEADER + '\n{"kind": "linear", "ridge": 0.0}\n'
                    "array coefficients not-a-number 1\n")
    with pytest.raises((InvalidArgumentError, ValueError)):
        load_model(path)


def test_unknown_kind_rejected(tmp_path):
    path = tmp_path / "odd.ckpt"
    path.write_text(HEADER + '\n{"kind": "forest"}\n')
    with pytest.raises(InvalidArgumentError, match="forest"):
        load_model(path)


def test_unserializable_object_rejected(tmp_path):
    with pytest.raises(InvalidArgumentError, match="dict"):
        save_model(tmp_path / "x.ckpt", {"not": "a model"})


def test_checkpoint_is_deterministic_text(tmp_path):
    x, s, y = data(4)
    model = fit_linear(x, s, y)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_model(p1, model)
    save_model(p2, model)
    assert p1.read_bytes() == p2.read_bytes()
