"""Reverse-mode automatic differentiation on float64 numpy matrices.

Everything is a 2-D float64 array: scalars are (1, 1), row vectors (1, d).
`Node` records a value, its parents, and a backward rule; `backward` runs the
tape in reverse topological order and accumulates gradients into `Node.grad`.
The Adam optimizer and Glorot initialization live here too since they share
the parameter representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, InvalidArgumentError, TrainingDivergenceError

__all__ = [
    "Node",
    "constant",
    "parameter",
    "matmul",
    "affine",
    "add",
    "sub",
    "neg",
    "hadamard",
    "scale",
    "square",
    "exp",
    "elu",
    "sum_all",
    "mean_all",
    "row_mean",
    "concat_cols",
    "take_rows",
    "pairwise_sqdist",
    "weighted_sum",
    "mse",
    "backward",
    "zero_grads",
    "AdamState",
    "adam_init",
    "adam_step",
    "glorot_uniform",
]


def as_matrix(value) -> np.ndarray:
    """Coerce to a 2-D float64 array; scalars become (1, 1)."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DimensionError(f"matrices must be 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


class Node:
    """One entry of the computation tape."""

    __slots__ = ("value", "grad", "parents", "op", "_bwd", "_done")

    def __init__(self, value, parents=(), op="leaf", bwd=None):
        self.value = as_matrix(value)
        self.grad = None
        self.parents = tuple(parents)
        self.op = op
        self._bwd = bwd
        self._done = False

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise InvalidArgumentError(f"item() needs a scalar node, got {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"


def constant(value) -> Node:
    return Node(value, op="const")


def parameter(value) -> Node:
    return Node(value, op="param")


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    out_value = a.value @ b.value

    def bwd(g):
        return g @ b.value.T, a.value.T @ g

    return Node(out_value, (a, b), "matmul", bwd)


def add(a: Node, b: Node) -> Node:
    """Elementwise sum; b may be a (1, d) row broadcast over a's rows."""
    if a.shape == b.shape:
        def bwd(g):
            return g, g
    elif b.shape == (1, a.shape[1]):
        def bwd(g):
            return g, g.sum(axis=0, keepdims=True)
    else:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} are incompatible")
    return Node(a.value + b.value, (a, b), "add", bwd)


def sub(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ")

    def bwd(g):
        return g, -g

    return Node(a.value - b.value, (a, b), "sub", bwd)


def neg(a: Node) -> Node:
    return Node(-a.value, (a,), "neg", lambda g: (-g,))


def hadamard(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise DimensionError(f"hadamard: shapes {a.shape} and {b.shape} differ")

    def bwd(g):
        return g * b.value, g * a.value

    return Node(a.value * b.value, (a, b), "hadamard", bwd)


def scale(a: Node, c: float) -> Node:
    c = float(c)
    return Node(a.value * c, (a,), "scale", lambda g: (g * c,))


def square(a: Node) -> Node:
    def bwd(g):
        return (g * (2.0 * a.value),)

    return Node(a.value * a.value, (a,), "square", bwd)


def exp(a: Node) -> Node:
    out_value = np.exp(a.value)

    def bwd(g):
        return (g * out_value,)

    return Node(out_value, (a,), "exp", bwd)


def elu(a: Node) -> Node:
    """Exponential linear unit: x for x > 0, exp(x) - 1 otherwise."""
    out_value = _kernels.elu_forward(a.value)

    def bwd(g):
        return (_kernels.elu_backward(a.value, g),)

    return Node(out_value, (a,), "elu", bwd)


def affine(x: Node, w: Node, b: Node) -> Node:
    """x @ w + b with b a (1, out) row broadcast over rows."""
    if b.shape != (1, w.shape[1]):
        raise DimensionError(f"affine: bias shape {b.shape} does not match weight {w.shape}")
    return add(matmul(x, w), b)


def sum_all(a: Node) -> Node:
    def bwd(g):
        return (np.full_like(a.value, float(g[0, 0])),)

    return Node(a.value.sum(), (a,), "sum", bwd)


def mean_all(a: Node) -> Node:
    n = a.value.size

    def bwd(g):
        return (np.full_like(a.value, float(g[0, 0]) / n),)

    return Node(a.value.mean(), (a,), "mean", bwd)


def row_mean(a: Node) -> Node:
    """Column-wise mean over rows: (n, d) -> (1, d)."""
    n = a.shape[0]

    def bwd(g):
        return (np.repeat(g / n, n, axis=0),)

    return Node(a.value.mean(axis=0, keepdims=True), (a,), "row_mean", bwd)


def concat_cols(a: Node, b: Node) -> Node:
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_cols: row counts differ, {a.shape} vs {b.shape}")
    da = a.shape[1]

    def bwd(g):
        return g[:, :da], g[:, da:]

    return Node(np.hstack([a.value, b.value]), (a, b), "concat_cols", bwd)


def take_rows(a: Node, idx) -> Node:
    """Gather rows by integer index; backward scatter-adds."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise InvalidArgumentError(f"take_rows: index must be 1-D, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise InvalidArgumentError(
            f"take_rows: index out of range for {a.shape[0]} rows"
        )

    def bwd(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return Node(a.value[idx], (a,), "take_rows", bwd)


def pairwise_sqdist(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"pairwise_sqdist: dims differ, {a.shape} vs {b.shape}")
    out_value = _kernels.pairwise_sqdist(a.value, b.value)

    def bwd(g):
        return _kernels.pairwise_sqdist_backward(a.value, b.value, g)

    return Node(out_value, (a, b), "pairwise_sqdist", bwd)


def weighted_sum(a: Node, weights: np.ndarray) -> Node:
    """sum(weights * a) with constant weights; used for fixed-plan transport cost."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != a.value.shape:
        raise DimensionError(f"weighted_sum: weights {w.shape} vs value {a.shape}")

    def bwd(g):
        return (float(g[0, 0]) * w,)

    return Node(float((w * a.value).sum()), (a,), "weighted_sum", bwd)


def mse(pred: Node, target) -> Node:
    """Mean squared error against a constant target."""
    t = as_matrix(target)
    if t.shape != pred.value.shape:
        raise DimensionError(f"mse: prediction {pred.shape} vs target {t.shape}")
    diff = pred.value - t
    n = diff.size

    def bwd(g):
        return (float(g[0, 0]) * (2.0 / n) * diff,)

    return Node(float((diff * diff).mean()), (pred,), "mse", bwd)


def _toposort(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node, params=()) -> None:
    """Accumulate dLoss/dNode into `grad` for every node reachable from loss.

    Parameters listed in `params` but not reachable get a zero gradient.
    Running backward twice on the same graph is an error: the tape is
    single-use and must be rebuilt (gradients would otherwise double-count).
    """
    if loss.value.shape != (1, 1):
        raise InvalidArgumentError(f"backward: loss must be scalar, got shape {loss.value.shape}")
    if loss._done:
        raise InvalidArgumentError(
            "backward already ran on this graph; rebuild the graph before differentiating again"
        )
    loss._done = True
    order = _toposort(loss)
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node.grad is None or node._bwd is None:
            continue
        grads = node._bwd(node.grad)
        for parent, g in zip(node.parents, grads):
            if g is None:
                continue
            # grads are never mutated in place, so sharing/views are safe here
            parent.grad = g if parent.grad is None else parent.grad + g
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.value)


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


@dataclass
class AdamState:
    """Adam moment buffers and step counter for one parameter list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    if lr <= 0:
        raise InvalidArgumentError(f"adam_init: learning rate must be positive, got {lr}")
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for p in params:
        state.m.append(np.zeros_like(p))
        state.v.append(np.zeros_like(p))
    return state


def adam_step(params, grads, state: AdamState) -> None:
    """One in-place Adam update with bias correction over aligned lists."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidArgumentError("adam_step: params/grads/state lengths differ")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(
                f"non-finite gradient at optimizer step {state.step_count + 1}"
            )
    state.step_count += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        _kernels.adam_update(p, g, m, v, state.step_count, state.lr,
                             state.beta1, state.beta2, state.eps)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform(+-sqrt(6/(fan_in+fan_out))) weight initialization."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))
