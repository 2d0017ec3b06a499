"""Pure-numpy implementations of the hot kernels.

The compiled extension (`_fast`) mirrors these signatures exactly; either
module can back `cbrbench._kernels`. Matrix products stay on numpy/BLAS in
both backends.
"""

from __future__ import annotations

import numpy as np


def elu_forward(x: np.ndarray) -> np.ndarray:
    """ELU: x for x > 0, exp(x) - 1 otherwise."""
    out = x.copy()
    neg = x <= 0.0
    out[neg] = np.expm1(x[neg])
    return out


def elu_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """d ELU/dx times upstream grad: 1 for x > 0, exp(x) otherwise."""
    dx = np.ones_like(x)
    neg = x <= 0.0
    dx[neg] = np.exp(x[neg])
    return grad * dx


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One bias-corrected Adam update, in place on param/m/v.

    `step` is the 1-based step count including this update.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


def pairwise_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (len(a), len(b)), clipped at 0."""
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d = aa + bb - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d


def pairwise_sqdist_backward(
    a: np.ndarray, b: np.ndarray, grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum(grad * D) with D_ij = ||a_i - b_j||^2."""
    ga = 2.0 * (grad.sum(axis=1)[:, None] * a - grad @ b)
    gb = 2.0 * (grad.sum(axis=0)[:, None] * b - grad.T @ a)
    return ga, gb


def sinkhorn_plan(cost: np.ndarray, eps: float, iterations: int) -> np.ndarray:
    """Entropic OT plan between uniform marginals for a normalized cost.

    Plain (non-log-domain) Sinkhorn scaling for a fixed iteration count.
    Division by zero is allowed to produce inf/nan; the caller validates
    finiteness of the returned plan.
    """
    n, m = cost.shape
    K = np.exp(-cost / eps)
    a = 1.0 / n
    b = 1.0 / m
    v = np.full(m, 1.0 / m)
    u = np.empty(n)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(iterations):
            u = a / (K @ v)
            v = b / (K.T @ u)
        plan = (u[:, None] * K) * v[None, :]
    return plan


def nearest_centroid(
    points: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest centroid per point (ties: lowest index) and the
    squared distance to it."""
    d = pairwise_sqdist(points, centroids)
    labels = np.argmin(d, axis=1)
    return labels.astype(np.int64), d[np.arange(points.shape[0]), labels]


def group_sums(
    points: np.ndarray, labels: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-group coordinate sums and counts for centroid updates."""
    dim = points.shape[1]
    sums = np.empty((k, dim), dtype=np.float64)
    for j in range(dim):
        sums[:, j] = np.bincount(labels, weights=points[:, j], minlength=k)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    return sums, counts
