"""k-means over the joint (covariates, weighted dose) space.

This is the frozen clustering function used to group units by exposure
pattern before representation balancing: points are [x ; dose_weight * s],
fit with kmeans++ seeding, Lloyd iterations to an assignment fixpoint, and
a best-of-restarts rule. All tie rules are deterministic (lowest index).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError
from .utils import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_DOSE_WEIGHT = 4.0  # sqrt(16): one dose coordinate vs 16 covariates
DEFAULT_RESTARTS = 5


@dataclass
class KMeansModel:
    """Fitted k-means in the weighted joint space."""

    k: int
    centroids: np.ndarray
    dose_weight: float
    inertia: float
    n_iter: int = 0
    lloyd_inertia: list[float] = field(default_factory=list)

    def joint(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        if x.shape[0] != s.shape[0]:
            raise InvalidArgumentError(
                f"x rows ({x.shape[0]}) and dose entries ({s.shape[0]}) differ"
            )
        return np.hstack([x, (self.dose_weight * s)[:, None]])


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """kmeans++ seeding: first centroid uniform, then D^2-weighted draws."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = _kernels.pairwise_sqdist(points, centroids[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with chosen centroids
            centroids[j] = points[rng.integers(n)]
            continue
        r = rng.uniform(0.0, total)
        idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
        idx = min(idx, n - 1)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, _kernels.pairwise_sqdist(points, centroids[j:j + 1])[:, 0])
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iters: int):
    """Lloyd iterations to assignment fixpoint; returns final state and the
    per-iteration inertia history (recorded after each assignment step)."""
    k = centroids.shape[0]
    labels = None
    history: list[float] = []
    for it in range(max_iters):
        new_labels, d2 = _kernels.nearest_centroid(points, centroids)
        history.append(float(d2.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            return centroids, labels, history[-1], it + 1, history
        labels = new_labels
        sums, counts = _kernels.group_sums(points, labels, k)
        empty = np.nonzero(counts == 0)[0]
        if empty.size:
            # reseed empty centroids at the currently farthest points
            far_order = np.argsort(-d2)
            for rank, j in enumerate(empty):
                centroids = centroids.copy()
                centroids[j] = points[far_order[rank]]
                logger.info("lloyd: reinitialized empty centroid %d to farthest point", j)
            continue
        centroids = sums / counts[:, None]
    new_labels, d2 = _kernels.nearest_centroid(points, centroids)
    history.append(float(d2.sum()))
    return centroids, new_labels, history[-1], max_iters, history


def fit_kmeans(x: np.ndarray, s: np.ndarray, k: int, seed: int,
               max_iters: int = 300, dose_weight: float = DEFAULT_DOSE_WEIGHT,
               restarts: int = DEFAULT_RESTARTS) -> KMeansModel:
    """Fit k-means on [x ; dose_weight * s]; best of `restarts` seeded runs
    by final inertia (ties: earliest restart)."""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if x.shape[0] != s.shape[0]:
        raise InvalidArgumentError("x and s row counts differ")
    n = x.shape[0]
    if k > n:
        raise InvalidArgumentError(f"k={k} exceeds the number of points n={n}")
    points = np.hstack([x, (dose_weight * s)[:, None]])
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(derive_seed(seed, "kmeans-restart", r))
        centroids = _kmeanspp_init(points, k, rng)
        centroids, labels, inertia, n_iter, history = _lloyd(points, centroids, max_iters)
        if best is None or inertia < best[0]:
            best = (inertia, centroids, n_iter, history)
    inertia, centroids, n_iter, history = best
    return KMeansModel(k=k, centroids=centroids, dose_weight=dose_weight,
                       inertia=inertia, n_iter=n_iter, lloyd_inertia=history)


def assign(model: KMeansModel, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Cluster ids in {1..k} of the nearest centroids (ties: lowest index)."""
    points = model.joint(x, s)
    labels, _ = _kernels.nearest_centroid(points, model.centroids)
    return labels + 1


def total_inertia(model: KMeansModel, x: np.ndarray, s: np.ndarray) -> float:
    """Sum of squared distances of the given points to their assigned centroid."""
    points = model.joint(x, s)
    _, d2 = _kernels.nearest_centroid(points, model.centroids)
    return float(d2.sum())
