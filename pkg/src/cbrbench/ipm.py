"""Integral probability metrics between representation batches.

Three discrepancy estimators over two samples A (n, d) and B (m, d):

- linear-kernel MMD: squared distance between sample means,
- RBF-kernel MMD: biased V-statistic with a median-heuristic bandwidth,
- entropic Wasserstein: Sinkhorn transport cost on max-normalized
  squared distances with uniform marginals.

Each has a plain-number form (for reporting) and an autodiff-node form
(for training). The node forms treat the sample arrays of the arguments as
differentiable and everything derived from detached values (bandwidth,
transport plan) as constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels, autodiff as ad
from .errors import InvalidArgumentError, SinkhornError

logger = logging.getLogger(__name__)

SINKHORN_EPSILON = 0.1
SINKHORN_ITERS = 50

_KINDS = ("mmd_lin", "mmd_rbf", "wass")


@dataclass(frozen=True)
class IPMKind:
    """A named IPM choice: one of mmd_lin, mmd_rbf, wass."""

    name: str

    def __post_init__(self):
        if self.name not in _KINDS:
            raise InvalidArgumentError(
                f"unknown IPM kind {self.name!r}; expected one of {', '.join(_KINDS)}"
            )


def parse_ipm(name: str) -> IPMKind:
    return IPMKind(str(name))


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.ndim != 2 or b.ndim != 2:
        raise InvalidArgumentError("IPM inputs must be 2-D (n, d) arrays")
    if a.shape[1] != b.shape[1]:
        raise InvalidArgumentError(
            f"IPM inputs have mismatched widths {a.shape[1]} and {b.shape[1]}"
        )
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidArgumentError("IPM inputs must be non-empty")


# ---------------------------------------------------------------------------
# linear MMD


def mmd_linear_value(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    diff = a.mean(axis=0) - b.mean(axis=0)
    return float(diff @ diff)


def mmd_linear_node(a: ad.Node, b: ad.Node) -> ad.Node:
    _check_pair(a.value, b.value)
    diff = ad.sub(ad.row_mean(a), ad.row_mean(b))
    return ad.sum_all(ad.square(diff))


# ---------------------------------------------------------------------------
# RBF MMD


def median_bandwidth(a: np.ndarray, b: np.ndarray) -> float:
    """Median of nonzero pairwise distances over the pooled sample;
    falls back to 1.0 (logged) when every distance is zero."""
    pooled = np.vstack([a, b])
    d2 = _kernels.pairwise_sqdist(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    dists = np.sqrt(d2[iu])
    dists = dists[dists > 0.0]
    if dists.size == 0:
        logger.info("median_bandwidth: all pairwise distances zero, using 1.0")
        return 1.0
    return float(np.median(dists))


def _canonical_order(a: np.ndarray, b: np.ndarray) -> bool:
    """True if (a, b) is already in canonical order. Ordering key: row count,
    then lexicographic bytes; makes mmd_rbf(a, b) == mmd_rbf(b, a) exactly."""
    if a.shape[0] != b.shape[0]:
        return a.shape[0] < b.shape[0]
    ab = a.tobytes()
    bb = b.tobytes()
    return ab <= bb


def mmd_rbf_value(a: np.ndarray, b: np.ndarray, bandwidth: float | None = None) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    if not _canonical_order(a, b):
        a, b = b, a
    if bandwidth is None:
        bandwidth = median_bandwidth(a, b)
    g = 1.0 / (2.0 * bandwidth * bandwidth)
    kaa = np.exp(-g * _kernels.pairwise_sqdist(a, a)).mean()
    kbb = np.exp(-g * _kernels.pairwise_sqdist(b, b)).mean()
    kab = np.exp(-g * _kernels.pairwise_sqdist(a, b)).mean()
    return float(kaa + kbb - 2.0 * kab)


def mmd_rbf_node(a: ad.Node, b: ad.Node, bandwidth: float | None = None) -> ad.Node:
    _check_pair(a.value, b.value)
    if not _canonical_order(a.value, b.value):
        a, b = b, a
    if bandwidth is None:
        bandwidth = median_bandwidth(a.value, b.value)  # detached
    g = 1.0 / (2.0 * bandwidth * bandwidth)
    kaa = ad.exp(ad.scale(ad.pairwise_sqdist(a, a), -g))
    kbb = ad.exp(ad.scale(ad.pairwise_sqdist(b, b), -g))
    kab = ad.exp(ad.scale(ad.pairwise_sqdist(a, b), -g))
    return ad.add(ad.add(ad.mean_all(kaa), ad.mean_all(kbb)),
                  ad.scale(ad.mean_all(kab), -2.0))


# ---------------------------------------------------------------------------
# entropic Wasserstein


def _sinkhorn_plan(cost: np.ndarray, epsilon: float, iters: int) -> np.ndarray:
    plan = _kernels.sinkhorn_plan(cost, epsilon, iters)
    if not np.all(np.isfinite(plan)):
        raise SinkhornError(
            "Sinkhorn transport plan overflowed (non-finite entries); "
            f"increase epsilon (currently {epsilon})"
        )
    return plan


def wasserstein_value(a: np.ndarray, b: np.ndarray,
                      epsilon: float = SINKHORN_EPSILON,
                      iters: int = SINKHORN_ITERS) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    cost = _kernels.pairwise_sqdist(a, b)
    cmax = cost.max()
    if cmax > 0.0:
        cost = cost / cmax
    plan = _sinkhorn_plan(cost, epsilon, iters)
    return float((plan * cost).sum() * (cmax if cmax > 0.0 else 1.0))


def wasserstein_node(a: ad.Node, b: ad.Node,
                     epsilon: float = SINKHORN_EPSILON,
                     iters: int = SINKHORN_ITERS) -> ad.Node:
    """Sinkhorn cost with an envelope-style backward: the plan is computed
    from detached values and held fixed, so gradients flow only through the
    pairwise cost matrix."""
    _check_pair(a.value, b.value)
    cost_detached = _kernels.pairwise_sqdist(a.value, b.value)
    cmax = cost_detached.max()
    scaled = cost_detached / cmax if cmax > 0.0 else cost_detached
    plan = _sinkhorn_plan(scaled, epsilon, iters)
    cost_node = ad.pairwise_sqdist(a, b)  # unnormalized; plan already reflects scaling
    return ad.weighted_sum(cost_node, plan)


# ---------------------------------------------------------------------------
# dispatch + cluster-balance loss


_VALUE_FNS = {
    "mmd_lin": mmd_linear_value,
    "mmd_rbf": mmd_rbf_value,
    "wass": wasserstein_value,
}

_NODE_FNS = {
    "mmd_lin": mmd_linear_node,
    "mmd_rbf": mmd_rbf_node,
    "wass": wasserstein_node,
}


def ipm_value(kind: IPMKind, a: np.ndarray, b: np.ndarray) -> float:
    return _VALUE_FNS[kind.name](a, b)


def ipm_node(kind: IPMKind, a: ad.Node, b: ad.Node) -> ad.Node:
    return _NODE_FNS[kind.name](a, b)


def _split_rows(cluster: np.ndarray, k: int):
    return [np.nonzero(cluster == c)[0] for c in range(1, k + 1)]


def cluster_balance_value(kind: IPMKind, reps: np.ndarray, cluster: np.ndarray,
                          k: int, base: int) -> float:
    """Average IPM between each non-base cluster's representations and the
    base cluster's, 1/(k-1) * sum over the other clusters. Clusters with
    fewer than 2 rows in the batch are skipped (logged); if nothing is
    comparable the loss is 0."""
    if k < 2:
        raise InvalidArgumentError(f"cluster balance needs k >= 2, got k={k}")
    if not 1 <= base <= k:
        raise InvalidArgumentError(f"base cluster {base} outside 1..{k}")
    rows = _split_rows(np.asarray(cluster).reshape(-1), k)
    base_rows = rows[base - 1]
    if base_rows.size < 2:
        logger.info("cluster_balance: base cluster %d has %d rows in batch, loss 0",
                    base, base_rows.size)
        return 0.0
    total = 0.0
    for c in range(1, k + 1):
        if c == base:
            continue
        idx = rows[c - 1]
        if idx.size < 2:
            logger.info("cluster_balance: cluster %d has %d rows in batch, skipped",
                        c, idx.size)
            continue
        total += ipm_value(kind, reps[idx], reps[base_rows])
    return total / (k - 1)


def cluster_balance_node(kind: IPMKind, reps: ad.Node, cluster: np.ndarray,
                         k: int, base: int) -> ad.Node | None:
    """Autodiff form of cluster_balance_value; returns None when no pair of
    clusters is comparable in the batch (treated as a zero loss upstream)."""
    if k < 2:
        raise InvalidArgumentError(f"cluster balance needs k >= 2, got k={k}")
    if not 1 <= base <= k:
        raise InvalidArgumentError(f"base cluster {base} outside 1..{k}")
    rows = _split_rows(np.asarray(cluster).reshape(-1), k)
    base_rows = rows[base - 1]
    if base_rows.size < 2:
        logger.info("cluster_balance: base cluster %d has %d rows in batch, loss 0",
                    base, base_rows.size)
        return None
    base_node = ad.take_rows(reps, base_rows)
    terms = []
    for c in range(1, k + 1):
        if c == base:
            continue
        idx = rows[c - 1]
        if idx.size < 2:
            logger.info("cluster_balance: cluster %d has %d rows in batch, skipped",
                        c, idx.size)
            continue
        terms.append(ipm_node(kind, ad.take_rows(reps, idx), base_node))
    if not terms:
        return None
    acc = terms[0]
    for t in terms[1:]:
        acc = ad.add(acc, t)
    return ad.scale(acc, 1.0 / (k - 1))
