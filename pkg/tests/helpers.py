"""Independent oracles and checkers shared by the test suite.

Everything here is deliberately written the slow, obvious way (plain loops,
brute-force enumeration, textbook formulas) so it cannot share bugs with the
library implementations it checks.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def fd_gradient(build_loss, params, eps: float = 1e-6) -> list[np.ndarray]:
    """Central-difference gradient of a scalar graph w.r.t. parameter Nodes.

    `build_loss()` must construct a fresh graph from the current parameter
    values and return the loss Node; `params` are the parameter Nodes whose
    `.value` arrays are perturbed in place.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = build_loss().item()
            flat[i] = orig - eps
            down = build_loss().item()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def max_rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    """max_i |a_i - e_i| / max(1, |e_i|): absolute below 1, relative above."""
    a = np.asarray(approx, dtype=np.float64).reshape(-1)
    e = np.asarray(exact, dtype=np.float64).reshape(-1)
    return float(np.max(np.abs(a - e) / np.maximum(1.0, np.abs(e))))


def ks_statistic(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov distance between an empirical sample and a CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    c = np.asarray([cdf(v) for v in x], dtype=np.float64)
    upper = np.arange(1, n + 1) / n - c
    lower = c - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def naive_linear_mmd(a: np.ndarray, b: np.ndarray) -> float:
    """Squared distance of sample means, computed with explicit loops."""
    d = a.shape[1]
    total = 0.0
    for j in range(d):
        ma = sum(float(v) for v in a[:, j]) / a.shape[0]
        mb = sum(float(v) for v in b[:, j]) / b.shape[0]
        total += (ma - mb) ** 2
    return total


def naive_mmd_rbf(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """Biased RBF-kernel MMD^2 (V-statistic) with explicit double loops."""

    def k(u, v):
        return math.exp(-float(np.sum((u - v) ** 2)) / (2.0 * sigma * sigma))

    def block(p, q):
        return sum(k(p[i], q[j]) for i in range(len(p))
                   for j in range(len(q))) / (len(p) * len(q))

    return block(a, a) + block(b, b) - 2.0 * block(a, b)


def naive_median_bandwidth(a: np.ndarray, b: np.ndarray) -> float:
    """Median of the nonzero pairwise distances over the pooled sample."""
    pooled = np.vstack([a, b])
    dists = []
    for i in range(len(pooled)):
        for j in range(i + 1, len(pooled)):
            d = math.sqrt(float(np.sum((pooled[i] - pooled[j]) ** 2)))
            if d > 0:
                dists.append(d)
    if not dists:
        return 1.0
    return float(np.median(dists))


def brute_force_ot_n2(cost: np.ndarray) -> float:
    """Exact OT cost for 2x2 uniform marginals.

    The transport polytope is the segment between the two permutation
    assignments, and the objective is linear, so the optimum is at one of
    the two matchings.
    """
    match = 0.5 * (cost[0, 0] + cost[1, 1])
    anti = 0.5 * (cost[0, 1] + cost[1, 0])
    return min(match, anti)


def brute_force_assignment(cost: np.ndarray) -> float:
    """Exact uniform-marginal OT for small square costs via permutations."""
    n = cost.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(cost[i, perm[i]] for i in range(n)) / n)
    return best


def count_surjections(n_labels: int, n_clusters: int) -> int:
    """Inclusion-exclusion count of surjections {1..n_labels} -> {1..k}."""
    total = 0
    for j in range(n_clusters + 1):
        total += ((-1) ** j) * math.comb(n_clusters, j) \
            * (n_clusters - j) ** n_labels
    return total


def trapezoid_integral(fn, grid_size: int) -> float:
    """Plain trapezoid rule on [0, 1] with explicit summation."""
    xs = np.linspace(0.0, 1.0, grid_size)
    h = 1.0 / (grid_size - 1)
    total = 0.0
    for i in range(grid_size - 1):
        total += 0.5 * h * (fn(xs[i]) + fn(xs[i + 1]))
    return total


def strip_csv_column(text: str, column: str) -> str:
    """Drop one named column from CSV text (used to compare reports while
    ignoring wall-clock fields)."""
    lines = text.splitlines()
    header = lines[0].split(",")
    keep = [i for i, name in enumerate(header) if name != column]
    out = []
    for line in lines:
        cells = line.split(",")
        out.append(",".join(cells[i] for i in keep))
    return "\n".join(out) + "\n"
