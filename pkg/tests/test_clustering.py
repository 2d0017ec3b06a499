"""k-means correctness: recovery of planted clusters (checked against
scikit-learn), Lloyd monotonicity, tie rules, and joint-space weighting."""

import numpy as np
import pytest
from sklearn.cluster import KMeans as SkKMeans
from sklearn.metrics import adjusted_rand_score

from cbrbench.clustering import (DEFAULT_DOSE_WEIGHT, assign, fit_kmeans,
                                 total_inertia)
from cbrbench.errors import InvalidArgumentError


def planted_blobs(seed, n_per=120, sep=6.0, dim=5):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(3, dim)) * sep
    x = np.vstack([c + rng.normal(size=(n_per, dim)) for c in centers])
    truth = np.repeat([0, 1, 2], n_per)
    s = rng.uniform(size=x.shape[0])
    return x, s, truth


def test_recovers_planted_clusters_vs_sklearn():
    for seed in range(5):
        x, s, truth = planted_blobs(seed)
        model = fit_kmeans(x, s, k=3, seed=seed, dose_weight=0.0)
        ours = assign(model, x, s)
        assert adjusted_rand_score(truth, ours) >= 0.99
        sk = SkKMeans(n_clusters=3, n_init=5, random_state=seed).fit(x)
        assert adjusted_rand_score(sk.labels_, ours) >= 0.99


def test_inertia_matches_sklearn_optimum():
    x, s, _ = planted_blobs(7)
    model = fit_kmeans(x, s, k=3, seed=0, dose_weight=0.0)
    sk = SkKMeans(n_clusters=3, n_init=10, random_state=0).fit(x)
    assert model.inertia == pytest.approx(sk.inertia_, rel=1e-6)


def test_k1_centroid_is_mean():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 4))
    s = rng.uniform(size=50)
    model = fit_kmeans(x, s, k=1, seed=0)
    joint = np.hstack([x, (DEFAULT_DOSE_WEIGHT * s)[:, None]])
    np.testing.assert_allclose(model.centroids[0], joint.mean(axis=0),
                               rtol=1e-12)
    assert np.all(assign(model, x, s) == 1)


def test_lloyd_inertia_monotone_nonincreasing():
    for seed in range(6):
        x, s, _ = planted_blobs(seed, sep=1.5)
        model = fit_kmeans(x, s, k=4, seed=seed, restarts=1)
        h = model.lloyd_inertia
        assert len(h) >= 1
        assert all(h[i + 1] <= h[i] + 1e-9 for i in range(len(h) - 1))


def test_duplicating_points_doubles_inertia():
    x, s, _ = planted_blobs(3)
    model = fit_kmeans(x, s, k=3, seed=0)
    x2 = np.vstack([x, x])
    s2 = np.concatenate([s, s])
    # same centroids score exactly twice the summed squared distance
    assert total_inertia(model, x2, s2) == pytest.approx(
        2.0 * total_inertia(model, x, s), rel=1e-12)


def test_deterministic_given_seed():
    x, s, _ = planted_blobs(4)
    a = fit_kmeans(x, s, k=3, seed=9)
    b = fit_kmeans(x, s, k=3, seed=9)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    assert a.inertia == b.inertia


def test_restarts_never_hurt():
    x, s, _ = planted_blobs(5, sep=1.0)
    single = fit_kmeans(x, s, k=5, seed=2, restarts=1)
    multi = fit_kmeans(x, s, k=5, seed=2, restarts=5)
    assert multi.inertia <= single.inertia + 1e-9


def test_dose_weight_separates_same_covariates():
    # identical covariates, two dose groups: the weighted dose coordinate is
    # the only separating direction
    x = np.zeros((40, 3))
    s = np.concatenate([np.full(20, 0.1), np.full(20, 0.9)])
    model = fit_kmeans(x, s, k=2, seed=0)
    labels = assign(model, x, s)
    assert len(set(labels[:20])) == 1
    assert len(set(labels[20:])) == 1
    assert labels[0] != labels[-1]


def test_dose_weight_zero_ignores_dose():
    x = np.vstack([np.zeros((20, 2)), np.ones((20, 2))])
    rng = np.random.default_rng(0)
    s = rng.uniform(size=40)
    model = fit_kmeans(x, s, k=2, seed=1, dose_weight=0.0)
    labels = assign(model, x, s)
    assert len(set(labels[:20])) == 1 and len(set(labels[20:])) == 1


def test_assign_labels_one_based():
    x, s, _ = planted_blobs(6)
    model = fit_kmeans(x, s, k=3, seed=0)
    labels = assign(model, x, s)
    assert labels.min() == 1 and labels.max() == 3


def test_all_identical_points_no_crash():
    x = np.ones((10, 3))
    s = np.full(10, 0.5)
    model = fit_kmeans(x, s, k=3, seed=0)
    assert model.inertia == pytest.approx(0.0, abs=1e-18)
    assert np.all(assign(model, x, s) == 1)  # ties resolve to lowest index


def test_validation_errors():
    x = np.ones((5, 2))
    s = np.full(5, 0.5)
    with pytest.raises(InvalidArgumentError):
        fit_kmeans(x, s, k=0, seed=0)
    with pytest.raises(InvalidArgumentError):
        fit_kmeans(x, s, k=6, seed=0)
    with pytest.raises(InvalidArgumentError):
        fit_kmeans(x, np.full(4, 0.5), k=2, seed=0)


def test_assign_new_points_consistent_with_centroids():
    x, s, _ = planted_blobs(8)
    model = fit_kmeans(x, s, k=3, seed=3)
    xq = x[:7] + 1e-9
    expected = assign(model, x[:7], s[:7])
    np.testing.assert_array_equal(assign(model, xq, s[:7]), expected)
