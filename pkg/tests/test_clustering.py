import itertools

import numpy as np
import pytest

from flowsurrogate.clustering import kmeans, pca_top2
from flowsurrogate.errors import UsageError


def brute_force_best_partition(points, k=2):
    """Exhaustive search over all assignments; returns the minimum-SSE labels."""
    n = points.shape[0]
    best_sse, best = np.inf, None
    for labels in itertools.product(range(k), repeat=n):
        labels = np.array(labels)
        if len(set(labels.tolist())) < k:
            continue
        sse = 0.0
        for j in range(k):
            members = points[labels == j]
            sse += float(((members - members.mean(axis=0)) ** 2).sum())
        if sse < best_sse:
            best_sse, best = sse, labels
    return best, best_sse


class TestKMeans:
    def planted_points(self):
        return np.array([
            [0.0, 0.0], [0.1, -0.1], [-0.1, 0.05],
            [5.0, 5.0], [5.1, 4.9], [4.9, 5.05],
        ])

    def test_recovers_planted_partition_vs_exhaustive(self):
        points = self.planted_points()
        expected, expected_sse = brute_force_best_partition(points, 2)
        result = kmeans(points, 2, seed=0)
        # same partition up to label swap
        got = result.labels
        same = np.array_equal(got, expected) or np.array_equal(1 - got, expected)
        assert same
        assert abs(result.sse_history[-1] - expected_sse) < 1e-9

    def test_sse_non_increasing_per_iteration(self):
        rng = np.random.default_rng(1)
        points = rng.random((40, 3))
        result = kmeans(points, 4, seed=2)
        for a, b in zip(result.sse_history, result.sse_history[1:]):
            assert b <= a + 1e-12

    def test_k_equals_n_each_point_its_own_center(self):
        rng = np.random.default_rng(3)
        points = rng.random((5, 2))
        result = kmeans(points, 5, seed=4)
        assert sorted(result.labels.tolist()) == list(range(5))
        for i in range(5):
            assert np.allclose(result.centers[result.labels[i]], points[i], atol=1e-12)

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(UsageError):
            kmeans(np.zeros((3, 2)), 4)

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(5)
        points = rng.random((30, 4))
        a = kmeans(points, 3, seed=9)
        b = kmeans(points, 3, seed=9)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.centers, b.centers)


class TestPca:
    def test_2d_centered_input_preserves_pairwise_distances(self):
        rng = np.random.default_rng(6)
        points = rng.standard_normal((20, 2)) @ np.array([[2.0, 0.3], [0.3, 0.5]])
        points -= points.mean(axis=0)
        projected, _, _ = pca_top2(points)
        for i in range(20):
            for j in range(i + 1, 20):
                orig = np.linalg.norm(points[i] - points[j])
                proj = np.linalg.norm(projected[i] - projected[j])
                assert abs(orig - proj) < 1e-8

    def test_collinear_points_have_zero_second_variance(self):
        t = np.linspace(-2, 2, 15)
        direction = np.array([1.0, 2.0, -0.5])
        points = t[:, None] * direction[None, :]
        projected, _, eigvals = pca_top2(points)
        assert eigvals[1] < 1e-10
        assert np.abs(projected[:, 1]).max() < 1e-6

    def test_top_eigenvalue_matches_dense_solver_5x5(self):
        rng = np.random.default_rng(7)
        points = rng.standard_normal((12, 5)) @ rng.standard_normal((5, 5))
        _, components, eigvals = pca_top2(points)
        cov = np.cov(points.T, ddof=1)
        dense = np.linalg.eigvalsh(cov)
        assert abs(eigvals[0] - dense[-1]) < 1e-8
        assert abs(eigvals[1] - dense[-2]) < 1e-8

    def test_needs_two_points(self):
        with pytest.raises(UsageError):
            pca_top2(np.zeros((1, 3)))
