"""K-means (Lloyd's algorithm, k-means++ seeding) and a 2-D PCA projection
via power iteration. Both are deterministic given their seeds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

KMEANS_MAX_ITERS = 100
KMEANS_TOL = 1e-8
POWER_TOL = 1e-10
POWER_MAX_ITERS = 10000


@dataclass
class KMeansResult:
    centers: np.ndarray      # (k, d)
    labels: np.ndarray       # (N,)
    sse_history: list[float]
    iterations: int


def _sse(points: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    diff = points - centers[labels]
    return float(np.sum(diff * diff))


def _assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first center uniform, then squared-distance weighted."""
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total == 0.0:
            centers.append(points[rng.integers(n)])
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        centers.append(points[min(idx, n - 1)])
    return np.array(centers)


def kmeans(points: np.ndarray, k: int, seed: int = 0,
           max_iters: int = KMEANS_MAX_ITERS, tol: float = KMEANS_TOL) -> KMeansResult:
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise UsageError("k must be >= 1")
    if k > n:
        raise UsageError(f"k = {k} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(points, k, rng)
    labels = _assign(points, centers)
    history = [_sse(points, centers, labels)]
    iterations = 0
    for iterations in range(1, max_iters + 1):
        new_centers = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] > 0:
                new_centers[j] = members.mean(axis=0)
            else:
                # re-seed an empty cluster with the point farthest from its center
                dist = ((points - centers[labels]) ** 2).sum(axis=1)
                new_centers[j] = points[int(dist.argmax())]
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        labels = _assign(points, centers)
        history.append(_sse(points, centers, labels))
        if shift < tol:
            break
    return KMeansResult(centers=centers, labels=labels, sse_history=history,
                        iterations=iterations)


def _power_iterate(mat: np.ndarray, rng: np.random.Generator,
                   orthogonal_to: np.ndarray | None = None):
    d = mat.shape[0]
    scale = max(1.0, float(np.abs(mat).max()))
    v = rng.standard_normal(d)
    if orthogonal_to is not None:
        v -= (v @ orthogonal_to) * orthogonal_to
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else np.eye(d)[0]
    for _ in range(POWER_MAX_ITERS):
        w = mat @ v
        if orthogonal_to is not None:
            w -= (w @ orthogonal_to) * orthogonal_to
        norm = np.linalg.norm(w)
        if norm <= scale * 1e-14:
            # the operator is numerically zero on this subspace: the current
            # (already orthogonalized) vector is an eigenvector with eigval 0
            return v, 0.0
        w = w / norm
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < POWER_TOL:
            v = w
            break
        v = w
    return v, float(v @ mat @ v)


def pca_top2(points: np.ndarray):
    """Project onto the top-2 principal components of the sample covariance.

    Returns (projected (N, 2), components (2, d), eigenvalues (2,)).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise UsageError("projection needs at least 2 points")
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / (points.shape[0] - 1)
    rng = np.random.default_rng(0)
    v1, lam1 = _power_iterate(cov, rng)
    deflated = cov - lam1 * np.outer(v1, v1)
    v2, lam2 = _power_iterate(deflated, rng, orthogonal_to=v1)
    components = np.vstack([v1, v2])
    return centered @ components.T, components, np.array([lam1, lam2])
