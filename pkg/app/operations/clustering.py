# app/operations/clustering.py
"""
k-means (greedy k-means++ seeding, restarts, Lloyd iterations) and the
silhouette score.

Points are sorted into a canonical order before clustering so that, for a
fixed seed, the resulting partition does not depend on input order.
"""

import logging
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from app.core.config import get_settings
from app.core.errors import ClusteringError, InvalidParameterError
from app.schemas.analysis import ClusterResult

logger = logging.getLogger(__name__)


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidParameterError(f"points must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidParameterError("points contain non-finite values")
    return X


def _seed_centroids(X: np.ndarray, r: int, n_init: int, rng: np.random.Generator) -> np.ndarray:
    """
    Greedy k-means++ for ``n_init`` independent runs at once.

    Each new centre is the best, by remaining potential, of a few
    D^2-weighted draws. Returns centroids of shape (n_init, r, dim).
    """
    n = X.shape[0]
    n_trials = 2 + int(np.log(r))
    runs = np.arange(n_init)
    sq = cdist(X, X, "sqeuclidean")
    chosen = np.empty((n_init, r), dtype=int)
    chosen[:, 0] = rng.integers(n, size=n_init)
    d2 = sq[chosen[:, 0]]
    for c in range(1, r):
        cum = np.cumsum(d2, axis=1)
        u = rng.random((n_init, n_trials)) * cum[:, -1:]
        draws = np.minimum((cum[:, None, :] < u[:, :, None]).sum(axis=2), n - 1)
        trial = np.minimum(d2[:, None, :], sq[draws])
        best = trial.sum(axis=2).argmin(axis=1)
        chosen[:, c] = draws[runs, best]
        d2 = trial[runs, best]
    return X[chosen]


def _sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared distances of shape (runs, points, clusters)."""
    cross = np.einsum("nd,krd->knr", X, C)
    d2 = (X * X).sum(axis=1)[None, :, None] - 2.0 * cross + (C * C).sum(axis=2)[:, None, :]
    return np.maximum(d2, 0.0)


def _cluster_sums(X: np.ndarray, labels: np.ndarray, r: int):
    runs, n = labels.shape
    flat = (labels + r * np.arange(runs)[:, None]).ravel()
    counts = np.bincount(flat, minlength=runs * r).reshape(runs, r)
    sums = np.stack(
        [np.bincount(flat, weights=np.tile(X[:, col], runs), minlength=runs * r) for col in range(X.shape[1])],
        axis=-1,
    ).reshape(runs, r, X.shape[1])
    return counts, sums


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int, tol: float):
    """Lloyd iterations on every run; a run freezes once its objective stalls."""
    runs, r, _ = C.shape
    n = X.shape[0]
    active = np.ones(runs, dtype=bool)
    prev = np.full(runs, np.inf)
    history = [[] for _ in range(runs)]
    n_iter = np.zeros(runs, dtype=int)
    for it in range(1, max_iter + 1):
        dist = _sq_distances(X, C)
        labels = dist.argmin(axis=2)
        closest = np.take_along_axis(dist, labels[:, :, None], axis=2)[:, :, 0]
        objective = closest.sum(axis=1)
        for run in np.flatnonzero(active):
            history[run].append(float(objective[run]))
            n_iter[run] = it

        counts, sums = _cluster_sums(X, labels, r)
        new_C = C.copy()
        filled = counts > 0
        new_C[filled] = sums[filled] / counts[filled][:, None]
        for run, c in zip(*np.nonzero(~filled)):
            far = int(np.argmax(closest[run]))
            logger.debug("kmeans: run %d cluster %d emptied, reseeding with point %d", run, c, far)
            new_C[run, c] = X[far]
            closest[run, far] = 0.0
        C = np.where(active[:, None, None], new_C, C)

        stalled = np.isfinite(prev) & (prev - objective <= tol * np.maximum(prev, np.finfo(float).tiny))
        active &= ~stalled
        prev = np.where(active, objective, prev)
        if not active.any():
            break

    dist = _sq_distances(X, C)
    labels = dist.argmin(axis=2)
    for run in range(runs):
        for c in np.flatnonzero(np.bincount(labels[run], minlength=r) == 0):
            spread = dist[run, np.arange(n), labels[run]].copy()
            spread[np.bincount(labels[run], minlength=r)[labels[run]] < 2] = -1.0
            labels[run, int(np.argmax(spread))] = c

    counts, sums = _cluster_sums(X, labels, r)
    centroids = sums / counts[:, :, None]
    inertia = ((X[None, :, :] - np.take_along_axis(centroids, labels[:, :, None], axis=1)) ** 2).sum(axis=(1, 2))
    return labels, inertia, history, n_iter


def kmeans(
    points,
    r: int,
    seed: int,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
    n_init: Optional[int] = None,
) -> ClusterResult:
    """
    Partition ``points`` (one row per point) into ``r`` clusters.

    ``n_init`` seedings are drawn from one generator seeded with ``seed``;
    the run with the lowest within-cluster sum of squares is kept (the
    earliest on ties). Each run stops when the relative change of the
    objective drops below ``tol`` or after ``max_iter`` Lloyd iterations.
    Distance ties go to the lowest centroid index; an emptied cluster is
    reseeded with the point farthest from its centroid. Labels are numbered
    by first appearance in the canonical (lexicographic) point order.

    Example:
    >>> kmeans([[0.0], [0.1], [5.0], [5.1]], 2, seed=0).labels.tolist()
    [0, 0, 1, 1]
    """
    settings = get_settings()
    max_iter = max_iter or settings.KMEANS_MAX_ITER
    tol = settings.KMEANS_TOL if tol is None else tol
    n_init = settings.KMEANS_N_INIT if n_init is None else n_init

    X_in = _as_points(points)
    n = X_in.shape[0]
    if r < 1:
        raise InvalidParameterError(f"cluster count must be positive, got {r}")
    if n_init < 1:
        raise InvalidParameterError(f"n_init must be positive, got {n_init}")
    distinct = np.unique(X_in, axis=0).shape[0]
    if r > distinct:
        raise ClusteringError(f"cannot form {r} clusters from {distinct} distinct points")

    order = np.lexsort(X_in.T[::-1])
    X = X_in[order]
    rng = np.random.default_rng(seed)

    run_labels, run_inertia, run_history, run_iter = _lloyd(X, _seed_centroids(X, r, n_init, rng), max_iter, tol)
    best = int(np.argmin(run_inertia))
    labels = run_labels[best]
    logger.debug("kmeans: run %d of %d kept, objective %.6g", best, n_init, run_inertia[best])

    remap = {}
    for lab in labels:
        if lab not in remap:
            remap[lab] = len(remap)
    canonical = np.array([remap[lab] for lab in labels], dtype=int)
    centroids = np.zeros((len(remap), X.shape[1]))
    for old, new in remap.items():
        centroids[new] = X[labels == old].mean(axis=0)
    inertia = float(((X - centroids[canonical]) ** 2).sum())

    out = np.empty(n, dtype=int)
    out[order] = canonical
    return ClusterResult(
        labels=out,
        centroids=centroids,
        inertia=inertia,
        history=tuple(run_history[best]),
        n_iter=int(run_iter[best]),
    )


def silhouette(points, labels) -> float:
    """
    Mean silhouette coefficient.

    Points in singleton clusters score 0, and so does a point whose mean
    intra- and nearest inter-cluster distances are both zero.
    """
    X = _as_points(points)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise InvalidParameterError("one label per point is required")
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise ClusteringError("silhouette needs at least two clusters")

    dist = squareform(pdist(X))
    masks = {c: labels == c for c in clusters}
    sizes = {c: int(m.sum()) for c, m in masks.items()}

    scores = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        own = labels[i]
        if sizes[own] == 1:
            continue
        a = dist[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(dist[i, masks[c]].mean() for c in clusters if c != own)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())
