"""Clustering and neighbor primitives backing the diversity-aware strategies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # cluster id per point, dense in [0, n_clusters)
    sizes: np.ndarray  # per-cluster point counts
    n_clusters: int
    centers: np.ndarray | None = None  # k-means variants only
    inertia_history: tuple[float, ...] | None = None


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=X.dtype)
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[i] = X[idx]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _repair_empty(labels, dist_to_own, k):
    """Reseed each empty cluster at the point farthest from its own center."""
    moved = []
    counts = np.bincount(labels, minlength=k)
    d = dist_to_own.copy()
    for cid in range(k):
        if counts[cid] == 0:
            far = int(np.argmax(d))
            counts[labels[far]] -= 1
            labels[far] = cid
            counts[cid] = 1
            d[far] = -np.inf
            moved.append((cid, far))
    return moved


def kmeans(X: np.ndarray, k: int, seed: int, max_iter: int = 100) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding; deterministic given seed."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for {n} points")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(X, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    history = []
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        moved = _repair_empty(new_labels, d2[np.arange(n), new_labels], k)
        for cid, far in moved:
            centers[cid] = X[far]
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for cid in range(k):
            members = labels == cid
            centers[cid] = X[members].mean(axis=0)
    return ClusterAssignment(
        labels=labels,
        sizes=np.bincount(labels, minlength=k),
        n_clusters=k,
        centers=centers,
        inertia_history=tuple(history),
    )


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    if (norms == 0).any():
        raise ValueError("zero-norm row; cosine geometry undefined")
    return X / norms[:, None]


def spherical_kmeans(X: np.ndarray, k: int, seed: int,
                     max_iter: int = 100) -> ClusterAssignment:
    """K-means on the unit sphere: cosine assignment, renormalized centers."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for {n} points")
    Xn = _normalize_rows(X)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(Xn, k, rng)
    norms = np.linalg.norm(centers, axis=1)
    centers = centers / np.maximum(norms, 1e-12)[:, None]
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        sims = Xn @ centers.T
        new_labels = sims.argmax(axis=1)
        # farthest from its center = lowest cosine, i.e. highest (1 - sim)
        own = sims[np.arange(n), new_labels]
        moved = _repair_empty(new_labels, 1.0 - own, k)
        for cid, far in moved:
            centers[cid] = Xn[far]
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for cid in range(k):
            mean = Xn[labels == cid].mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centers[cid] = mean / norm
    return ClusterAssignment(
        labels=labels,
        sizes=np.bincount(labels, minlength=k),
        n_clusters=k,
        centers=centers,
    )


def agglomerative_avg(X: np.ndarray, n_clusters: int) -> ClusterAssignment:
    """Hierarchical merge by average pairwise Euclidean distance (UPGMA)."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n_clusters < 1 or n_clusters > n:
        raise ValueError(f"n_clusters={n_clusters} out of range for {n} points")
    if n_clusters == n:
        labels = np.arange(n, dtype=np.int64)
    elif n_clusters == 1:
        labels = np.zeros(n, dtype=np.int64)
    else:
        Z = linkage(X, method="average", metric="euclidean")
        labels = cut_tree(Z, n_clusters=n_clusters).ravel()
    # relabel densely by order of first appearance
    remap: dict[int, int] = {}
    dense = np.empty(n, dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in remap:
            remap[lab] = len(remap)
        dense[i] = remap[lab]
    return ClusterAssignment(
        labels=dense,
        sizes=np.bincount(dense, minlength=n_clusters),
        n_clusters=n_clusters,
    )


def cosine_distances(X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """(1 - cos)/2 distances between rows of X and rows of Q."""
    xn = X / np.maximum(np.linalg.norm(X, axis=1), 1e-12)[:, None]
    qn = Q / np.maximum(np.linalg.norm(Q, axis=1), 1e-12)[:, None]
    return (1.0 - xn @ qn.T) / 2.0


def knn(X: np.ndarray, query_idx: int, k: int) -> np.ndarray:
    """Indices of the k nearest rows by cosine distance, excluding the query.

    Ties break toward the smaller row index.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of rows {n}")
    d = cosine_distances(X, X[query_idx:query_idx + 1]).ravel()
    d[query_idx] = np.inf
    order = np.lexsort((np.arange(n), d))
    return order[:k]
