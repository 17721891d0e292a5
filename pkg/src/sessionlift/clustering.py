"""
K-Means (k-means++ seeding, Lloyd iterations), elbow-based choice of k,
DBSCAN, and nearest-centroid reassignment of DBSCAN noise.

All distances are Euclidean. Ties between equidistant centroids go to the
lowest cluster id.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .encoding import SessionVector, as_matrix
from .errors import ClusteringError, EmptyInputError, ParameterError

logger = logging.getLogger(__name__)

NOISE = -1
DEFAULT_N_INIT = 10
_CHUNK = 4096


@dataclass
class ClusterModel:
    labels: np.ndarray
    """Cluster id per input vector, or ``NOISE``."""
    centroids: np.ndarray
    """``(n_clusters, dim)``; row i is the mean of the vectors labelled i."""
    algorithm: str
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    @property
    def sizes(self) -> list[int]:
        counts = np.bincount(self.labels[self.labels >= 0], minlength=self.n_clusters)
        return [int(c) for c in counts]

    @property
    def noise_count(self) -> int:
        return int(np.sum(self.labels == NOISE))

    def wcss(self, vectors) -> float:
        """Within-cluster sum of squared distances (noise excluded)."""
        return _wcss(as_matrix(vectors), self.labels, self.centroids)

    @classmethod
    def from_labels(cls, vectors, labels, n_clusters: int, algorithm: str, params=None) -> "ClusterModel":
        X = as_matrix(vectors)
        labels = np.asarray(labels, dtype=int)
        return cls(labels, _means(X, labels, n_clusters), algorithm, dict(params or {}))

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "params": self.params,
            "n_clusters": self.n_clusters,
            "sizes": self.sizes,
            "noise": self.noise_count,
            "labels": [int(x) for x in self.labels],
            "centroids": [[float(x) for x in row] for row in self.centroids],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        centroids = np.asarray(d["centroids"], dtype=float)
        if centroids.size == 0:
            centroids = centroids.reshape(0, 0)
        return cls(np.asarray(d["labels"], dtype=int), centroids, d["algorithm"], dict(d.get("params", {})))


@dataclass
class ElbowReport:
    ks: list[int]
    wcss: list[float]
    selected_k: int | None
    rule: str = "max-second-difference"
    models: dict[int, ClusterModel] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        lines = ["k,wcss"]
        lines += [f"{k},{w!r}" for k, w in zip(self.ks, self.wcss)]
        return "\n".join(lines) + "\n"


# -- geometry helpers --------------------------------------------------------


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    out = np.empty((len(X), len(C)))
    for lo in range(0, len(X), _CHUNK):
        diff = X[lo:lo + _CHUNK, None, :] - C[None, :, :]
        out[lo:lo + _CHUNK] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def nearest_centroid(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, which is the lowest cluster id
    return np.argmin(_sq_dists(X, C), axis=1)


def _means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    C = np.zeros((k, X.shape[1]))
    for j in range(k):
        members = X[labels == j]
        if len(members):
            C[j] = members.mean(axis=0)
    return C


def _wcss(X: np.ndarray, labels: np.ndarray, C: np.ndarray) -> float:
    mask = labels >= 0
    if not mask.any():
        return 0.0
    diff = X[mask] - C[labels[mask]]
    return float(np.einsum("ij,ij->", diff, diff))


def n_distinct(X: np.ndarray) -> int:
    return 0 if len(X) == 0 else len(np.unique(X, axis=0))


def _check_input(X: np.ndarray):
    if X.ndim != 2 or len(X) == 0:
        raise EmptyInputError("no vectors to cluster")


def min_max_scale(vectors) -> np.ndarray:
    """Rescale each dimension to [0, 1]; constant dimensions map to 0."""
    X = as_matrix(vectors)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    return np.divide(X - lo, span, out=np.zeros_like(X), where=span > 0)


# -- k-means -----------------------------------------------------------------


def _plus_plus(X: np.ndarray, k: int, rng: np.random.Generator, centroids: np.ndarray | None = None) -> np.ndarray:
    """k-means++ seeding, optionally extending an existing set of centroids."""
    chosen = [] if centroids is None else list(centroids)
    if not chosen:
        chosen.append(X[rng.integers(len(X))])
    d2 = _sq_dists(X, np.asarray(chosen)).min(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0:
            raise ParameterError("cannot seed more centroids than there are distinct vectors")
        idx = rng.choice(len(X), p=d2 / total)
        chosen.append(X[idx])
        d2 = np.minimum(d2, _sq_dists(X, X[idx:idx + 1])[:, 0])
    return np.array(chosen, dtype=float)


def _repair_empty(X: np.ndarray, labels: np.ndarray, C: np.ndarray) -> None:
    k = len(C)
    sizes = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(sizes == 0):
        d = np.einsum("ij,ij->i", X - C[labels], X - C[labels])
        d[sizes[labels] <= 1] = -1.0
        far = int(np.argmax(d))
        sizes[labels[far]] -= 1
        labels[far] = j
        sizes[j] = 1
        C[j] = X[far]


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int, tol: float) -> tuple[np.ndarray, np.ndarray, int, bool]:
    C = C.copy()
    labels = nearest_centroid(X, C)
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels = nearest_centroid(X, C)
        _repair_empty(X, labels, C)
        new = _means(X, labels, len(C))
        shift = float(np.sqrt(np.max(np.sum((new - C) ** 2, axis=1))))
        C = new
        if shift <= tol:
            converged = True
            break
    return labels, C, n_iter, converged


def kmeans(vectors: Sequence[SessionVector] | np.ndarray, k: int, seed: int = 0,
           max_iter: int = 300, tol: float = 0.0, n_init: int = DEFAULT_N_INIT) -> ClusterModel:
    """
    Lloyd's K-Means from seeded k-means++ starts.

    ``n_init`` starts are drawn in sequence from one generator seeded with
    ``seed``; the run with the lowest WCSS wins, the earliest on ties.
    Iteration stops once no centroid moves by more than ``tol`` or after
    ``max_iter`` rounds. An empty cluster is reseeded with the point farthest
    from its centroid, so the result always has exactly ``k`` clusters.
    """
    X = as_matrix(vectors)
    _check_input(X)
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    distinct = n_distinct(X)
    if k > distinct:
        raise ParameterError(f"k={k} exceeds the number of distinct vectors ({distinct})")
    if n_init < 1:
        raise ParameterError(f"n_init must be positive, got {n_init}")
    rng = np.random.default_rng(seed)
    best, best_wcss = None, np.inf
    for _ in range(n_init):
        model = _finish_kmeans(X, _plus_plus(X, k, rng), k, seed, max_iter, tol, n_init=n_init)
        w = model.wcss(X)
        if w < best_wcss:
            best, best_wcss = model, w
    return best


def _finish_kmeans(X, init, k, seed, max_iter, tol, **extra) -> ClusterModel:
    labels, C, n_iter, converged = _lloyd(X, init, max_iter, tol)
    if not converged:
        logger.warning("k-means (k=%d) stopped after max_iter=%d without converging", k, max_iter)
    params = {"k": k, "seed": seed, "max_iter": max_iter, "tol": tol, "n_iter": n_iter, **extra}
    return ClusterModel(labels, C, "kmeans", params)


def elbow(vectors, k_range: tuple[int, int] | range, seed: int = 0,
          max_iter: int = 300, tol: float = 0.0, n_init: int = DEFAULT_N_INIT) -> ElbowReport:
    """
    WCSS curve over an inclusive range of k and the knee of that curve.

    For each k the better of two runs is kept: a fresh seeded k-means++ start
    and a warm start from the k-1 solution plus one k-means++ draw. The warm
    start can only lower WCSS, which keeps the curve non-increasing.
    Values of k above the number of distinct vectors reuse the solution at
    that number (its WCSS is already zero).
    """
    X = as_matrix(vectors)
    _check_input(X)
    lo, hi = (k_range.start, k_range.stop - 1) if isinstance(k_range, range) else k_range
    if lo < 1 or hi < lo:
        raise ParameterError(f"invalid k range {lo}..{hi}")
    distinct = n_distinct(X)
    if hi > distinct:
        logger.warning("k range %d..%d exceeds %d distinct vectors; larger k reuse k=%d", lo, hi, distinct, distinct)

    models: dict[int, ClusterModel] = {}
    prev: ClusterModel | None = None
    for k in range(1, min(hi, distinct) + 1):
        best = kmeans(X, k, seed=seed, max_iter=max_iter, tol=tol, n_init=n_init)
        if prev is not None:
            rng = np.random.default_rng([seed, k])
            warm_init = _plus_plus(X, k, rng, centroids=prev.centroids)
            warm = _finish_kmeans(X, warm_init, k, seed, max_iter, tol, warm_start=True)
            if warm.wcss(X) < best.wcss(X):
                best = warm
        prev = best
        if k >= lo:
            models[k] = best

    ks = list(range(lo, hi + 1))
    cap = min(hi, distinct)
    wcss = [models[min(k, cap)].wcss(X) for k in ks]
    for k in ks:
        if k > cap:
            models[k] = models[cap]
    return ElbowReport(ks, wcss, _knee(ks, wcss), models=models)


def _knee(ks: list[int], wcss: list[float]) -> int | None:
    if len(ks) < 3:
        return None
    second = [wcss[i - 1] - 2 * wcss[i] + wcss[i + 1] for i in range(1, len(ks) - 1)]
    best = max(second)
    if best <= 0:
        return ks[0]
    return ks[1 + second.index(best)]


# -- DBSCAN ------------------------------------------------------------------


def dbscan(vectors, eps: float, min_pts: int) -> ClusterModel:
    """
    Density-based clustering. A point is core when at least ``min_pts``
    points (itself included) lie within distance ``eps``.

    Points are scanned in input order, so a border point reachable from
    several clusters joins the one created first.
    """
    X = as_matrix(vectors)
    _check_input(X)
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ParameterError(f"min_pts must be positive, got {min_pts}")

    def region(i):
        d = np.sqrt(np.einsum("ij,ij->i", X - X[i], X - X[i]))
        return np.flatnonzero(d <= eps)

    unvisited = -2
    labels = np.full(len(X), unvisited, dtype=int)
    cluster = 0
    for i in range(len(X)):
        if labels[i] != unvisited:
            continue
        neighbours = region(i)
        if len(neighbours) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = deque(neighbours)
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster
                continue
            if labels[j] != unvisited:
                continue
            labels[j] = cluster
            nj = region(j)
            if len(nj) >= min_pts:
                queue.extend(nj)
        cluster += 1

    if cluster == 0:
        logger.warning("DBSCAN(eps=%g, min_pts=%d) labelled every point as noise", eps, min_pts)
    return ClusterModel.from_labels(X, labels, cluster, "dbscan", {"eps": eps, "min_pts": min_pts})


def suggest_eps(vectors, min_pts: int = 4) -> float:
    """Median distance to the ``min_pts``-th nearest neighbour (self excluded)."""
    X = as_matrix(vectors)
    _check_input(X)
    kth = min(min_pts, len(X) - 1)
    if kth < 1:
        return 1.0
    dists = []
    for lo in range(0, len(X), _CHUNK):
        d = np.sqrt(_sq_dists(X[lo:lo + _CHUNK], X))
        d.sort(axis=1)
        dists.append(d[:, kth])
    eps = float(np.median(np.concatenate(dists)))
    return eps if eps > 0 else 1.0


def reassign_outliers(model: ClusterModel, vectors) -> ClusterModel:
    """Move every noise point into the cluster with the nearest centroid."""
    if model.n_clusters == 0:
        raise ClusteringError("model has no clusters to absorb outliers; lower min_pts or raise eps")
    X = as_matrix(vectors)
    noise = np.flatnonzero(model.labels == NOISE)
    if len(noise) == 0:
        return model
    labels = model.labels.copy()
    labels[noise] = nearest_centroid(X[noise], model.centroids)
    params = {**model.params, "reassigned_outliers": int(len(noise))}
    return ClusterModel.from_labels(X, labels, model.n_clusters, model.algorithm, params)
