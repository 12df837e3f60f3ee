"""Normalized maximum-entropy heterogeneity metric.

Firms are clustered on (ln K, ln L).  Within each cluster the maximum
entropy of ln Y is approximated from its range and mean; the realized
entropy H* is the Shannon entropy of a within-cluster histogram of ln Y.
Both are averaged with weights n_c / n and H_norm = H* / H_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyCluster, EmptyPanel

DEFAULT_CLUSTERS = 10
DEFAULT_BINS = 10
DEFAULT_SEED = 42


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    seed: int | None
    iterations_run: int
    inertia: float
    requested_k: int = DEFAULT_CLUSTERS


@dataclass(frozen=True)
class ClusterEntropyRow:
    cluster: int
    n_c: int
    weight: float
    y_min: float
    y_max: float
    y_mean: float
    h_max_cluster: float
    h_star_cluster: float = 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.cluster,
            "n": self.n_c,
            "weight": self.weight,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "y_mean": self.y_mean,
            "h_cluster": self.h_max_cluster,
            "h_star_cluster": self.h_star_cluster,
        }


@dataclass(frozen=True)
class MEReport:
    h_max: float
    h_star: float
    h_norm: float
    rows: tuple[ClusterEntropyRow, ...]
    bins: int
    seed: int | None
    model: ClusterModel | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "h_max": self.h_max,
            "h_star": self.h_star,
            "h_norm": self.h_norm,
            "bins": self.bins,
            "seed": self.seed,
            "clusters": [r.to_dict() for r in self.rows],
        }


def _sq_dist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers.append(X[idx])
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def kmeans_fit(
    X,
    k: int = DEFAULT_CLUSTERS,
    seed: int | None = DEFAULT_SEED,
    max_iter: int = 300,
    tol: float = 1e-4,
    standardize: bool = False,
) -> ClusterModel:
    """Lloyd's k-means with k-means++ seeding.

    Stops once the summed squared centroid shift drops below ``tol``.
    Empty clusters are re-seeded with the point farthest from its
    centroid.  ``k`` is reduced to ``len(X)`` for tiny samples.  Ties go
    to the lowest centroid index.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyPanel("k-means needs a nonempty (n, dim) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("k-means input must be finite")
    requested = k
    k = max(1, min(k, X.shape[0]))
    Z = X
    if standardize:
        sd = X.std(axis=0)
        Z = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)

    rng = np.random.default_rng(seed)
    C = _kmeans_pp(Z, k, rng)
    it = 0
    for it in range(1, max_iter + 1):
        labels = _sq_dist(Z, C).argmin(axis=1)
        newC = C.copy()
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c]:
                newC[c] = Z[labels == c].mean(axis=0)
        for c in np.flatnonzero(counts == 0):
            own = ((Z - newC[labels]) ** 2).sum(axis=1)
            far = int(own.argmax())
            if own[far] == 0:
                break
            newC[c] = Z[far]
            labels[far] = c
        shift = float(((newC - C) ** 2).sum())
        C = newC
        if shift < tol:
            break

    d2 = _sq_dist(Z, C)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(Z)), labels].sum())
    return ClusterModel(k, C, labels, seed, it, inertia, requested)


def cluster_max_entropy(y_values: Sequence[float]) -> float:
    """ln(range) + ln(mean) of log-output values, clamped at 0.

    Zero range, non-positive mean or a non-finite result all give 0.
    """
    y = np.asarray(y_values, dtype=float)
    if y.size == 0:
        raise EmptyCluster("cluster has no observations")
    spread = float(y.max() - y.min())
    mean = math.fsum(y.tolist()) / y.size
    if spread <= 0 or mean <= 0:
        return 0.0
    h = math.log(spread) + math.log(mean)
    if not math.isfinite(h):
        return 0.0
    return max(h, 0.0)


def shannon_entropy(probabilities: Sequence[float]) -> float:
    """-sum p ln p over the positive entries."""
    p = np.asarray(probabilities, dtype=float)
    p = p[p > 0]
    return float(-math.fsum((p * np.log(p)).tolist())) + 0.0


def binned_entropy(values: Sequence[float], bins: int = DEFAULT_BINS) -> float:
    """Shannon entropy of a histogram with ``bins`` equal-width bins over [min, max]."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyCluster("cluster has no observations")
    lo, hi = float(v.min()), float(v.max())
    if hi - lo <= 0:
        return 0.0
    counts, _ = np.histogram(v, bins=bins, range=(lo, hi))
    return shannon_entropy(counts / v.size)


def _panel_arrays(panel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(panel) == 0:
        raise EmptyPanel("panel has no observations")
    arr = np.array([(o.y, o.k, o.l) for o in panel], dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("entropy metrics need y, k, l > 0")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _cluster_rows(logy: np.ndarray, model: ClusterModel, bins: int) -> tuple[ClusterEntropyRow, ...]:
    n = logy.size
    rows = []
    for c in range(model.k):
        members = logy[model.assignments == c]
        if members.size == 0:
            continue
        rows.append(ClusterEntropyRow(
            cluster=c,
            n_c=int(members.size),
            weight=members.size / n,
            y_min=float(members.min()),
            y_max=float(members.max()),
            y_mean=math.fsum(members.tolist()) / members.size,
            h_max_cluster=cluster_max_entropy(members),
            h_star_cluster=binned_entropy(members, bins) if bins else 0.0,
        ))
    return tuple(rows)


def _fit_clusters(panel, k, seed, standardize):
    y, cap, lab = _panel_arrays(panel)
    model = kmeans_fit(np.column_stack([np.log(cap), np.log(lab)]), k=k, seed=seed,
                       standardize=standardize)
    return np.log(y), model


def h_max(panel, k: int = DEFAULT_CLUSTERS, seed: int | None = DEFAULT_SEED,
          standardize: bool = False) -> MEReport:
    """Weighted cluster maximum entropy; ``h_star``/``h_norm`` left at 0."""
    logy, model = _fit_clusters(panel, k, seed, standardize)
    rows = _cluster_rows(logy, model, 0)
    total = math.fsum(r.weight * r.h_max_cluster for r in rows)
    return MEReport(total, 0.0, 0.0, rows, 0, seed, model)


def h_star(panel, cluster_model: ClusterModel, bins: int = DEFAULT_BINS) -> float:
    """Weighted within-cluster binned Shannon entropy of ln Y."""
    y, _, _ = _panel_arrays(panel)
    if len(y) != len(cluster_model.assignments):
        raise ValueError("cluster model was fitted on a different panel")
    rows = _cluster_rows(np.log(y), cluster_model, bins)
    return math.fsum(r.weight * r.h_star_cluster for r in rows)


def normalized_me(h_star_value: float, h_max_value: float) -> float:
    if h_max_value <= 0:
        return 0.0
    return min(max(h_star_value / h_max_value, 0.0), 1.0)


def me_report(panel, k: int = DEFAULT_CLUSTERS, seed: int | None = DEFAULT_SEED,
              bins: int = DEFAULT_BINS, standardize: bool = False) -> MEReport:
    """Full entropy bundle: H_max, H*, H_norm and per-cluster rows."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    logy, model = _fit_clusters(panel, k, seed, standardize)
    rows = _cluster_rows(logy, model, bins)
    hm = math.fsum(r.weight * r.h_max_cluster for r in rows)
    hs = math.fsum(r.weight * r.h_star_cluster for r in rows)
    return MEReport(hm, hs, normalized_me(hs, hm), rows, bins, seed, model)
