"""Intensity K-means (Lloyd with k-means++ seeding) and ROI masking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_K = 3
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6


class DegenerateInputError(ValueError):
    """Fewer distinct intensities than requested clusters."""


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k,) strictly ascending
    labels: np.ndarray  # same shape as the clustered image
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    d2 = (x - centers[0]) ** 2
    for _ in range(1, k):
        total = d2.sum()
        # k-means++: sample the next centre with probability proportional to D^2
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
        idx = min(idx, len(x) - 1)
        centers.append(x[idx])
        d2 = np.minimum(d2, (x - x[idx]) ** 2)
    return np.array(centers, dtype=np.float64)


def _assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid labels for ascending 1-D centroids (ties go low)."""
    mid = 0.5 * (centroids[1:] + centroids[:-1])
    return np.searchsorted(mid, x, side="left")


def _inertia(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(np.sum((x - centroids[labels]) ** 2))


def kmeans_intensity(
    img: np.ndarray,
    k: int = DEFAULT_K,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> KMeansResult:
    """Cluster pixel intensities into k groups.

    Centroids come back sorted ascending and labels are indexed to match, so
    label k-1 is always the brightest cluster. `inertia_history` holds the
    inertia after every assignment step.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    img = np.asarray(img, dtype=np.float64)
    x = img.ravel()
    n_distinct = len(np.unique(x))
    if n_distinct < k:
        raise DegenerateInputError(f"image has {n_distinct} distinct values, need at least k={k}")

    rng = np.random.default_rng(seed)
    centroids = np.sort(_kmeanspp_init(x, k, rng))
    labels = _assign(x, centroids)
    history = [_inertia(x, labels, centroids)]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=x, minlength=k)
        # an emptied cluster keeps its previous centroid
        new = np.where(counts > 0, sums / np.maximum(counts, 1), centroids)
        new.sort()
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        labels = _assign(x, centroids)
        history.append(_inertia(x, labels, centroids))
        if shift < tol:
            break

    if k > 1 and np.any(np.diff(centroids) <= 0):
        raise DegenerateInputError(f"clusters merged: centroids {centroids.tolist()}")
    return KMeansResult(
        centroids=centroids,
        labels=labels.reshape(img.shape),
        inertia=history[-1],
        iterations=iterations,
        inertia_history=history,
    )


def select_roi_cluster(result: KMeansResult) -> int:
    """Index of the brightest cluster."""
    return int(np.argmax(result.centroids))


def roi_mask(result: KMeansResult, cluster: int | None = None) -> np.ndarray:
    if cluster is None:
        cluster = select_roi_cluster(result)
    return result.labels == cluster


def apply_mask(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if img.shape != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image shape {img.shape}")
    return np.where(mask, img, 0.0)


def segment_roi(img: np.ndarray, seed: int, k: int = DEFAULT_K) -> np.ndarray:
    """K-means, keep the brightest cluster, zero everything else."""
    result = kmeans_intensity(img, k=k, seed=seed)
    return apply_mask(img, roi_mask(result))
