"""ReliefF feature weighting (Kononenko's multi-class variant) and top-k selection."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import HarError

_CHUNK = 256


@dataclass(frozen=True)
class ReliefFConfig:
    n_samples: Union[int, str] = "all"
    k_neighbors: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise HarError("k_neighbors must be ≥ 1")
        if self.n_samples != "all" and (not isinstance(self.n_samples, int) or self.n_samples < 1):
            raise HarError("n_samples must be 'all' or a positive integer")


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    weights: np.ndarray
    order: np.ndarray
    warnings: tuple = field(default=())


def rank_order(weights) -> np.ndarray:
    """Descending weight, ties broken by ascending column index."""
    weights = np.asarray(weights, dtype=np.float64)
    return np.lexsort((np.arange(len(weights)), -weights))


def _sq_distances(block: np.ndarray, x: np.ndarray, x_sq: np.ndarray) -> np.ndarray:
    d = np.sum(block * block, axis=1)[:, None] + x_sq[None, :] - 2.0 * (block @ x.T)
    return np.maximum(d, 0.0)


def _nearest(dist: np.ndarray, k: int) -> np.ndarray:
    # lowest row index wins among equidistant candidates
    if k == 1:
        return np.argmin(dist, axis=1)[:, None]
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def relieff_rank(features, labels, config: ReliefFConfig = ReliefFConfig()) -> FeatureRanking:
    """Weight every column by how well it separates nearest misses from nearest hits.

    ``features`` is a FeatureMatrix or an n x d array (already z-scored).
    Neighbors come from the Euclidean distance on the full row; per-column
    differences are range-normalized over the training data.
    """
    x = getattr(features, "values", features)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(labels).reshape(-1)
    n, d = x.shape
    if len(y) != n:
        raise HarError("labels and features disagree on the row count")
    classes, y_idx, counts = np.unique(y, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise HarError("ReliefF needs at least two classes")
    priors = counts / n

    if config.n_samples == "all":
        sampled = np.arange(n)
    else:
        if config.n_samples > n:
            raise HarError(f"n_samples={config.n_samples} exceeds the {n} training rows")
        rng = np.random.default_rng(config.seed)
        sampled = np.sort(rng.choice(n, size=config.n_samples, replace=False))
    m = len(sampled)

    span = x.max(axis=0) - x.min(axis=0)
    inv_span = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
    x_sq = np.sum(x * x, axis=1)
    class_masks = [y_idx == c for c in range(len(classes))]

    k = config.k_neighbors
    notes = []
    for c, cnt in enumerate(counts):
        if cnt < k + 1:
            notes.append(f"class {classes[c]} has {cnt} rows; using {max(cnt - 1, 0)} hits instead of {k}")

    weights = np.zeros(d)
    for lo in range(0, m, _CHUNK):
        rows = sampled[lo : lo + _CHUNK]
        dist = _sq_distances(x[rows], x, x_sq)
        dist[np.arange(len(rows)), rows] = np.inf
        own = y_idx[rows]
        for c in range(len(classes)):
            candidates = np.where(class_masks[c][None, :], dist, np.inf)
            avail = counts[c]
            for is_hit in (True, False):
                sel = own == c if is_hit else own != c
                if not sel.any():
                    continue
                k_used = min(k, avail - 1) if is_hit else min(k, avail)
                if k_used < 1:
                    continue
                nbrs = _nearest(candidates[sel], k_used)
                r = x[rows[sel]]
                diff = np.abs(r[:, None, :] - x[nbrs]) * inv_span
                per_row = diff.sum(axis=1) / (m * k_used)
                if is_hit:
                    weights -= per_row.sum(axis=0)
                else:
                    scale = priors[c] / (1.0 - priors[own[sel]])
                    weights += (scale[:, None] * per_row).sum(axis=0)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return FeatureRanking(weights, rank_order(weights), tuple(notes))


def select_top(ranking: FeatureRanking, n_keep: int) -> np.ndarray:
    """Indices of the ``n_keep`` best columns, in ascending column order."""
    d = len(ranking.weights)
    if not 1 <= n_keep <= d:
        raise HarError(f"n_keep must lie in 1..{d}, got {n_keep}")
    return np.sort(ranking.order[:n_keep])
