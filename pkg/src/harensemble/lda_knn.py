"""Second pipeline: per-axis LDA on raw windows, concatenation, k-nearest neighbors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import HarError
from .features import FeatureMatrix
from .segmentation import CHANNELS, SegmentTensor

RIDGE_FACTOR = 1e-6
_QUERY_CHUNK = 64


@dataclass(frozen=True, eq=False)
class LdaAxisModel:
    """Projection basis (T x p) for one channel plus the fit diagnostics."""

    basis: np.ndarray
    eigenvalues: np.ndarray
    classes: tuple
    class_means: np.ndarray
    ridge: float

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    def transform(self, windows) -> np.ndarray:
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 2 or windows.shape[1] != self.basis.shape[0]:
            raise HarError(f"expected K x {self.basis.shape[0]} windows, got shape {windows.shape}")
        return windows @ self.basis


def scatter_matrices(windows: np.ndarray, labels: np.ndarray):
    """Within-class and between-class scatter, plus per-class means."""
    classes = np.unique(labels)
    mu = windows.mean(axis=0)
    t = windows.shape[1]
    s_w = np.zeros((t, t))
    s_b = np.zeros((t, t))
    means = []
    for c in classes:
        xc = windows[labels == c]
        mc = xc.mean(axis=0)
        centered = xc - mc
        s_w += centered.T @ centered
        diff = (mc - mu)[:, None]
        s_b += len(xc) * (diff @ diff.T)
        means.append(mc)
    return s_w, s_b, classes, np.array(means)


def fit_lda_axis(windows, labels, ridge_factor: float = RIDGE_FACTOR) -> LdaAxisModel:
    """Solve ``S_b v = lambda (S_w + ridge I) v`` and keep the top l-1 directions.

    ``ridge = ridge_factor * trace(S_w) / T`` keeps the problem definite
    when windows are longer than the per-class sample counts.
    """
    x = np.asarray(windows, dtype=np.float64)
    y = np.asarray(labels).reshape(-1)
    if x.ndim != 2 or len(x) != len(y):
        raise HarError("fit_lda_axis expects K x T windows and K labels")
    if not np.all(np.isfinite(x)):
        raise HarError("LDA input contains non-finite values")
    n_classes = len(np.unique(y))
    if n_classes < 2:
        raise HarError("LDA needs at least two classes")
    if len(x) <= n_classes:
        raise HarError(f"LDA needs more windows ({len(x)}) than classes ({n_classes})")
    t = x.shape[1]
    s_w, s_b, classes, means = scatter_matrices(x, y)
    ridge = ridge_factor * np.trace(s_w) / t
    if ridge <= 0:
        ridge = ridge_factor
    evals, evecs = scipy.linalg.eigh(s_b, s_w + ridge * np.eye(t))
    p = min(n_classes - 1, t)
    top = np.argsort(evals, kind="stable")[::-1][:p]
    basis = evecs[:, top]
    # deterministic sign: largest-magnitude entry of each direction is positive
    pivot = np.argmax(np.abs(basis), axis=0)
    basis = basis * np.sign(basis[pivot, np.arange(p)])
    return LdaAxisModel(basis, evals[top], tuple(int(c) for c in classes), means, float(ridge))


def fit_lda_axes(tensor: SegmentTensor, ridge_factor: float = RIDGE_FACTOR) -> list[LdaAxisModel]:
    return [fit_lda_axis(tensor.channel(c), tensor.labels, ridge_factor) for c in range(tensor.shape[2])]


def transform_concat(models: Sequence[LdaAxisModel], tensor: SegmentTensor) -> FeatureMatrix:
    """Project each channel with its own model and concatenate in channel order."""
    k, t, m = tensor.shape
    if m != len(models):
        raise HarError(f"tensor has {m} channels but {len(models)} axis models were given")
    names = tuple(f"lda_{CHANNELS[c]}_{i}" for c, mod in enumerate(models) for i in range(mod.n_components))
    if k == 0:
        return FeatureMatrix(np.zeros((0, len(names))), names)
    parts = [mod.transform(tensor.channel(c)) for c, mod in enumerate(models)]
    return FeatureMatrix(np.concatenate(parts, axis=1), names)


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise HarError("k must be ≥ 1")


def _vote(labels: np.ndarray, dists: np.ndarray) -> int:
    classes, counts = np.unique(labels, return_counts=True)
    best = counts.max()
    tied = classes[counts == best]
    if len(tied) == 1:
        return int(tied[0])
    sums = np.array([dists[labels == c].sum() for c in tied])
    # np.unique sorts, so argmin resolves equal sums to the lowest class id
    return int(tied[np.argmin(sums)])


def knn_predict(train_features, train_labels, query_features, config: KnnConfig = KnnConfig()) -> np.ndarray:
    """Plurality label among the k Euclidean-nearest training rows.

    Vote ties go to the class with the smaller summed neighbor distance,
    then to the lower class id; equidistant rows resolve to the lower
    training index.
    """
    train = np.asarray(getattr(train_features, "values", train_features), dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64).reshape(-1)
    query = np.asarray(getattr(query_features, "values", query_features), dtype=np.float64)
    if len(train) == 0:
        raise HarError("KNN needs a non-empty training set")
    if len(y) != len(train):
        raise HarError("training features and labels disagree on the row count")
    if config.k > len(train):
        raise HarError(f"k={config.k} exceeds the {len(train)} training rows")
    if query.ndim == 1:
        query = query.reshape(0 if query.size == 0 else 1, -1)
    if len(query) == 0:
        return np.zeros(0, dtype=np.int64)
    if query.shape[1] != train.shape[1]:
        raise HarError(f"query dimension {query.shape[1]} != training dimension {train.shape[1]}")
    k = config.k
    out = np.empty(len(query), dtype=np.int64)
    for lo in range(0, len(query), _QUERY_CHUNK):
        q = query[lo : lo + _QUERY_CHUNK]
        d2 = np.sum((q[:, None, :] - train[None, :, :]) ** 2, axis=2)
        if k == 1:
            out[lo : lo + len(q)] = y[np.argmin(d2, axis=1)]
            continue
        nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k]
        for r, idx in enumerate(nbrs):
            out[lo + r] = _vote(y[idx], np.sqrt(d2[r, idx]))
    return out


@dataclass(frozen=True, eq=False)
class LdaKnnModel:
    axes: tuple
    train_features: FeatureMatrix
    train_labels: np.ndarray
    knn: KnnConfig

    def predict(self, tensor: SegmentTensor) -> np.ndarray:
        return knn_predict(self.train_features, self.train_labels, transform_concat(self.axes, tensor), self.knn)


def fit_lda_knn(tensor: SegmentTensor, knn: KnnConfig = KnnConfig(), ridge_factor: float = RIDGE_FACTOR) -> LdaKnnModel:
    axes = tuple(fit_lda_axes(tensor, ridge_factor))
    return LdaKnnModel(axes, transform_concat(axes, tensor), tensor.labels.copy(), knn)
