"""Handcrafted per-segment features for the first pipeline.

Every function works on the last axis, so a whole K x T channel slab is
processed at once; the single-window entry points are thin wrappers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .core import HarError
from .fft import fft, is_power_of_two
from .segmentation import CHANNELS, SegmentTensor

TIME_METRICS = ("mean", "variance", "std", "max", "min", "rms", "excess_kurtosis", "skewness", "l2_norm", "l1_norm")
FFT_METRICS = ("fft_energy", "fft_max_magnitude")
CHANNEL_METRICS = TIME_METRICS + FFT_METRICS
CHANNEL_PAIRS = tuple(combinations(range(len(CHANNELS)), 2))

FEATURE_NAMES = tuple(f"{ch}_{m}" for ch in CHANNELS for m in CHANNEL_METRICS) + tuple(
    f"corr_{CHANNELS[a]}_{CHANNELS[b]}" for a, b in CHANNEL_PAIRS
)
N_FEATURES = len(FEATURE_NAMES)

_DEGENERATE_STD = 1e-12


def _flat(var: np.ndarray, x: np.ndarray) -> np.ndarray:
    # zero variance up to rounding noise of the mean
    scale = np.maximum(1.0, np.mean(x * x, axis=-1))
    return var <= 1e-20 * scale


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    column_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            values = values.reshape(-1, len(self.column_names))
        if values.shape[1] != len(self.column_names):
            raise HarError(f"{values.shape[1]} columns but {len(self.column_names)} names")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def shape(self):
        return self.values.shape

    def __len__(self) -> int:
        return self.values.shape[0]

    def select(self, columns) -> "FeatureMatrix":
        columns = list(columns)
        return FeatureMatrix(self.values[:, columns], tuple(self.column_names[c] for c in columns))

    def to_csv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.column_names)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])


def batch_time_features(x: np.ndarray) -> np.ndarray:
    """(..., T) -> (..., 10) time-domain metrics in TIME_METRICS order."""
    x = np.asarray(x, dtype=np.float64)
    t = x.shape[-1]
    if t < 2:
        raise HarError("time features need a window of at least 2 samples")
    mean = x.mean(axis=-1)
    centered = x - mean[..., None]
    var = np.mean(centered**2, axis=-1)
    std = np.sqrt(var)
    flat = _flat(var, x)
    safe_var = np.where(flat, 1.0, var)
    m3 = np.mean(centered**3, axis=-1)
    m4 = np.mean(centered**4, axis=-1)
    skew = np.where(flat, 0.0, m3 / safe_var**1.5)
    kurt = np.where(flat, 0.0, m4 / safe_var**2 - 3.0)
    sq = np.sum(x * x, axis=-1)
    return np.stack(
        [
            mean,
            np.where(flat, 0.0, var),
            np.where(flat, 0.0, std),
            x.max(axis=-1),
            x.min(axis=-1),
            np.sqrt(sq / t),
            kurt,
            skew,
            np.sqrt(sq),
            np.abs(x).sum(axis=-1),
        ],
        axis=-1,
    )


def batch_fft_features(x: np.ndarray) -> np.ndarray:
    """(..., T) -> (..., 2): DC-free spectral energy and one-sided peak magnitude."""
    x = np.asarray(x, dtype=np.float64)
    t = x.shape[-1]
    if not is_power_of_two(t) or t < 2:
        raise HarError(f"FFT features need a power-of-two window length, got {t}")
    mag = np.abs(fft(x))
    energy = np.sum(mag[..., 1:] ** 2, axis=-1) / t
    peak = mag[..., 1 : t // 2 + 1].max(axis=-1)
    return np.stack([energy, peak], axis=-1)


def batch_cross_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lag-0 Pearson coefficient along the last axis; 0 when either side is flat."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise HarError(f"cross-correlation inputs differ in shape: {a.shape} vs {b.shape}")
    if a.shape[-1] < 2:
        raise HarError("cross-correlation needs at least 2 samples")
    ca = a - a.mean(axis=-1, keepdims=True)
    cb = b - b.mean(axis=-1, keepdims=True)
    va = np.mean(ca * ca, axis=-1)
    vb = np.mean(cb * cb, axis=-1)
    degenerate = _flat(va, a) | _flat(vb, b)
    denom = np.sqrt(np.where(degenerate, 1.0, va * vb))
    r = np.mean(ca * cb, axis=-1) / denom
    return np.where(degenerate, 0.0, np.clip(r, -1.0, 1.0))


def time_features(window) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1:
        raise HarError("time_features expects one window")
    return batch_time_features(window)


def fft_features(window) -> tuple[float, float]:
    energy, peak = batch_fft_features(np.asarray(window, dtype=np.float64).reshape(-1))
    return float(energy), float(peak)


def cross_correlation(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    return float(batch_cross_correlation(a, b))


def extract_features(tensor: SegmentTensor) -> FeatureMatrix:
    """K x T x 4 tensor -> K x 54 matrix in FEATURE_NAMES order."""
    k, t, m = tensor.shape
    if m != len(CHANNELS):
        raise HarError(f"expected {len(CHANNELS)} channels, got {m}")
    if k == 0:
        return FeatureMatrix(np.zeros((0, N_FEATURES)))
    per_channel = np.swapaxes(tensor.data, 1, 2)  # K x m x T
    blocks = np.concatenate([batch_time_features(per_channel), batch_fft_features(per_channel)], axis=-1)
    corr = np.stack(
        [batch_cross_correlation(per_channel[:, a], per_channel[:, b]) for a, b in CHANNEL_PAIRS], axis=1
    )
    return FeatureMatrix(np.concatenate([blocks.reshape(k, -1), corr], axis=1))


@dataclass(frozen=True, eq=False)
class ZScoreStats:
    means: np.ndarray = field(default=None)
    stds: np.ndarray = field(default=None)

    @property
    def fitted(self) -> bool:
        return self.means is not None and self.stds is not None


def zscore_fit(train) -> ZScoreStats:
    values = train.values if isinstance(train, FeatureMatrix) else np.asarray(train, dtype=np.float64)
    if values.shape[0] < 2:
        raise HarError("z-score fit needs at least 2 rows")
    return ZScoreStats(values.mean(axis=0), values.std(axis=0))


def zscore_apply(stats: ZScoreStats, matrix):
    if stats is None or not stats.fitted:
        raise HarError("z-score stats are not fitted")
    is_fm = isinstance(matrix, FeatureMatrix)
    values = matrix.values if is_fm else np.asarray(matrix, dtype=np.float64)
    if values.shape[1] != len(stats.means):
        raise HarError(f"matrix has {values.shape[1]} columns, stats were fitted on {len(stats.means)}")
    degenerate = stats.stds < _DEGENERATE_STD
    scale = np.where(degenerate, 1.0, stats.stds)
    out = np.where(degenerate, 0.0, (values - stats.means) / scale)
    return FeatureMatrix(out, matrix.column_names) if is_fm else out
