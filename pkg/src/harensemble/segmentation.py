"""Fixed-size overlapping sliding windows and the K x T x m segment tensor."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import HarError, LabeledStream

CHANNELS = ("ax", "ay", "az", "an")
GAP_FACTOR = 1.5


@dataclass(frozen=True)
class WindowSpec:
    window_samples: int = 64
    overlap_fraction: float = 0.5

    def __post_init__(self):
        if self.window_samples < 2:
            raise HarError("window_samples must be ≥ 2")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise HarError("overlap_fraction must lie in [0, 1)")
        if self.stride < 1:
            raise HarError("window stride rounds to 0; lower the overlap")

    @property
    def stride(self) -> int:
        # round half up
        return int(math.floor(self.window_samples * (1.0 - self.overlap_fraction) + 0.5))


@dataclass(frozen=True, eq=False)
class SegmentTensor:
    """Label-pure windows stacked as ``data[k, t, channel]``.

    ``provenance`` rows are (subject_id, trial_id, start_index).
    """

    data: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise HarError(f"segment data must be K x T x m, got shape {data.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        prov = np.asarray(self.provenance, dtype=np.int64).reshape(-1, 3)
        if len(labels) != data.shape[0] or len(prov) != data.shape[0]:
            raise HarError("labels/provenance length must equal the segment count")
        for arr in (data, labels, prov):
            arr.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", prov)

    @classmethod
    def empty(cls, window_samples: int, n_channels: int = 4) -> "SegmentTensor":
        return cls(np.zeros((0, window_samples, n_channels)), np.zeros(0, np.int64), np.zeros((0, 3), np.int64))

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def channel(self, c: int) -> np.ndarray:
        return self.data[:, :, c]

    def take(self, idx) -> "SegmentTensor":
        return SegmentTensor(self.data[idx], self.labels[idx], self.provenance[idx])


def count_segments(n: int, t: int, stride: int) -> int:
    """Number of candidate windows of length ``t`` over ``n`` samples."""
    if t < 1 or stride < 1:
        raise HarError("window length and stride must be ≥ 1")
    return (n - t) // stride + 1 if n >= t else 0


def _window_starts(stream: LabeledStream, spec: WindowSpec) -> np.ndarray:
    n, t, stride = len(stream), spec.window_samples, spec.stride
    k = count_segments(n, t, stride)
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.arange(k, dtype=np.int64) * stride

    labels = stream.labels
    change = np.concatenate([[0], np.cumsum(labels[1:] != labels[:-1])])
    period = 1000.0 / stream.sample_rate_hz
    gaps = np.diff(stream.timestamps_ms) > GAP_FACTOR * period
    gap_count = np.concatenate([[0], np.cumsum(gaps)])
    # window [s, s+t) is pure iff no label change and no gap between s and s+t-1
    ends = starts + t - 1
    pure = change[ends] == change[starts]
    contiguous = gap_count[ends] == gap_count[starts]
    return starts[pure & contiguous]


def segment_stream(stream: LabeledStream, spec: WindowSpec = WindowSpec()) -> SegmentTensor:
    """Slide a window over one stream and keep the label-pure, gap-free windows."""
    starts = _window_starts(stream, spec)
    t = spec.window_samples
    if len(starts) == 0:
        return SegmentTensor.empty(t, len(CHANNELS))
    channels = stream.channels
    idx = starts[:, None] + np.arange(t)[None, :]
    data = channels[idx]
    prov = np.stack(
        [np.full(len(starts), stream.subject_id), np.full(len(starts), stream.trial_id), starts], axis=1
    )
    return SegmentTensor(data, stream.labels[starts], prov)


def concat_segments(parts: Sequence[SegmentTensor], window_samples: int) -> SegmentTensor:
    parts = [p for p in parts if len(p)]
    if not parts:
        return SegmentTensor.empty(window_samples, len(CHANNELS))
    return SegmentTensor(
        np.concatenate([p.data for p in parts]),
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.provenance for p in parts]),
    )


def segment_streams(streams: Sequence[LabeledStream], spec: WindowSpec = WindowSpec()) -> SegmentTensor:
    """Segment each stream on its own and stack the results in input order."""
    return concat_segments([segment_stream(s, spec) for s in streams], spec.window_samples)


_HEADER = struct.Struct("<QQQ")


def save_segments(tensor: SegmentTensor, path) -> None:
    """Binary dump: u64 K,T,m header, f64 data (row-major), u32 labels; little endian.

    Provenance is not part of the format.
    """
    k, t, m = tensor.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(k, t, m))
        fh.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(tensor.labels, dtype="<u4").tobytes())


def load_segments(path) -> SegmentTensor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise HarError(f"{path}: truncated segment file")
    k, t, m = _HEADER.unpack_from(raw)
    n_data = k * t * m * 8
    expected = _HEADER.size + n_data + k * 4
    if len(raw) != expected:
        raise HarError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", count=k * t * m, offset=_HEADER.size).reshape(k, t, m)
    labels = np.frombuffer(raw, dtype="<u4", count=k, offset=_HEADER.size + n_data)
    return SegmentTensor(data.astype(np.float64), labels.astype(np.int64), np.zeros((k, 3), np.int64))
