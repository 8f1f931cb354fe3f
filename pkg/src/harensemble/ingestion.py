"""Reading and writing the 10-column accelerometer CSV dataset."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    ACTIVITY_IDS,
    ACTIVITY_NAMES,
    DEFAULT_SAMPLE_RATE_HZ,
    TRANSITIONAL,
    HarError,
    LabeledStream,
)

HEADER = ["index", "participant", "participant_ref", "trial", "timestamp", "ax", "ay", "az", "an", "activity"]
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S.%f"
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def compute_norm(ax, ay, az):
    """Euclidean norm of the three axes; works on scalars and arrays."""
    ax, ay, az = (np.asarray(v, dtype=np.float64) for v in (ax, ay, az))
    if not (np.all(np.isfinite(ax)) and np.all(np.isfinite(ay)) and np.all(np.isfinite(az))):
        raise HarError("compute_norm requires finite inputs")
    an = np.sqrt(ax * ax + ay * ay + az * az)
    return float(an) if an.ndim == 0 else an


def parse_timestamp(text: str) -> int:
    """``YYYY-mm-dd HH:MM:SS.FFF`` to integer milliseconds since the epoch (UTC)."""
    dt = datetime.strptime(text.strip(), TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    delta = dt - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def format_timestamp(ms: int) -> str:
    dt = _EPOCH + timedelta(milliseconds=int(ms))
    return dt.strftime("%Y-%m-%d %H:%M:%S.") + f"{dt.microsecond // 1000:03d}"


def drop_transitional(stream: LabeledStream) -> LabeledStream:
    """Remove transitional samples, keeping order. Holes in the timestamp
    sequence are left in place and break segmentation windows later."""
    keep = stream.labels != TRANSITIONAL
    if keep.all():
        return stream
    return stream.subset(keep)


def parse_dataset(path) -> list[LabeledStream]:
    """Parse a dataset CSV into one stream per (participant, trial).

    The ``an`` column is ignored and recomputed from the axes. Streams are
    returned sorted by (participant, trial); transitional samples are kept,
    use :func:`load_dataset` to get filtered streams.
    """
    path = Path(path)
    groups: dict[tuple[int, int], list[tuple]] = defaultdict(list)
    refs: dict[tuple[int, int], str] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HarError(f"{path}: empty file, header row expected") from None
        if [h.strip().lower() for h in header] != HEADER:
            raise HarError(f"{path}:1: bad header {header!r}, expected {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise HarError(f"{path}:{lineno}: expected {len(HEADER)} columns, got {len(row)}")
            activity = row[9].strip()
            if activity not in ACTIVITY_IDS:
                raise HarError(
                    f"{path}:{lineno}: unknown activity {activity!r}; valid names: {', '.join(ACTIVITY_IDS)}"
                )
            try:
                subject = int(row[1])
                trial = int(row[3])
                ts = parse_timestamp(row[4])
                ax, ay, az = float(row[5]), float(row[6]), float(row[7])
            except ValueError as exc:
                raise HarError(f"{path}:{lineno}: malformed row ({exc})") from None
            if not all(math.isfinite(v) for v in (ax, ay, az)):
                raise HarError(f"{path}:{lineno}: non-finite acceleration value")
            key = (subject, trial)
            groups[key].append((ts, ax, ay, az, ACTIVITY_IDS[activity], lineno))
            refs.setdefault(key, row[2].strip())

    streams = []
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda r: r[0])
        ts = np.array([r[0] for r in rows], dtype=np.int64)
        dup = np.flatnonzero(np.diff(ts) <= 0)
        if dup.size:
            line = rows[dup[0] + 1][5]
            raise HarError(
                f"{path}:{line}: non-monotonic timestamps in participant {key[0]} trial {key[1]}"
            )
        cols = np.array([r[1:4] for r in rows], dtype=np.float64).reshape(-1, 3)
        streams.append(
            LabeledStream(
                subject_id=key[0],
                trial_id=key[1],
                timestamps_ms=ts,
                ax=cols[:, 0],
                ay=cols[:, 1],
                az=cols[:, 2],
                an=compute_norm(cols[:, 0], cols[:, 1], cols[:, 2]),
                labels=np.array([r[4] for r in rows], dtype=np.int64),
                sample_rate_hz=_infer_rate(ts),
                participant_ref=refs[key],
            )
        )
    return streams


def _infer_rate(ts: np.ndarray) -> int:
    if len(ts) < 2:
        return DEFAULT_SAMPLE_RATE_HZ
    period = float(np.median(np.diff(ts)))
    # ms resolution jitters the period (64 Hz -> 15/16 ms); snap to the default when close
    if abs(1000.0 / period - DEFAULT_SAMPLE_RATE_HZ) < 0.05 * DEFAULT_SAMPLE_RATE_HZ:
        return DEFAULT_SAMPLE_RATE_HZ
    return max(1, round(1000.0 / period))


def load_dataset(path) -> list[LabeledStream]:
    """Parse and drop the transitional class; empty streams are discarded."""
    streams = [drop_transitional(s) for s in parse_dataset(path)]
    return [s for s in streams if len(s)]


def write_dataset(streams: Iterable[LabeledStream], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        index = 0
        for s in streams:
            for ts, ax, ay, az, an, lab in zip(s.timestamps_ms, s.ax, s.ay, s.az, s.an, s.labels):
                writer.writerow(
                    [
                        index,
                        s.subject_id,
                        s.participant_ref,
                        s.trial_id,
                        format_timestamp(ts),
                        repr(float(ax)),
                        repr(float(ay)),
                        repr(float(az)),
                        repr(float(an)),
                        ACTIVITY_NAMES[int(lab)],
                    ]
                )
                index += 1


def class_counts(streams: Sequence[LabeledStream]) -> dict[int, int]:
    counts: dict[int, int] = defaultdict(int)
    for s in streams:
        ids, n = np.unique(s.labels, return_counts=True)
        for i, c in zip(ids, n):
            counts[int(i)] += int(c)
    return dict(sorted(counts.items()))
