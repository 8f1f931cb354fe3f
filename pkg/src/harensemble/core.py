"""Shared domain types: activity vocabulary, labeled streams and subject splits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

# Fixed vocabulary so confusion-matrix axes are stable across runs.
ACTIVITY_NAMES: dict[int, str] = {
    1: "up-stairs",
    2: "down-stairs",
    3: "walk",
    4: "run",
    5: "sit",
    6: "fall-right",
    7: "fall-left",
    8: "fall-front",
    9: "fall-back",
    10: "lie",
    11: "transitional",
}
ACTIVITY_IDS: dict[str, int] = {name: idx for idx, name in ACTIVITY_NAMES.items()}
TRANSITIONAL = 11
CLASSIFIABLE = tuple(range(1, 11))

DEFAULT_SAMPLE_RATE_HZ = 64


class HarError(ValueError):
    """Raised for invalid inputs anywhere in the pipeline."""


@dataclass(frozen=True)
class ActivityLabel:
    id: int
    name: str

    def __post_init__(self):
        if self.id not in ACTIVITY_NAMES:
            raise HarError(f"activity id {self.id} outside 1..11")
        if ACTIVITY_NAMES[self.id] != self.name:
            raise HarError(f"activity id {self.id} is {ACTIVITY_NAMES[self.id]!r}, not {self.name!r}")

    @classmethod
    def from_id(cls, idx: int) -> "ActivityLabel":
        if idx not in ACTIVITY_NAMES:
            raise HarError(f"activity id {idx} outside 1..11")
        return cls(idx, ACTIVITY_NAMES[idx])

    @classmethod
    def from_name(cls, name: str) -> "ActivityLabel":
        try:
            return cls(ACTIVITY_IDS[name], name)
        except KeyError:
            valid = ", ".join(ACTIVITY_IDS)
            raise HarError(f"unknown activity {name!r}; valid names: {valid}") from None


def label_name(idx: int) -> str:
    return ACTIVITY_NAMES[int(idx)]


class Sample(NamedTuple):
    timestamp_ms: int
    ax: float
    ay: float
    az: float
    an: float
    label: int


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledStream:
    """One participant-trial recording stored column-wise.

    Columns are read-only numpy arrays of equal length; ``an`` is the
    Euclidean norm of the three axes.
    """

    subject_id: int
    trial_id: int
    timestamps_ms: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray
    an: np.ndarray
    labels: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
    participant_ref: str = ""

    def __post_init__(self):
        object.__setattr__(self, "timestamps_ms", _frozen(self.timestamps_ms, np.int64))
        for name in ("ax", "ay", "az", "an"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        n = len(self.timestamps_ms)
        for name in ("ax", "ay", "az", "an", "labels"):
            if len(getattr(self, name)) != n:
                raise HarError(f"column {name} has {len(getattr(self, name))} rows, expected {n}")
        if self.sample_rate_hz <= 0:
            raise HarError("sample_rate_hz must be positive")
        if not self.participant_ref:
            object.__setattr__(self, "participant_ref", f"P{self.subject_id:02d}")

    def __len__(self) -> int:
        return len(self.timestamps_ms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledStream):
            return NotImplemented
        return (
            self.key == other.key
            and self.sample_rate_hz == other.sample_rate_hz
            and self.participant_ref == other.participant_ref
            and all(
                np.array_equal(getattr(self, c), getattr(other, c))
                for c in ("timestamps_ms", "ax", "ay", "az", "an", "labels")
            )
        )

    __hash__ = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.subject_id, self.trial_id)

    @property
    def channels(self) -> np.ndarray:
        """N x 4 array in (Ax, Ay, Az, An) order."""
        return np.stack([self.ax, self.ay, self.az, self.an], axis=1)

    def samples(self) -> Iterator[Sample]:
        for row in zip(self.timestamps_ms, self.ax, self.ay, self.az, self.an, self.labels):
            yield Sample(int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4]), int(row[5]))

    def subset(self, mask: np.ndarray) -> "LabeledStream":
        return LabeledStream(
            self.subject_id,
            self.trial_id,
            self.timestamps_ms[mask],
            self.ax[mask],
            self.ay[mask],
            self.az[mask],
            self.an[mask],
            self.labels[mask],
            self.sample_rate_hz,
            self.participant_ref,
        )


@dataclass(frozen=True)
class SubjectSplit:
    train_subjects: frozenset
    test_subject: int

    def __post_init__(self):
        object.__setattr__(self, "train_subjects", frozenset(self.train_subjects))
        if self.test_subject in self.train_subjects:
            raise HarError("test subject must not be part of the training subjects")


def subjects_of(dataset: Sequence[LabeledStream]) -> list[int]:
    return sorted({s.subject_id for s in dataset})


def split_by_subject(dataset: Sequence[LabeledStream]) -> list[SubjectSplit]:
    """One leave-one-subject-out split per distinct subject, ordered by id."""
    if not dataset:
        raise HarError("LOSO requires ≥2 subjects (dataset is empty)")
    subjects = subjects_of(dataset)
    if len(subjects) < 2:
        raise HarError("LOSO requires ≥2 subjects")
    everyone = frozenset(subjects)
    return [SubjectSplit(everyone - {s}, s) for s in subjects]


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_stream(stream: LabeledStream, allow_transitional: bool = False) -> ValidationResult:
    """Check timestamps, norm consistency and label range. Never raises."""
    result = ValidationResult()
    where = f"subject {stream.subject_id} trial {stream.trial_id}"
    ts = stream.timestamps_ms
    if len(ts) > 1 and np.any(np.diff(ts) <= 0):
        first = int(np.argmax(np.diff(ts) <= 0)) + 1
        result.violations.append(f"non-monotonic timestamps ({where}, sample {first})")
    if stream.sample_rate_hz <= 0:
        result.violations.append("sample_rate_hz must be positive")
    with np.errstate(invalid="ignore", over="ignore"):
        expected = np.sqrt(stream.ax**2 + stream.ay**2 + stream.az**2)
        bad = ~(np.abs(stream.an - expected) <= 1e-9 * np.maximum(1.0, np.abs(stream.an)))
    if np.any(bad):
        result.violations.append(f"norm mismatch ({where}, sample {int(np.argmax(bad))})")
    labels = stream.labels
    if np.any((labels < 1) | (labels > TRANSITIONAL)):
        result.violations.append(f"label out of range 1..11 ({where})")
    if not allow_transitional and np.any(labels == TRANSITIONAL):
        result.violations.append(f"transitional label after filtering ({where})")
    return result

