"""Synthetic waist-accelerometer recordings with subject and trial variability.

Signal models are deliberately simple: gait is a sinusoid at a per-subject
base frequency, postures are gravity vectors with distinct orientations and
falls are short impulses whose sign pattern encodes the fall direction.
Walking and stair climbing share the gait frequency so they stay confusable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ACTIVITY_IDS, ACTIVITY_NAMES, CLASSIFIABLE, TRANSITIONAL, HarError, LabeledStream
from .ingestion import compute_norm

# default durations in seconds, roughly following the recording protocol
DEFAULT_SECONDS = {
    1: 20.0,
    2: 20.0,
    3: 30.0,
    4: 30.0,
    5: 30.0,
    6: 2.0,
    7: 2.0,
    8: 2.0,
    9: 2.0,
    10: 30.0,
}

# gravity direction per static posture, (x, y, z); z is vertical when upright
_UPRIGHT = np.array([0.0, 0.0, 1.0])
_SIT = np.array([0.45, 0.05, 0.89])
_LIE = np.array([0.97, 0.10, 0.22])
_FALL = {
    6: (np.array([0.0, 1.0]), np.array([0.15, 0.95, 0.25])),
    7: (np.array([0.0, -1.0]), np.array([0.15, -0.95, 0.25])),
    8: (np.array([1.0, 0.3]), np.array([-0.95, 0.1, 0.3])),
    9: (np.array([-1.0, 0.3]), np.array([0.9, 0.1, 0.4])),
}

EPOCH_START_MS = 1_600_000_000_000


@dataclass
class SynthConfig:
    n_subjects: int = 6
    n_trials: int = 6
    activities: tuple = CLASSIFIABLE
    seconds_per_activity: dict = field(default_factory=dict)
    sample_rate_hz: int = 64
    seed: int = 0
    noise_std: float = 0.03
    subject_variability: float = 1.0
    transition_seconds: float = 1.0

    def __post_init__(self):
        self.activities = tuple(
            ACTIVITY_IDS[a] if isinstance(a, str) else int(a) for a in self.activities
        )
        self.seconds_per_activity = {
            (ACTIVITY_IDS[k] if isinstance(k, str) else int(k)): float(v)
            for k, v in self.seconds_per_activity.items()
        }

    def duration(self, activity: int) -> float:
        return self.seconds_per_activity.get(activity, DEFAULT_SECONDS[activity])

    def validate(self) -> None:
        if self.n_subjects < 2:
            raise HarError("n_subjects must be ≥ 2 (LOSO needs ≥2 subjects)")
        if self.n_trials < 1:
            raise HarError("n_trials must be ≥ 1")
        if self.sample_rate_hz <= 0:
            raise HarError("sample_rate_hz must be positive")
        if not self.activities:
            raise HarError("at least one activity is required")
        for a in self.activities:
            if a not in CLASSIFIABLE:
                raise HarError(f"activity {a} is not one of the classifiable ids 1..10")
            if self.duration(a) <= 0:
                raise HarError(f"duration of {ACTIVITY_NAMES[a]} must be > 0")
        if not 0.0 <= self.subject_variability <= 1.0:
            raise HarError("subject_variability must lie in [0, 1]")
        if self.noise_std < 0 or self.transition_seconds < 0:
            raise HarError("noise_std and transition_seconds must be non-negative")


def benchmark_config(seed: int = 42) -> SynthConfig:
    """The standard desk-scale benchmark: 6 subjects, 3 trials, 6 activities."""
    return SynthConfig(
        n_subjects=6,
        n_trials=3,
        activities=("walk", "run", "up-stairs", "sit", "lie", "fall-front"),
        seconds_per_activity={"walk": 20, "run": 20, "up-stairs": 20, "sit": 20, "lie": 20, "fall-front": 2},
        seed=seed,
    )


@dataclass(frozen=True)
class _Subject:
    gait_hz: float
    gait_amp: float
    tilt: np.ndarray
    stair_slope: float


def _draw_subject(rng: np.random.Generator, variability: float) -> _Subject:
    f = rng.uniform(1.6, 2.4)
    amp = rng.uniform(0.85, 1.15)
    tilt = rng.normal(0.0, 0.04, size=3)
    slope = rng.uniform(0.8, 1.2)
    return _Subject(
        gait_hz=2.0 + variability * (f - 2.0),
        gait_amp=1.0 + variability * (amp - 1.0),
        tilt=variability * tilt,
        stair_slope=1.0 + variability * (slope - 1.0),
    )


def _gravity(direction: np.ndarray, tilt: np.ndarray) -> np.ndarray:
    g = direction + tilt
    return g / np.linalg.norm(g)


def _activity_signal(activity, n, rate, subj, jitter, rng) -> np.ndarray:
    """n x 3 acceleration in g for one activity bout."""
    t = np.arange(n) / rate
    phase = rng.uniform(0, 2 * np.pi)
    out = np.zeros((n, 3))
    if activity in (1, 2, 3, 4):
        f = subj.gait_hz * (2.0 if activity == 4 else 1.0)
        amp = jitter * subj.gait_amp * (2.0 if activity == 4 else 1.0)
        w = 2 * np.pi * f * t + phase
        out[:, 2] = 0.30 * amp * np.sin(w) + 0.06 * amp * np.sin(2 * w + 0.5)
        out[:, 0] = 0.12 * amp * np.sin(w + 1.1)
        out[:, 1] = 0.06 * amp * np.sin(0.5 * w)
        out += _gravity(_UPRIGHT, subj.tilt)
        if activity in (1, 2):
            # sawtooth ramp on z at the step rate; sign encodes up/down
            sign = 1.0 if activity == 1 else -1.0
            step = (f * t + phase / (2 * np.pi)) % 1.0
            out[:, 2] += sign * 0.35 * subj.stair_slope * jitter * (step - 0.5)
    elif activity in (5, 10):
        out += _gravity(_SIT if activity == 5 else _LIE, subj.tilt)
        out += 0.01 * np.sin(2 * np.pi * 0.25 * t + phase)[:, None]
    elif activity in _FALL:
        sign_xy, rest = _FALL[activity]
        head = min(n, int(round(0.75 * rate)))
        out[:head] = _gravity(_UPRIGHT, subj.tilt)
        out[head:] = _gravity(rest, subj.tilt)
        width = max(1, int(round(0.5 * rate)))
        start = max(0, min(n - width, n // 2 - width // 2))
        bump = np.sin(np.linspace(0, np.pi, width)) * 2.5 * jitter
        out[start : start + width, 0] += sign_xy[0] * bump
        out[start : start + width, 1] += sign_xy[1] * bump
        out[start : start + width, 2] -= 0.8 * bump
    else:
        raise HarError(f"no signal model for activity {activity}")
    return out


def _mean_orientation(activity, subj) -> np.ndarray:
    if activity == 5:
        return _gravity(_SIT, subj.tilt)
    if activity == 10:
        return _gravity(_LIE, subj.tilt)
    if activity in _FALL:
        return _gravity(_FALL[activity][1], subj.tilt)
    return _gravity(_UPRIGHT, subj.tilt)


def generate_dataset(config: SynthConfig) -> list[LabeledStream]:
    """Deterministic synthetic dataset, one stream per (subject, trial).

    Activities appear once per trial in a shuffled order, separated by
    transitional bouts (label 11) that blend the adjacent orientations.
    """
    config.validate()
    rate = config.sample_rate_hz
    root = np.random.SeedSequence(config.seed)
    subject_seqs = root.spawn(config.n_subjects)
    streams = []
    for s_idx, sseq in enumerate(subject_seqs):
        subject_id = s_idx + 1
        subject_rng, *trial_seqs = (np.random.default_rng(q) for q in sseq.spawn(config.n_trials + 1))
        subj = _draw_subject(subject_rng, config.subject_variability)
        for t_idx, rng in enumerate(trial_seqs):
            trial_id = t_idx + 1
            order = list(config.activities)
            rng.shuffle(order)
            chunks, labels = [], []
            n_trans = int(round(config.transition_seconds * rate))
            prev = None
            for act in order:
                if prev is not None and n_trans > 0:
                    a = _mean_orientation(prev, subj)
                    b = _mean_orientation(act, subj)
                    mix = np.linspace(0.0, 1.0, n_trans)[:, None]
                    chunks.append((1 - mix) * a + mix * b)
                    labels.append(np.full(n_trans, TRANSITIONAL))
                n = int(round(config.duration(act) * rate))
                jitter = rng.uniform(0.9, 1.1)
                chunks.append(_activity_signal(act, n, rate, subj, jitter, rng))
                labels.append(np.full(n, act))
                prev = act
            acc = np.concatenate(chunks)
            acc = acc + rng.normal(0.0, config.noise_std, size=acc.shape)
            n_total = len(acc)
            start = EPOCH_START_MS + subject_id * 86_400_000 + trial_id * 3_600_000
            ts = start + (np.arange(n_total, dtype=np.int64) * 1000) // rate
            streams.append(
                LabeledStream(
                    subject_id=subject_id,
                    trial_id=trial_id,
                    timestamps_ms=ts,
                    ax=acc[:, 0],
                    ay=acc[:, 1],
                    az=acc[:, 2],
                    an=compute_norm(acc[:, 0], acc[:, 1], acc[:, 2]),
                    labels=np.concatenate(labels),
                    sample_rate_hz=rate,
                    participant_ref=f"P{subject_id:02d}_synth",
                )
            )
    return streams


def subject_gait_frequencies(config: SynthConfig) -> list[float]:
    """Base gait frequency of each subject, as drawn by :func:`generate_dataset`."""
    root = np.random.SeedSequence(config.seed)
    freqs = []
    for sseq in root.spawn(config.n_subjects):
        rng = np.random.default_rng(sseq.spawn(config.n_trials + 1)[0])
        freqs.append(_draw_subject(rng, config.subject_variability).gait_hz)
    return freqs
