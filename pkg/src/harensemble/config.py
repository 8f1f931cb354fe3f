"""Line-oriented ``section.key = value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .core import ACTIVITY_IDS, ACTIVITY_NAMES, HarError
from .loso import EnsembleConfig
from .synth import SynthConfig, benchmark_config


@dataclass(frozen=True)
class RunConfig:
    dataset_path: Optional[str] = None  # None: generate from the synth section
    synth: SynthConfig = field(default_factory=benchmark_config)
    ensemble: EnsembleConfig = EnsembleConfig()
    n_workers: int = 1
    out_dir: str = "results"


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else conv(text)
    return parse


def _n_samples(text: str):
    return "all" if text.strip().lower() == "all" else int(text)


def _activities(text: str) -> tuple:
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        if n not in ACTIVITY_IDS:
            raise ValueError(f"unknown activity {n!r}")
    return tuple(ACTIVITY_IDS[n] for n in names)


def _seconds(text: str) -> dict:
    out = {}
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        name, _, sec = part.partition(":")
        if name.strip() not in ACTIVITY_IDS:
            raise ValueError(f"unknown activity {name.strip()!r}")
        out[ACTIVITY_IDS[name.strip()]] = float(sec)
    return out


def _fmt(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return ",".join(f"{ACTIVITY_NAMES[k]}:{v!r}" for k, v in sorted(value.items()))
    if isinstance(value, tuple):
        return ",".join(ACTIVITY_NAMES[a] for a in value)
    return str(value)


# key -> (attribute path on RunConfig, parser)
KEYS: dict[str, tuple[tuple[str, ...], Any]] = {
    "data.path": (("dataset_path",), _opt(str)),
    "synth.n_subjects": (("synth", "n_subjects"), int),
    "synth.n_trials": (("synth", "n_trials"), int),
    "synth.activities": (("synth", "activities"), _activities),
    "synth.seconds": (("synth", "seconds_per_activity"), _seconds),
    "synth.sample_rate_hz": (("synth", "sample_rate_hz"), int),
    "synth.seed": (("synth", "seed"), int),
    "synth.noise_std": (("synth", "noise_std"), float),
    "synth.subject_variability": (("synth", "subject_variability"), float),
    "synth.transition_seconds": (("synth", "transition_seconds"), float),
    "window.samples": (("ensemble", "window", "window_samples"), int),
    "window.overlap": (("ensemble", "window", "overlap_fraction"), float),
    "relieff.n_samples": (("ensemble", "relieff", "n_samples"), _n_samples),
    "relieff.k_neighbors": (("ensemble", "relieff", "k_neighbors"), int),
    "relieff.n_keep": (("ensemble", "n_keep"), int),
    "svm.kernel": (("ensemble", "svm", "kernel"), str),
    "svm.c": (("ensemble", "svm", "c"), float),
    "svm.gamma": (("ensemble", "svm", "gamma"), _opt(float)),
    "svm.tol": (("ensemble", "svm", "tol"), float),
    "svm.max_passes": (("ensemble", "svm", "max_passes"), int),
    "svm.max_sweeps": (("ensemble", "svm", "max_sweeps"), int),
    "svm.class_weighting": (("ensemble", "svm", "class_weighting"), _bool),
    "knn.k": (("ensemble", "knn", "k"), int),
    "lda.ridge_factor": (("ensemble", "lda_ridge"), float),
    "cnn.filters": (("ensemble", "cnn", "filters"), int),
    "cnn.filter_size": (("ensemble", "cnn", "filter_size"), int),
    "cnn.pool_size": (("ensemble", "cnn", "pool_size"), int),
    "cnn.fc1": (("ensemble", "cnn", "fc1"), int),
    "cnn.fc2": (("ensemble", "cnn", "fc2"), int),
    "train.learning_rate": (("ensemble", "train", "learning_rate"), float),
    "train.momentum": (("ensemble", "train", "momentum"), float),
    "train.epochs": (("ensemble", "train", "epochs"), int),
    "train.batch_size": (("ensemble", "train", "batch_size"), int),
    "train.class_weighting": (("ensemble", "train", "class_weighting"), _bool),
    "run.seed": (("ensemble", "seed"), int),
    "run.workers": (("n_workers",), int),
    "run.out": (("out_dir",), str),
}

# informational sections written into manifests and skipped on parse
PASSIVE_SECTIONS = ("timing", "manifest")


def _get(obj, path):
    for name in path:
        obj = getattr(obj, name)
    return obj


def _set(obj, path, value):
    if len(path) == 1:
        return replace(obj, **{path[0]: value})
    return replace(obj, **{path[0]: _set(getattr(obj, path[0]), path[1:], value)})


def with_value(config: RunConfig, key: str, value) -> RunConfig:
    try:
        path, _ = KEYS[key]
    except KeyError:
        raise HarError(f"unknown configuration key {key!r}") from None
    return _set(config, path, value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    config = base if base is not None else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise HarError(f"config line {lineno}: expected 'section.key = value'")
        if key.split(".", 1)[0] in PASSIVE_SECTIONS:
            continue
        if key not in KEYS:
            raise HarError(f"config line {lineno}: unknown key {key!r}")
        path, conv = KEYS[key]
        try:
            parsed = conv(value)
            config = _set(config, path, parsed)
        except (ValueError, HarError) as exc:
            raise HarError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def serialize_config(config: RunConfig) -> str:
    return "".join(f"{key} = {_fmt(_get(config, path))}\n" for key, (path, _) in KEYS.items())
