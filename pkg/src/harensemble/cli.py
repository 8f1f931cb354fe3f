"""Command-line entry point: ``synth``, ``run``, ``report`` and ``validate``.

Exit codes are 0 on success, 1 on an internal failure (including a failed
fold) and 2 on a usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig, load_config, serialize_config, with_value
from .core import ACTIVITY_NAMES, HarError, LabeledStream, validate_stream
from .ingestion import class_counts, parse_dataset, write_dataset
from .loso import PIPELINES, EvaluationReport, FoldError, run_loso
from .metrics import format_table, read_report, write_confusion, write_report
from .synth import generate_dataset

log = logging.getLogger("harensemble")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2

MANIFEST = "manifest.txt"


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 2."""


def report_path(out_dir: Path, name: str) -> Path:
    return out_dir / f"{name}_report.csv"


def confusion_path(out_dir: Path, name: str) -> Path:
    return out_dir / f"{name}_confusion.csv"


def dataset_digest(streams: Sequence[LabeledStream]) -> str:
    """SHA-256 over the parsed stream contents, independent of the file layout."""
    h = hashlib.sha256()
    for s in streams:
        h.update(np.array([s.subject_id, s.trial_id, len(s)], dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(s.timestamps_ms, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(s.channels, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(s.labels, dtype="<i8").tobytes())
    return h.hexdigest()


def _load_run_config(args) -> RunConfig:
    if args.config is None:
        return RunConfig()
    try:
        return load_config(args.config)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def _load_dataset(config: RunConfig) -> list[LabeledStream]:
    if config.dataset_path is None:
        config.synth.validate()
        return generate_dataset(config.synth)
    path = Path(config.dataset_path)
    if not path.is_file():
        raise InputError(f"dataset file not found: {path}")
    return parse_dataset(path)


def _print_counts(streams: Sequence[LabeledStream], out) -> None:
    counts = class_counts(streams)
    total = sum(counts.values())
    width = max(len(ACTIVITY_NAMES[c]) for c in counts) if counts else 5
    for c, n in counts.items():
        print(f"{ACTIVITY_NAMES[c]:<{width}} {n:8d} {100.0 * n / total:6.2f}%", file=out)
    print(f"{'total':<{width}} {total:8d}", file=out)


def cmd_synth(args, out=None) -> int:
    out = out or sys.stdout
    config = _load_run_config(args)
    synth = config.synth if args.seed is None else replace(config.synth, seed=args.seed)
    synth.validate()
    path = Path(args.out or "synthetic.csv")
    streams = generate_dataset(synth)
    try:
        write_dataset(streams, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None
    print(f"wrote {path} ({len(streams)} trials)", file=out)
    _print_counts(streams, out)
    return EXIT_OK


def _timing_lines(report: EvaluationReport) -> list[str]:
    seq = report.sequential_equivalent_s
    wall = report.wall_clock_s
    lines = [
        f"timing.n_workers = {report.n_workers}",
        f"timing.wall_clock_s = {wall:.3f}",
        f"timing.sequential_equivalent_s = {seq:.3f}",
        f"timing.speedup = {seq / wall if wall > 0 else float('nan'):.3f}",
    ]
    for f in report.folds:
        lines.append(f"timing.fold_{f.test_subject}_s = {f.timings.get('total', 0.0):.3f}")
    return lines


def write_outputs(report: EvaluationReport, config: RunConfig, digest: str, out_dir: Path) -> list[Path]:
    """Write the four reports, four confusion matrices and the manifest."""
    written = []
    for name in PIPELINES:
        write_report(report.reports[name], report_path(out_dir, name))
        write_confusion(report.confusions[name], confusion_path(out_dir, name))
        written += [report_path(out_dir, name), confusion_path(out_dir, name)]
    manifest = serialize_config(config)
    manifest += f"manifest.dataset_sha256 = {digest}\n"
    manifest += f"manifest.class_ids = {','.join(str(c) for c in report.class_ids)}\n"
    manifest += "\n".join(_timing_lines(report)) + "\n"
    (out_dir / MANIFEST).write_text(manifest, encoding="utf-8")
    written.append(out_dir / MANIFEST)
    return written


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    config = _load_run_config(args)
    if args.workers is not None:
        config = with_value(config, "run.workers", args.workers)
    if args.seed is not None:
        config = with_value(config, "run.seed", args.seed)
    if args.out is not None:
        config = with_value(config, "run.out", args.out)
    if config.n_workers < 1:
        raise InputError("--workers must be ≥ 1")
    out_dir = _ensure_dir(Path(config.out_dir))
    streams = _load_dataset(config)
    digest = dataset_digest(streams)
    report = run_loso(streams, config.ensemble, config.n_workers)
    write_outputs(report, config, digest, out_dir)

    for name in PIPELINES:
        print(f"== {name}", file=out)
        print(format_table(report.reports[name]), file=out)
    seq, wall = report.sequential_equivalent_s, report.wall_clock_s
    print(
        f"timing: {len(report.folds)} folds, workers={report.n_workers}, "
        f"sequential-equivalent {seq:.1f}s, wall-clock {wall:.1f}s, speedup {seq / wall:.2f}x",
        file=out,
    )
    print(f"results written to {out_dir}", file=out)
    return EXIT_OK


def cmd_report(args, out=None) -> int:
    out = out or sys.stdout
    results = Path(args.results)
    missing = [n for n in PIPELINES if not report_path(results, n).is_file()]
    if missing:
        raise InputError(f"missing: {', '.join(missing)} (in {results})")
    rows = {n: read_report(report_path(results, n))["weighted avg"] for n in PIPELINES}
    print(f"{'pipeline':<10} {'precision':>9} {'recall':>9} {'f1-score':>9} {'support':>8}", file=out)
    for n, r in rows.items():
        print(f"{n:<10} {r['precision']:9.4f} {r['recall']:9.4f} {r['f1-score']:9.4f} {int(r['support']):8d}", file=out)
    best = max(PIPELINES[:3], key=lambda n: rows[n]["f1-score"])
    delta = rows["ensemble"]["f1-score"] - rows[best]["f1-score"]
    print(f"ensemble vs best individual ({best}): {delta:+.4f}", file=out)
    return EXIT_OK


def cmd_validate(args, out=None) -> int:
    out = out or sys.stdout
    path = args.dataset
    if path is None:
        config = _load_run_config(args)
        if config.dataset_path is None:
            raise InputError("validate needs a dataset path (argument or data.path in --config)")
        path = config.dataset_path
    path = Path(path)
    if not path.is_file():
        raise InputError(f"dataset file not found: {path}")
    streams = parse_dataset(path)
    problems = [v for s in streams for v in validate_stream(s, allow_transitional=True).violations]
    subjects = sorted({s.subject_id for s in streams})
    if len(subjects) < 2:
        problems.append(f"only {len(subjects)} subject(s); LOSO needs ≥2")
    print(f"{path}: {len(streams)} trials, {len(subjects)} subjects, {sum(len(s) for s in streams)} samples", file=out)
    _print_counts(streams, out)
    for p in problems:
        print(f"problem: {p}", file=out)
    return EXIT_INPUT if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harensemble", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--config", help="config file (synth.* keys are used)")
    p.add_argument("--seed", type=int, help="override synth.seed")
    p.add_argument("--out", help="output CSV path (default synthetic.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="leave-one-subject-out evaluation of all pipelines")
    p.add_argument("--config", help="config file; defaults to the synthetic benchmark")
    p.add_argument("--workers", type=int, help="override run.workers")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="override run.out (results directory)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a results directory")
    p.add_argument("results", nargs="?", default="results", help="results directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="lint a dataset CSV")
    p.add_argument("dataset", nargs="?", help="dataset CSV (default: data.path from --config)")
    p.add_argument("--config", help="config file")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InputError, HarError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
