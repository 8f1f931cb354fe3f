"""Confusion matrices and per-class / averaged precision, recall and F1."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ACTIVITY_NAMES, HarError


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[i, j]``: segments of actual class ``class_ids[i]`` predicted as ``class_ids[j]``."""

    counts: np.ndarray
    class_ids: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0


def confusion(true_labels, predicted_labels, class_ids: Sequence[int]) -> ConfusionMatrix:
    true = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    pred = np.asarray(predicted_labels, dtype=np.int64).reshape(-1)
    if len(true) != len(pred):
        raise HarError(f"{len(true)} true labels but {len(pred)} predictions")
    ids = tuple(int(c) for c in class_ids)
    pos = {c: i for i, c in enumerate(ids)}
    unknown = set(np.unique(true).tolist()) | set(np.unique(pred).tolist())
    unknown -= set(ids)
    if unknown:
        raise HarError(f"labels {sorted(unknown)} are not in class_ids {list(ids)}")
    counts = np.zeros((len(ids), len(ids)), dtype=np.int64)
    if len(true):
        ti = np.array([pos[v] for v in true.tolist()])
        pi = np.array([pos[v] for v in pred.tolist()])
        np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(counts, ids)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)


def per_class_metrics(cm: ConfusionMatrix) -> dict[int, ClassScores]:
    """Precision/recall/F1 per class; undefined ratios are reported as 0."""
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)
    out = {}
    for i, c in enumerate(cm.class_ids):
        p = tp[i] / predicted[i] if predicted[i] else 0.0
        r = tp[i] / support[i] if support[i] else 0.0
        out[c] = ClassScores(float(p), float(r), f1_score(p, r), int(support[i]))
    return out


@dataclass(frozen=True)
class Averages:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict
    macro: Averages  # f1 = mean of per-class F1
    macro_f1_harmonic: float  # harmonic mean of macro precision and recall
    micro: Averages
    weighted: Averages

    @property
    def accuracy(self) -> float:
        return self.micro.recall


def macro_averages(scores: dict[int, ClassScores]) -> tuple[Averages, float]:
    """Unweighted means over the given classes, plus F1 of the mean P and R.

    The two macro F1 figures differ in general; both are reported.
    """
    if not scores:
        raise HarError("macro average over zero classes")
    vals = list(scores.values())
    p = float(np.mean([s.precision for s in vals]))
    r = float(np.mean([s.recall for s in vals]))
    f = float(np.mean([s.f1 for s in vals]))
    support = int(sum(s.support for s in vals))
    return Averages(p, r, f, support), f1_score(p, r)


def aggregate(cm: ConfusionMatrix) -> ClassificationReport:
    """Macro, micro and support-weighted averages.

    Macro means run over classes that occur in the truth or the predictions.
    Macro F1 is reported as the mean of per-class F1 and, separately, as the
    harmonic mean of macro precision and macro recall.
    """
    total = cm.total
    if total == 0:
        raise HarError("cannot aggregate metrics over zero scored segments")
    scores = per_class_metrics(cm)
    predicted = cm.counts.sum(axis=0)
    active = [c for i, c in enumerate(cm.class_ids) if scores[c].support or predicted[i]]
    kept = {c: scores[c] for c in active}
    macro, harmonic = macro_averages(kept)
    p = np.array([s.precision for s in kept.values()])
    r = np.array([s.recall for s in kept.values()])
    f = np.array([s.f1 for s in kept.values()])
    sup = np.array([s.support for s in kept.values()], dtype=np.float64)

    tp = float(np.trace(cm.counts))
    fp = float(cm.counts.sum() - tp)  # every miss is one FP and one FN
    micro_p = tp / (tp + fp)
    micro = Averages(micro_p, micro_p, f1_score(micro_p, micro_p), total)

    wts = sup / sup.sum()
    weighted = Averages(float(wts @ p), float(wts @ r), float(wts @ f), total)
    return ClassificationReport(kept, macro, harmonic, micro, weighted)


def _name(c: int) -> str:
    return ACTIVITY_NAMES.get(int(c), str(c))


def report_rows(report: ClassificationReport) -> list[list[str]]:
    rows = [["class", "precision", "recall", "f1-score", "support", "f1-harmonic"]]
    for c, s in report.per_class.items():
        rows.append([_name(c), f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}", str(s.support), ""])
    m, w = report.macro, report.weighted
    rows.append(["macro avg", f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}", str(m.support),
                 f"{report.macro_f1_harmonic:.6f}"])
    rows.append(["weighted avg", f"{w.precision:.6f}", f"{w.recall:.6f}", f"{w.f1:.6f}", str(w.support), ""])
    return rows


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def report_csv(report: ClassificationReport) -> str:
    """Table layout of the classification report as CSV text.

    The ``f1-harmonic`` column is only filled on the macro row.
    """
    return _csv_text(report_rows(report))


def confusion_csv(cm: ConfusionMatrix) -> str:
    names = [_name(c) for c in cm.class_ids]
    rows = [["actual\\predicted"] + names]
    rows += [[n] + [str(v) for v in row] for n, row in zip(names, cm.counts.tolist())]
    return _csv_text(rows)


def write_report(report: ClassificationReport, path) -> None:
    Path(path).write_text(report_csv(report), encoding="utf-8")


def write_confusion(cm: ConfusionMatrix, path) -> None:
    Path(path).write_text(confusion_csv(cm), encoding="utf-8")


def read_report(path) -> dict[str, dict[str, float]]:
    """Parse a report CSV back into ``{row_name: {column: value}}``."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        out = {}
        for row in reader:
            name = row.pop("class")
            out[name] = {k: float(v) for k, v in row.items() if v not in ("", None)}
    return out


def format_table(report: ClassificationReport) -> str:
    lines = [f"{'':>14} {'precision':>9} {'recall':>9} {'f1-score':>9} {'support':>8}"]
    for c, s in report.per_class.items():
        lines.append(f"{_name(c):>14} {s.precision:9.2f} {s.recall:9.2f} {s.f1:9.2f} {s.support:8d}")
    for label, a in (("macro avg", report.macro), ("weighted avg", report.weighted)):
        lines.append(f"{label:>14} {a.precision:9.2f} {a.recall:9.2f} {a.f1:9.2f} {a.support:8d}")
    lines.append(f"{'accuracy':>14} {report.accuracy:9.2f}   (macro F1 from macro P/R: {report.macro_f1_harmonic:.2f})")
    return "\n".join(lines)
