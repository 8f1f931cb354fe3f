"""Leave-one-subject-out evaluation of the three pipelines and their fusion.

Folds are share-nothing tasks. Every random choice inside a fold is seeded
from (global seed, test subject), so results do not depend on the number
of workers or the order in which folds finish.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from typing import Sequence

import numpy as np

from . import cnn as cnn_mod
from .cnn import CnnArchitecture, TrainConfig, TrainedCnn
from .core import HarError, LabeledStream, SubjectSplit, split_by_subject
from .features import ZScoreStats, extract_features, zscore_apply, zscore_fit
from .fusion import compute_class_weights, fuse
from .ingestion import drop_transitional
from .lda_knn import RIDGE_FACTOR, KnnConfig, LdaKnnModel, fit_lda_knn
from .metrics import ClassificationReport, ConfusionMatrix, aggregate, confusion
from .relieff import FeatureRanking, ReliefFConfig, relieff_rank, select_top
from .segmentation import SegmentTensor, WindowSpec, segment_streams
from .svm import OneVsAllSvm, SvmConfig, predict as svm_predict, train_one_vs_all

log = logging.getLogger(__name__)

PIPELINES = ("pipeline1", "pipeline2", "pipeline3", "ensemble")


@dataclass(frozen=True)
class EnsembleConfig:
    window: WindowSpec = WindowSpec()
    relieff: ReliefFConfig = ReliefFConfig()
    n_keep: int = 40
    svm: SvmConfig = SvmConfig()
    knn: KnnConfig = KnnConfig()
    lda_ridge: float = RIDGE_FACTOR
    cnn: CnnArchitecture = CnnArchitecture()
    train: TrainConfig = TrainConfig()
    seed: int = 42


def fold_seeds(global_seed: int, test_subject: int) -> dict[str, int]:
    """Independent integer seeds for the stochastic stages of one fold."""
    children = np.random.SeedSequence([int(global_seed), int(test_subject)]).spawn(3)
    return {
        name: int(child.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
        for name, child in zip(("relieff", "svm", "cnn"), children)
    }


@dataclass(eq=False)
class FittedFold:
    zscore: ZScoreStats
    ranking: FeatureRanking
    columns: np.ndarray
    svm: OneVsAllSvm
    lda_knn: LdaKnnModel
    cnn: TrainedCnn
    class_weights: dict
    timings: dict = field(default_factory=dict)


@dataclass(eq=False)
class FoldResult:
    test_subject: int
    true_labels: np.ndarray
    pipeline1: np.ndarray
    pipeline2: np.ndarray
    pipeline3: np.ndarray
    fused: np.ndarray
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    svm_dual_feasible: bool = True
    svm_converged: bool = True

    def __post_init__(self):
        n = len(self.true_labels)
        if not all(len(getattr(self, p)) == n for p in ("pipeline1", "pipeline2", "pipeline3", "fused")):
            raise HarError("fold label lists must have equal length")

    def predictions(self, name: str) -> np.ndarray:
        return self.fused if name == "ensemble" else getattr(self, name)


def fit_fold(train: SegmentTensor, config: EnsembleConfig, seeds: dict[str, int]) -> FittedFold:
    """Fit all three pipelines on the training windows only."""
    timings = {}
    labels = train.labels
    class_weights = compute_class_weights(labels)

    t0 = time.perf_counter()
    feats = extract_features(train)
    stats = zscore_fit(feats)
    z = zscore_apply(stats, feats)
    ranking = relieff_rank(z, labels, replace(config.relieff, seed=seeds["relieff"]))
    columns = select_top(ranking, min(config.n_keep, z.shape[1]))
    svm_model = train_one_vs_all(z.select(columns), labels, replace(config.svm, seed=seeds["svm"]), class_weights)
    timings["fit_pipeline1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ldak = fit_lda_knn(train, config.knn, config.lda_ridge)
    timings["fit_pipeline2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    net = cnn_mod.train(train, None, config.cnn, replace(config.train, seed=seeds["cnn"]))
    timings["fit_pipeline3"] = time.perf_counter() - t0
    return FittedFold(stats, ranking, columns, svm_model, ldak, net, class_weights, timings)


def predict_fold(fitted: FittedFold, test: SegmentTensor) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = zscore_apply(fitted.zscore, extract_features(test))
    p1 = svm_predict(fitted.svm, z.select(fitted.columns))
    p2 = fitted.lda_knn.predict(test)
    p3 = cnn_mod.predict(fitted.cnn, test)
    return p1, p2, p3


def _side(dataset: Sequence[LabeledStream], subjects) -> list[LabeledStream]:
    return [s for s in dataset if s.subject_id in subjects]


def segment_fold(split: SubjectSplit, dataset: Sequence[LabeledStream], window: WindowSpec):
    """Split by subject first, then segment each side separately."""
    train = segment_streams(_side(dataset, split.train_subjects), window)
    test = segment_streams(_side(dataset, {split.test_subject}), window)
    return train, test


def run_fold(split: SubjectSplit, dataset: Sequence[LabeledStream], config: EnsembleConfig) -> FoldResult:
    t_start = time.perf_counter()
    train, test = segment_fold(split, dataset, config.window)
    timings = {"segment": time.perf_counter() - t_start}
    notes = []
    empty = np.zeros(0, dtype=np.int64)
    if len(test) == 0:
        notes.append(f"subject {split.test_subject} has no complete windows")
        timings["total"] = time.perf_counter() - t_start
        return FoldResult(split.test_subject, empty, empty, empty, empty, empty, timings, notes)
    if len(np.unique(train.labels)) < 2:
        raise HarError(f"fold {split.test_subject}: training side has fewer than 2 classes")
    missing = sorted(set(test.labels.tolist()) - set(train.labels.tolist()))
    if missing:
        notes.append(f"classes {missing} of subject {split.test_subject} are absent from training")
        log.warning(notes[-1])

    fitted = fit_fold(train, config, fold_seeds(config.seed, split.test_subject))
    timings.update(fitted.timings)
    t0 = time.perf_counter()
    p1, p2, p3 = predict_fold(fitted, test)
    fused = fuse(p1, p2, p3)
    timings["predict"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start
    return FoldResult(
        split.test_subject,
        test.labels.copy(),
        p1,
        p2,
        p3,
        fused,
        timings,
        notes,
        svm_dual_feasible=fitted.svm.dual_feasible(),
        svm_converged=all(m.converged for m in fitted.svm.models),
    )


@dataclass(eq=False)
class EvaluationReport:
    folds: list
    class_ids: tuple
    confusions: dict  # pipeline name -> ConfusionMatrix
    reports: dict  # pipeline name -> ClassificationReport
    wall_clock_s: float
    n_workers: int

    @property
    def sequential_equivalent_s(self) -> float:
        return float(sum(f.timings.get("total", 0.0) for f in self.folds))

    def pooled(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        true = np.concatenate([f.true_labels for f in self.folds])
        pred = np.concatenate([f.predictions(name) for f in self.folds])
        return true, pred

    def weighted_f1(self, name: str) -> float:
        return self.reports[name].weighted.f1


class FoldError(HarError):
    def __init__(self, subject: int, cause: BaseException):
        super().__init__(f"fold for test subject {subject} failed: {cause}")
        self.subject = subject


_WORKER_STATE: dict = {}


def _init_worker(dataset, config):
    _WORKER_STATE["dataset"] = dataset
    _WORKER_STATE["config"] = config


def _fold_task(split: SubjectSplit) -> FoldResult:
    return run_fold(split, _WORKER_STATE["dataset"], _WORKER_STATE["config"])


def score(folds: Sequence[FoldResult], class_ids: Sequence[int]):
    confusions, reports = {}, {}
    true = np.concatenate([f.true_labels for f in folds]) if folds else np.zeros(0, np.int64)
    for name in PIPELINES:
        pred = np.concatenate([f.predictions(name) for f in folds]) if folds else np.zeros(0, np.int64)
        cm = confusion(true, pred, class_ids)
        confusions[name] = cm
        reports[name] = aggregate(cm)
    return confusions, reports


def run_loso(dataset: Sequence[LabeledStream], config: EnsembleConfig = EnsembleConfig(), n_workers: int = 1) -> EvaluationReport:
    """Run every fold, pool the predictions in subject order and score once."""
    if n_workers < 1:
        raise HarError("n_workers must be ≥ 1")
    dataset = [s for s in (drop_transitional(s) for s in dataset) if len(s)]
    splits = split_by_subject(dataset)
    t0 = time.perf_counter()
    folds: list[FoldResult] = []
    if n_workers == 1:
        for split in splits:
            try:
                folds.append(run_fold(split, dataset, config))
            except Exception as exc:
                raise FoldError(split.test_subject, exc) from exc
    else:
        ctx = get_context("spawn")
        with ProcessPoolExecutor(n_workers, mp_context=ctx, initializer=_init_worker, initargs=(dataset, config)) as pool:
            futures = [(s, pool.submit(_fold_task, s)) for s in splits]
            for split, fut in futures:
                try:
                    folds.append(fut.result())
                except Exception as exc:
                    for _, other in futures:
                        other.cancel()
                    raise FoldError(split.test_subject, exc) from exc
    wall = time.perf_counter() - t0
    class_ids = sorted({int(c) for s in dataset for c in np.unique(s.labels)})
    confusions, reports = score(folds, class_ids)
    return EvaluationReport(folds, tuple(class_ids), confusions, reports, wall, n_workers)
