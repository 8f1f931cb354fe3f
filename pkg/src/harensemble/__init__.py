"""Three-pipeline ensemble for accelerometer activity recognition.

Feature engineering with ReliefF and an SVM, per-axis LDA with KNN, and a
small 1D CNN are fused by majority vote and scored with leave-one-subject-out
cross-validation.
"""

from .config import RunConfig, load_config, parse_config, serialize_config
from .core import ACTIVITY_IDS, ACTIVITY_NAMES, HarError, LabeledStream, SubjectSplit, split_by_subject
from .ingestion import load_dataset, parse_dataset, write_dataset
from .loso import EnsembleConfig, EvaluationReport, FoldResult, run_loso
from .segmentation import SegmentTensor, WindowSpec, segment_stream, segment_streams
from .synth import SynthConfig, benchmark_config, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "ACTIVITY_IDS",
    "ACTIVITY_NAMES",
    "EnsembleConfig",
    "EvaluationReport",
    "FoldResult",
    "HarError",
    "LabeledStream",
    "RunConfig",
    "SegmentTensor",
    "SubjectSplit",
    "SynthConfig",
    "WindowSpec",
    "benchmark_config",
    "generate_dataset",
    "load_config",
    "load_dataset",
    "parse_config",
    "parse_dataset",
    "run_loso",
    "segment_stream",
    "segment_streams",
    "serialize_config",
    "split_by_subject",
    "write_dataset",
]
