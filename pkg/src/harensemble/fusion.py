"""Decision fusion across the three pipelines, and class weights."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .core import HarError


def majority_vote(l1, l2, l3):
    """Plurality of three labels; with three different labels the third
    (CNN) pipeline decides."""
    if l1 == l2 or l1 == l3:
        return l1
    if l2 == l3:
        return l2
    return l3


def fuse(p1, p2, p3) -> np.ndarray:
    """Element-wise :func:`majority_vote` over three prediction vectors."""
    p1, p2, p3 = (np.asarray(p, dtype=np.int64).reshape(-1) for p in (p1, p2, p3))
    if not (len(p1) == len(p2) == len(p3)):
        raise HarError("prediction vectors must have equal length")
    return np.where((p1 == p2) | (p1 == p3), p1, np.where(p2 == p3, p2, p3))


def compute_class_weights(train_labels) -> dict[int, float]:
    """Balanced weights ``N / (l_present * N_c)`` for the classes present."""
    labels = np.asarray(train_labels).reshape(-1)
    if labels.size == 0:
        raise HarError("cannot compute class weights from an empty label list")
    counts = Counter(int(v) for v in labels)
    total, present = labels.size, len(counts)
    return {c: total / (present * n) for c, n in sorted(counts.items())}
