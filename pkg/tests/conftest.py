import numpy as np
import pytest

from harensemble.core import LabeledStream
from harensemble.ingestion import compute_norm

T0 = 1_600_000_000_000


def make_stream(labels, subject=1, trial=1, rate=64, seed=0, timestamps=None, an=None):
    """Small random stream with a consistent norm channel."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    rng = np.random.default_rng(seed)
    acc = rng.normal(0.0, 0.3, size=(n, 3)) + np.array([0.0, 0.0, 1.0])
    if timestamps is None:
        timestamps = T0 + (np.arange(n, dtype=np.int64) * 1000) // rate
    norm = compute_norm(acc[:, 0], acc[:, 1], acc[:, 2]) if an is None else an
    return LabeledStream(subject, trial, timestamps, acc[:, 0], acc[:, 1], acc[:, 2], norm, labels, rate)


@pytest.fixture
def stream_factory():
    return make_stream


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
