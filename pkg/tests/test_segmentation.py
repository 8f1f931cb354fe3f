import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harensemble.core import HarError
from harensemble.segmentation import (
    SegmentTensor,
    WindowSpec,
    count_segments,
    load_segments,
    save_segments,
    segment_stream,
    segment_streams,
)

from conftest import T0, make_stream


def oracle_starts(labels, timestamps, rate, t, stride):
    """Enumerate every candidate window and test purity/contiguity directly."""
    period = 1000.0 / rate
    keep = []
    start = 0
    while start + t <= len(labels):
        window = labels[start : start + t]
        ts = timestamps[start : start + t]
        pure = len(set(window.tolist())) == 1
        contiguous = all(ts[i + 1] - ts[i] <= 1.5 * period for i in range(t - 1))
        if pure and contiguous:
            keep.append(start)
        start += stride
    return keep


def test_stride_rounds_half_up():
    assert WindowSpec(64, 0.5).stride == 32
    assert WindowSpec(5, 0.5).stride == 3
    assert WindowSpec(64, 0.0).stride == 64
    with pytest.raises(HarError):
        WindowSpec(64, 1.0)


@pytest.mark.parametrize("n, t, stride, k", [(64, 64, 32, 1), (63, 64, 32, 0), (1920, 64, 32, 59), (128, 64, 32, 3)])
def test_count_segments(n, t, stride, k):
    assert count_segments(n, t, stride) == k


def test_uniform_stream_windows():
    seg = segment_stream(make_stream([3] * 128))
    assert seg.shape == (3, 64, 4)
    assert list(seg.provenance[:, 2]) == [0, 32, 64]


def test_impure_window_discarded():
    seg = segment_stream(make_stream([3] * 64 + [4] * 64))
    assert list(seg.provenance[:, 2]) == [0, 64]
    assert list(seg.labels) == [3, 4]


def test_window_contents_are_copied_in_channel_order():
    s = make_stream([5] * 96)
    seg = segment_stream(s)
    assert np.array_equal(seg.data[1], s.channels[32:96])
    assert np.array_equal(seg.channel(3)[0], s.an[:64])


def test_timestamp_gap_breaks_windows():
    ts = T0 + np.arange(128, dtype=np.int64) * 15
    ts[70:] += 1000
    seg = segment_stream(make_stream([3] * 128, timestamps=ts))
    assert list(seg.provenance[:, 2]) == [0]


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(0, 400),
    runs=st.lists(st.tuples(st.sampled_from([1, 3, 4]), st.integers(1, 150)), min_size=1, max_size=6),
    gaps=st.lists(st.integers(1, 399), max_size=3),
    t=st.sampled_from([8, 16, 64]),
    overlap=st.sampled_from([0.0, 0.25, 0.5, 0.75]),
)
def test_counts_match_exhaustive_enumeration(n, runs, gaps, t, overlap):
    labels = np.concatenate([np.full(r, lab) for lab, r in runs])[:n]
    n = len(labels)
    ts = T0 + (np.arange(n, dtype=np.int64) * 1000) // 64
    for g in gaps:
        if g < n:
            ts[g:] += 40
    spec = WindowSpec(t, overlap)
    seg = segment_stream(make_stream(labels, timestamps=ts), spec)
    assert list(seg.provenance[:, 2]) == oracle_starts(labels, ts, 64, t, spec.stride)
    # every kept window is pure
    for k in range(len(seg)):
        start = seg.provenance[k, 2]
        assert np.all(labels[start : start + t] == seg.labels[k])


def test_segment_streams_stacks_in_order():
    a = make_stream([3] * 64, subject=1)
    b = make_stream([4] * 96, subject=2)
    seg = segment_streams([a, b])
    assert list(seg.provenance[:, 0]) == [1, 2, 2]
    assert len(segment_streams([])) == 0


def test_tensor_is_read_only():
    seg = segment_stream(make_stream([3] * 64))
    with pytest.raises(ValueError):
        seg.data[0, 0, 0] = 1.0


def test_binary_round_trip(tmp_path):
    seg = segment_streams([make_stream([3] * 200 + [4] * 100, seed=4)])
    path = tmp_path / "seg.bin"
    save_segments(seg, path)
    raw = path.read_bytes()
    k, t, m = seg.shape
    assert len(raw) == 24 + k * t * m * 8 + k * 4
    assert int.from_bytes(raw[:8], "little") == k
    back = load_segments(path)
    assert np.array_equal(back.data, seg.data)
    assert np.array_equal(back.labels, seg.labels)


def test_truncated_binary_rejected(tmp_path):
    seg = segment_streams([make_stream([3] * 64)])
    path = tmp_path / "seg.bin"
    save_segments(seg, path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(HarError, match="expected"):
        load_segments(path)


def test_empty_tensor_round_trip(tmp_path):
    path = tmp_path / "empty.bin"
    save_segments(SegmentTensor.empty(64), path)
    assert load_segments(path).shape == (0, 64, 4)
