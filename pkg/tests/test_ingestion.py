import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harensemble.core import HarError
from harensemble.ingestion import (
    HEADER,
    compute_norm,
    drop_transitional,
    format_timestamp,
    load_dataset,
    parse_dataset,
    parse_timestamp,
    write_dataset,
)

from conftest import make_stream


def _write(path, rows):
    lines = [",".join(HEADER)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _row(i, subject, trial, ms, ax=0.0, ay=0.0, az=1.0, an=1.0, activity="walk"):
    return [i, subject, f"P{subject}", trial, format_timestamp(ms), ax, ay, az, an, activity]


@pytest.mark.parametrize(
    "axes, expected",
    [((0, 0, 0), 0.0), ((3, 4, 0), 5.0), ((1, 1, 1), math.sqrt(3))],
)
def test_compute_norm_examples(axes, expected):
    assert compute_norm(*axes) == pytest.approx(expected, abs=1e-12)


def test_compute_norm_rejects_nan():
    with pytest.raises(HarError):
        compute_norm(float("nan"), 0.0, 0.0)


@given(st.integers(min_value=0, max_value=4_000_000_000_000))
def test_timestamp_round_trip(ms):
    assert parse_timestamp(format_timestamp(ms)) == ms


def test_groups_participants_and_trials(tmp_path):
    rows, i = [], 0
    for subject in (1, 2):
        for trial in (1, 2):
            for k in range(5):
                rows.append(_row(i, subject, trial, 1_000_000 + k * 16))
                i += 1
    streams = parse_dataset(_write(tmp_path / "d.csv", rows))
    assert [s.key for s in streams] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert all(len(s) == 5 for s in streams)


def test_norm_recomputed_from_axes(tmp_path):
    path = _write(tmp_path / "d.csv", [_row(0, 1, 1, 0, ax=3.0, ay=4.0, az=0.0, an=99.0)])
    assert parse_dataset(path)[0].an[0] == 5.0


def test_unknown_activity_is_reported_with_line(tmp_path):
    path = _write(tmp_path / "d.csv", [_row(0, 1, 1, 0), _row(1, 1, 1, 16, activity="jumping")])
    with pytest.raises(HarError, match=r"d.csv:3: unknown activity 'jumping'"):
        parse_dataset(path)


def test_malformed_value_names_the_line(tmp_path):
    path = _write(tmp_path / "d.csv", [_row(0, 1, 1, 0, ax="abc")])
    with pytest.raises(HarError, match=r":2: malformed row"):
        parse_dataset(path)


def test_duplicate_timestamp_rejected(tmp_path):
    path = _write(tmp_path / "d.csv", [_row(0, 1, 1, 0), _row(1, 1, 1, 0)])
    with pytest.raises(HarError, match="non-monotonic"):
        parse_dataset(path)


def test_rows_are_sorted_by_timestamp(tmp_path):
    path = _write(tmp_path / "d.csv", [_row(0, 1, 1, 32, ax=2.0), _row(1, 1, 1, 0, ax=1.0)])
    s = parse_dataset(path)[0]
    assert list(s.ax) == [1.0, 2.0]


def test_bad_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,c\n", encoding="utf-8")
    with pytest.raises(HarError, match="bad header"):
        parse_dataset(path)


def test_drop_transitional_examples():
    s = make_stream([3, 3, 11, 11, 4, 4])
    assert list(drop_transitional(s).labels) == [3, 3, 4, 4]
    clean = make_stream([3, 3, 4])
    assert drop_transitional(clean) == clean
    assert len(drop_transitional(make_stream([11, 11]))) == 0


def test_write_parse_round_trip(tmp_path):
    streams = [make_stream([3] * 40 + [11] * 5 + [5] * 20, subject=s, trial=t, seed=10 * s + t) for s in (1, 2) for t in (1, 2)]
    path = tmp_path / "rt.csv"
    write_dataset(streams, path)
    back = parse_dataset(path)
    assert back == streams
    filtered = load_dataset(path)
    assert all(11 not in s.labels for s in filtered)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.sampled_from([1, 3, 4, 5, 11]), min_size=1, max_size=50),
    st.integers(min_value=0, max_value=2**31),
)
def test_round_trip_property(tmp_path_factory, labels, seed):
    stream = make_stream(labels, seed=seed)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_dataset([stream], path)
    (back,) = parse_dataset(path)
    assert np.array_equal(back.ax, stream.ax)
    assert np.array_equal(back.labels, stream.labels)
    assert np.array_equal(back.timestamps_ms, stream.timestamps_ms)
