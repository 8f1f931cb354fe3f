import pytest

from harensemble.config import KEYS, RunConfig, load_config, parse_config, serialize_config, with_value
from harensemble.core import HarError
from harensemble.lda_knn import KnnConfig
from harensemble.synth import SynthConfig


def test_default_round_trip():
    config = RunConfig()
    assert parse_config(serialize_config(config)) == config


def test_every_key_is_serialized():
    lines = serialize_config(RunConfig()).splitlines()
    assert [line.split(" = ")[0] for line in lines] == list(KEYS)


def test_round_trip_with_changes():
    config = RunConfig(dataset_path="data/x.csv", n_workers=4, out_dir="out")
    config = with_value(config, "svm.gamma", 0.25)
    config = with_value(config, "svm.kernel", "rbf")
    config = with_value(config, "relieff.n_samples", 100)
    config = with_value(config, "knn.k", KnnConfig(3).k)
    config = with_value(config, "synth.seconds", {3: 12.0, 8: 1.5})
    config = with_value(config, "train.class_weighting", False)
    back = parse_config(serialize_config(config))
    assert back == config
    assert back.ensemble.svm.gamma == 0.25 and back.ensemble.relieff.n_samples == 100
    assert back.synth.seconds_per_activity == {3: 12.0, 8: 1.5}


def test_partial_file_overrides_defaults():
    config = parse_config("# comment\n\nrun.seed = 7\nsynth.activities = walk, sit\n")
    assert config.ensemble.seed == 7
    assert config.synth.activities == (3, 5)
    assert config.ensemble.window == RunConfig().ensemble.window


def test_passive_sections_are_ignored():
    config = parse_config("timing.wall_clock_s = 3.2\nmanifest.dataset_sha256 = abc\n")
    assert config == RunConfig()


@pytest.mark.parametrize(
    "text, match",
    [
        ("nonsense", "expected"),
        ("foo.bar = 1", "unknown key"),
        ("svm.c = abc", "bad value"),
        ("svm.c = -1", "bad value"),
        ("synth.activities = jumping", "unknown activity"),
        ("cnn.filters = 0", "bad value"),
    ],
)
def test_errors_name_the_line(text, match):
    with pytest.raises(HarError, match=match):
        parse_config("run.seed = 1\n" + text)


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("run.workers = 3\n", encoding="utf-8")
    assert load_config(path).n_workers == 3
    with pytest.raises(FileNotFoundError, match="missing.cfg"):
        load_config(tmp_path / "missing.cfg")


def test_synth_config_accepts_names():
    assert SynthConfig(activities=("walk", 4)).activities == (3, 4)
