"""
Tests for run configuration: presets, config files, overrides and validation.
"""
import pytest

from emodiff.config import PRESETS, RunConfig, coerce, format_config, parse_assignments, read_config_file
from emodiff.errors import ConfigError


def test_full_preset_defaults():
    config = RunConfig.preset("full")
    assert config.audio.n_mels == 80
    assert config.audio.segment_frames == 256
    assert config.diffusion.steps == 4000
    assert config.denoiser.res_filters == 1536
    assert config.classifier.lr == 1e-5
    assert config.experiment.conditions == ("real", "syn", "real+syn", "real+syn+mixup")
    config.validate()


def test_toy_preset_is_consistent():
    config = RunConfig.preset("toy")
    config.validate()
    assert config.denoiser.in_channels == config.audio.n_mels == config.classifier.n_mels == 16
    assert config.classifier.filters == (32, 32, 32)
    assert set(PRESETS) == {"full", "toy"}
    with pytest.raises(ConfigError):
        RunConfig.preset("huge")


def test_resolution_order(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# toy run\ntrain.steps = 50\nexperiment.seeds=3,4  # two seeds\n\n")
    config = RunConfig.resolve("toy", path, ["train.steps=7"])
    assert config.train.steps == 7
    assert config.experiment.seeds == (3, 4)
    assert config.train.batch == 32


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match="denoiser.depth"):
        RunConfig.resolve("toy", overrides=["denoiser.depth=3"])
    with pytest.raises(ConfigError):
        RunConfig.resolve("toy", overrides=["nosection=3"])
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"audio": "1"})


def test_malformed_values():
    with pytest.raises(ConfigError, match="train.steps"):
        RunConfig.resolve("toy", overrides=["train.steps=many"])
    with pytest.raises(ConfigError, match="expected key=value"):
        parse_assignments(["train.steps"], source="--set")
    with pytest.raises(ConfigError):
        read_config_file("/nonexistent/run.cfg")


def test_coerce():
    assert coerce("3", int) == 3
    assert coerce(" 0.5 ", float) == 0.5
    assert coerce("yes", bool) is True
    assert coerce("off", bool) is False
    assert coerce("(1, 2)", tuple[int, ...]) == (1, 2)
    assert coerce([1.0, "2"], tuple[float, ...]) == (1.0, 2.0)
    assert coerce(5, int) == 5
    with pytest.raises(ConfigError):
        coerce("maybe", bool, "x")


def test_cross_section_validation():
    with pytest.raises(ConfigError, match="in_channels"):
        RunConfig.resolve("toy", overrides=["denoiser.in_channels=80"])
    with pytest.raises(ConfigError, match="sample_steps"):
        RunConfig.resolve("toy", overrides=["diffusion.sample_steps=500"])
    with pytest.raises(ConfigError):
        RunConfig.resolve("toy", overrides=["experiment.conditions=real,fake"])
    with pytest.raises(ConfigError):
        RunConfig.resolve("toy", overrides=["experiment.dev_fraction=1.0"])
    with pytest.raises(ConfigError):
        RunConfig.resolve("toy", overrides=["runtime.precision=f16"])
    with pytest.raises(ConfigError):
        RunConfig.resolve("toy", overrides=["classifier.kernels=5,3"])


def test_format_config_round_trips(tmp_path):
    config = RunConfig.resolve("toy", overrides=["experiment.percentages=0,50,100"])
    text = format_config(config)
    assert "experiment.percentages=0.0,50.0,100.0\n" in text
    (tmp_path / "snapshot.cfg").write_text(text)
    again = RunConfig.resolve("full", tmp_path / "snapshot.cfg")
    assert again == config
