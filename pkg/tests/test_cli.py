"""
End-to-end tests of the command line on tiny toy configurations.
"""
import csv

import numpy as np
import pytest

from emodiff import cli as cli_module
from emodiff.audio.wav import write_wav
from emodiff.cli import main
from emodiff.errors import NonFiniteError
from emodiff.models.spectrogram import Waveform
from emodiff.storage import load_segments

TINY = [
    "--preset", "toy", "--jobs", "1",
    "--set", "toy.n_speakers=2",
    "--set", "toy.utterances_per_pair=3",
    "--set", "denoiser.res_filters=16",
    "--set", "denoiser.n_res_pre=1",
    "--set", "denoiser.n_res_post=1",
    "--set", "denoiser.cond_dim=8",
    "--set", "denoiser.time_dim=8",
    "--set", "denoiser.token_dim=4",
    "--set", "diffusion.steps=10",
    "--set", "diffusion.sample_steps=5",
    "--set", "train.batch=4",
    "--set", "classifier.filters=4",
    "--set", "classifier.kernels=3",
    "--set", "classifier.hidden=4",
    "--set", "classifier.epochs=1",
    "--set", "experiment.seeds=0",
    "--set", "experiment.conditions=real,real+syn",
    "--set", "audio.griffin_lim_iters=2",
]


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    assert main(TINY + ["gen-toy", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory, toy_dir):
    out = tmp_path_factory.mktemp("run")
    assert main(TINY + ["train-diffusion", "--data", str(toy_dir), "--out", str(out), "--steps", "2"]) == 0
    return out


def test_show_config_applies_overrides(capsys):
    assert main(["--preset", "toy", "--set", "classifier.epochs=3", "show-config"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "classifier.epochs=3" in lines
    assert "audio.n_mels=16" in lines


def test_unknown_key_exits_with_usage_error(capsys):
    assert main(["--preset", "toy", "--set", "foo.bar=1", "show-config"]) == 1
    assert "foo.bar" in capsys.readouterr().err


def test_unknown_command_exits_with_usage_error():
    assert main(["frobnicate"]) == 1


def test_gen_toy_writes_a_store(toy_dir, tmp_path):
    segments = load_segments(toy_dir)
    assert len(segments) == 4 * 2 * 3
    assert {m.speaker for m in segments} == {"spk0", "spk1"}
    assert main(TINY + ["gen-toy", str(tmp_path / "again")]) == 0
    for name in ("manifest.csv", "index.json", "stats.json"):
        assert (tmp_path / "again" / name).read_bytes() == (toy_dir / name).read_bytes()


def test_gen_toy_shifted_corpus(tmp_path):
    args = TINY + ["gen-toy", str(tmp_path / "target"), "--shift", "0.5", "--corpus-id", "tgt", "--speaker-prefix", "t"]
    assert main(args) == 0
    segments = load_segments(tmp_path / "target")
    assert segments[0].source_id.startswith("tgt_")
    assert segments[0].speaker.startswith("t")


def test_sample_count_zero(tmp_path):
    assert main(TINY + ["sample", "--model", str(tmp_path / "none"), "--out", str(tmp_path / "s"), "--count", "0"]) == 0
    assert load_segments(tmp_path / "s") == []


def test_sample_missing_checkpoint_names_path(tmp_path, capsys):
    code = main(TINY + ["sample", "--model", str(tmp_path / "none"), "--out", str(tmp_path / "s")])
    assert code == 2
    assert str(tmp_path / "none") in capsys.readouterr().err


def test_sample_rejects_bad_arguments(tmp_path):
    assert main(TINY + ["sample", "--model", "m", "--out", str(tmp_path / "s"), "--emotion", "bored"]) == 1
    assert main(TINY + ["sample", "--model", "m", "--out", str(tmp_path / "s"), "--count", "-1"]) == 1


def test_train_and_sample(model_dir, tmp_path):
    assert (model_dir / "checkpoint").is_dir()
    assert len((model_dir / "loss.csv").read_text().splitlines()) == 3
    out = tmp_path / "syn"
    args = ["sample", "--model", str(model_dir), "--out", str(out), "--emotion", "sad", "--count", "2", "--wav"]
    assert main(TINY + args) == 0
    segments = load_segments(out)
    assert [m.emotion for m in segments] == ["sad", "sad"]
    assert all(m.synthetic and m.values.shape == (16, 64) for m in segments)
    assert len(list((out / "pgm").glob("*.pgm"))) == 2
    assert len(list((out / "wav").glob("*.wav"))) == 2

    again = tmp_path / "syn2"
    assert main(TINY + args[:4] + [str(again)] + args[5:]) == 0
    for first, second in zip(segments, load_segments(again)):
        assert first.values.tobytes() == second.values.tobytes()


def test_eval_mad_of_identical_sets(toy_dir, tmp_path, capsys):
    out = tmp_path / "mad"
    assert main(TINY + ["eval-mad", "--real", str(toy_dir), "--syn", str(toy_dir), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "mad.csv").open()))
    assert rows[0] == ["emotion", "mad"]
    assert [r[0] for r in rows[1:]] == ["angry", "happy", "neutral", "sad", "total"]
    assert all(float(r[1]) == 0.0 for r in rows[1:])
    assert "Total" in capsys.readouterr().out


def test_train_ser(toy_dir, tmp_path):
    out = tmp_path / "ser"
    assert main(TINY + ["train-ser", "--data", str(toy_dir), "--out", str(out), "--mixup"]) == 0
    assert (out / "checkpoint" / "manifest.json").exists()
    assert (out / "history.csv").read_text().startswith("epoch,train_loss,dev_uar\n")


def test_augment_exp_row_count(toy_dir, model_dir, tmp_path):
    out = tmp_path / "augment"
    assert main(TINY + ["augment-exp", "--data", str(toy_dir), "--out", str(out), "--model", str(model_dir)]) == 0
    rows = list(csv.DictReader((out / "augment.csv").open()))
    # 2 speakers x 2 conditions x 1 seed
    assert len(rows) == 4
    assert {r["condition"] for r in rows} == {"real", "real+syn"}
    assert (out / "augment.json").exists()


def test_augment_exp_needs_synthetic_source(toy_dir, tmp_path, capsys):
    assert main(TINY + ["augment-exp", "--data", str(toy_dir), "--out", str(tmp_path / "a")]) == 2
    assert "--model" in capsys.readouterr().err


def test_cross_corpus_with_sweep(toy_dir, tmp_path):
    target = tmp_path / "target"
    assert main(TINY + ["gen-toy", str(target), "--shift", "0.5", "--seed", "3"]) == 0
    out = tmp_path / "cc"
    args = [
        "--set", "experiment.conditions=real",
        "--set", "experiment.sweep_conditions=real",
        "--set", "experiment.percentages=0,100",
        "cross-corpus", "--source", str(toy_dir), "--target", str(target), "--out", str(out),
    ]
    assert main(TINY + args) == 0
    assert len(list(csv.DictReader((out / "cross_corpus.csv").open()))) == 1
    sweep = list(csv.DictReader((out / "adaptation.csv").open()))
    assert [r["fold"] for r in sweep] == ["p0", "p100"]


def test_numerical_failure_exit_code(toy_dir, tmp_path, monkeypatch):
    def diverge(*args, **kwargs):
        raise NonFiniteError("non-finite diffusion loss", step=0)

    monkeypatch.setattr(cli_module, "train_diffusion", diverge)
    assert main(TINY + ["train-diffusion", "--data", str(toy_dir), "--out", str(tmp_path / "run")]) == 3


def test_missing_data_exit_code(tmp_path):
    assert main(TINY + ["train-diffusion", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "run")]) == 2


def test_featurize_reports_failures(tmp_path, capsys):
    seconds = np.arange(22050) / 22050
    write_wav(tmp_path / "wavs" / "tone.wav", Waveform(0.3 * np.sin(2 * np.pi * 330 * seconds)))
    (tmp_path / "wavs" / "bad.wav").write_bytes(b"not a wav")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("path,emotion,speaker,text\nwavs/tone.wav,happy,s1,hi\nwavs/bad.wav,sad,s2,\n")
    assert main(TINY + ["featurize", str(manifest), str(tmp_path / "out")]) == 0
    assert "failed: " in capsys.readouterr().out
    segments = load_segments(tmp_path / "out")
    assert len(segments) == 2
    assert all(m.values.shape == (16, 64) and m.emotion == "happy" for m in segments)
    assert main(TINY + ["featurize", str(tmp_path / "absent.csv"), str(tmp_path / "out2")]) == 2
