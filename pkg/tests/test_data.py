"""
Tests for toy corpora, CSV manifests, the spectrogram store and WAV
featurization.
"""
import itertools

import numpy as np
import pytest

from emodiff.audio.wav import write_wav
from emodiff.config import AudioConfig
from emodiff.data import ManifestEntry, ToyCorpusSpec, generate_toy_corpus, read_manifest, write_manifest
from emodiff.data.featurize import featurize
from emodiff.errors import ConfigError, ManifestError, MissingArtifactError
from emodiff.models.condition import EMOTIONS
from emodiff.models.spectrogram import MelSpectrogram, Waveform
from emodiff.storage import FileSpectrogramStore, load_segments, save_segments
from emodiff.utils.hashing import corpus_hash


def class_means(segments):
    return {e: np.mean([m.values for m in segments if m.emotion == e], axis=0) for e in EMOTIONS}


def test_toy_corpus_is_deterministic(toy_spec, toy_corpus):
    again = generate_toy_corpus(toy_spec, jobs=2)
    assert [m.source_id for m in again.segments] == [m.source_id for m in toy_corpus.segments]
    assert again.content_hash == toy_corpus.content_hash
    for a, b in zip(again.segments, toy_corpus.segments):
        assert a.values.tobytes() == b.values.tobytes()


def test_toy_corpus_layout(toy_spec, toy_segments):
    assert len(toy_segments) == 4 * toy_spec.n_speakers * toy_spec.utterances_per_pair
    assert all(m.values.shape == (16, 64) for m in toy_segments)
    assert all(-1.0 <= m.values.min() and m.values.max() <= 1.0 for m in toy_segments)
    first = toy_segments[0]
    assert first.source_id == "toy_angry_spk0_0000"
    assert first.text == "speaker spk0 says a angry sentence number 0"
    assert first.utterance_id == first.source_id


def test_shift_zero_twin_has_same_parameters(toy_spec):
    twin = ToyCorpusSpec(n_speakers=3, utterances_per_pair=6, seed=99, corpus_id="twin")
    assert twin.pattern_table() == toy_spec.pattern_table()
    shifted = ToyCorpusSpec(distribution_shift=0.5)
    assert shifted.pattern_table() != toy_spec.pattern_table()


def test_different_seeds_differ(toy_spec, toy_corpus):
    other = generate_toy_corpus(ToyCorpusSpec(n_speakers=3, utterances_per_pair=6, seed=8))
    assert other.content_hash != toy_corpus.content_hash


def test_toy_spec_validation():
    with pytest.raises(ConfigError):
        generate_toy_corpus(ToyCorpusSpec(n_speakers=0))
    with pytest.raises(ConfigError):
        ToyCorpusSpec(distribution_shift=1.5).validate()
    with pytest.raises(ConfigError):
        ToyCorpusSpec(n_emotions=3).validate()
    with pytest.raises(ConfigError):
        ToyCorpusSpec(n_mels=1).validate()


def test_nearest_class_mean_separates_held_out_data(toy_segments):
    means = class_means(toy_segments)
    held_out = generate_toy_corpus(ToyCorpusSpec(n_speakers=3, utterances_per_pair=4, seed=123)).segments
    correct = 0
    for m in held_out:
        guess = min(EMOTIONS, key=lambda e: np.linalg.norm(m.values - means[e]))
        correct += guess == m.emotion
    assert correct / len(held_out) > 0.9


def test_class_means_are_far_apart(toy_segments):
    means = class_means(toy_segments)
    inter = np.mean([np.linalg.norm(means[a] - means[b]) for a, b in itertools.combinations(EMOTIONS, 2)])
    intra = np.mean([np.linalg.norm(m.values - means[m.emotion]) for m in toy_segments])
    assert inter >= 2 * intra


def test_manifest_round_trip(tmp_path):
    entries = [
        ManifestEntry(str(tmp_path / "wavs" / "a.wav"), "happy", "s1", "hello there"),
        ManifestEntry("/abs/b.wav", "sad", "s2"),
    ]
    write_manifest(tmp_path / "manifest.csv", entries)
    lines = (tmp_path / "manifest.csv").read_text().splitlines()
    assert lines[0] == "path,emotion,speaker,text"
    assert lines[1] == "wavs/a.wav,happy,s1,hello there"
    loaded = read_manifest(tmp_path / "manifest.csv")
    assert loaded[0].path == str(tmp_path / "wavs" / "a.wav")
    assert loaded[0].text == "hello there"
    assert [e.emotion for e in loaded] == ["happy", "sad"]


def test_manifest_errors(tmp_path):
    with pytest.raises(MissingArtifactError):
        read_manifest(tmp_path / "absent.csv")
    (tmp_path / "cols.csv").write_text("path,emotion\nx.wav,sad\n")
    with pytest.raises(ManifestError, match="speaker"):
        read_manifest(tmp_path / "cols.csv")
    (tmp_path / "label.csv").write_text("path,emotion,speaker,text\nx.wav,bored,s1,\n")
    with pytest.raises(ManifestError, match=":2"):
        read_manifest(tmp_path / "label.csv")
    (tmp_path / "empty.csv").write_text("")
    assert read_manifest(tmp_path / "empty.csv") == []


def test_store_round_trip(tmp_path):
    items = [
        MelSpectrogram(np.zeros((3, 4)), "angry", "s1", "u1#0", text="a b", valid_frames=3,
                       metadata={"parent_id": "u1", "segment_index": 0}),
        MelSpectrogram(np.full((3, 4), 0.5), "sad", "s2", "syn/7", synthetic=True),
    ]
    save_segments(tmp_path / "store", items, {"log_min": -11.0, "log_max": 1.0})
    loaded = load_segments(tmp_path / "store")
    assert [m.source_id for m in loaded] == ["u1#0", "syn/7"]
    assert loaded[0].valid_frames == 3
    assert loaded[0].utterance_id == "u1"
    assert loaded[0].text == "a b"
    assert loaded[1].synthetic
    np.testing.assert_array_equal(loaded[1].values, items[1].values)
    assert corpus_hash(loaded) == corpus_hash(items)
    norm = FileSpectrogramStore.open(tmp_path / "store").normalization()
    assert (norm.log_min, norm.log_max) == (-11.0, 1.0)


def test_store_rejects_duplicates_and_missing_roots(tmp_path):
    store = FileSpectrogramStore.create(tmp_path / "dup")
    item = MelSpectrogram(np.zeros((2, 2)), "happy", "s", "same")
    assert store.store(item)[0]
    ok, message = store.store(item)
    assert not ok and "Duplicate" in message
    with pytest.raises(MissingArtifactError):
        load_segments(tmp_path / "nothing")
    assert FileSpectrogramStore.create(tmp_path / "bare").normalization() is None


@pytest.fixture
def wav_manifest(tmp_path):
    rng = np.random.default_rng(0)
    wav_dir = tmp_path / "wavs"
    seconds = np.arange(3 * 22050) / 22050
    write_wav(wav_dir / "long.wav", Waveform(0.3 * np.sin(2 * np.pi * 220 * seconds) + 0.01 * rng.standard_normal(seconds.size)))
    write_wav(wav_dir / "short.wav", Waveform(0.2 * np.sin(2 * np.pi * 440 * seconds[:5000])))
    (wav_dir / "broken.wav").write_bytes(b"RIFF....garbage")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "path,emotion,speaker,text\n"
        "wavs/long.wav,angry,s1,kids are talking\n"
        "wavs/broken.wav,sad,s1,\n"
        "wavs/short.wav,happy,s2,dogs\n"
    )
    return manifest


def test_featurize_segments_and_failures(tmp_path, wav_manifest):
    result = featurize(wav_manifest, tmp_path / "out", AudioConfig())
    assert result.n_files == 3
    assert result.n_failed == 1
    assert any("broken.wav" in path for path in result.failures)
    segments = load_segments(tmp_path / "out")
    assert all(m.values.shape == (80, 256) for m in segments)
    long_parts = [m for m in segments if m.emotion == "angry"]
    assert [m.valid_frames for m in long_parts] == [256, 3]
    assert result.n_segments == len(segments) == 3
    assert min(m.values.min() for m in segments) == -1.0
    assert max(m.values.max() for m in segments) == 1.0
    stats = FileSpectrogramStore.open(tmp_path / "out").read_stats()
    assert stats["n_segments"] == 3
    assert stats["log_min"] < stats["log_max"]


def test_featurize_is_byte_identical_on_rerun(tmp_path, wav_manifest):
    featurize(wav_manifest, tmp_path / "a", AudioConfig(), jobs=1)
    featurize(wav_manifest, tmp_path / "b", AudioConfig(), jobs=2)
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for relative in files_a:
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()


def test_featurize_empty_manifest(tmp_path):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("path,emotion,speaker,text\n")
    result = featurize(manifest, tmp_path / "out")
    assert result.n_segments == 0
    assert load_segments(tmp_path / "out") == []
