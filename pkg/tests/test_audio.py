"""
Tests for the audio front end: FFT, STFT, mel features, segmentation,
phase reconstruction and the file formats.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.io import wavfile

from emodiff.audio.fft import fft, ifft, irfft, rfft
from emodiff.audio.griffin_lim import griffin_lim, reconstruct_phase
from emodiff.audio.images import encode_pgm, spectrogram_pixels, write_spectrogram_pgm
from emodiff.audio.mel import (
    FLOOR_VALUE,
    MelFilterbank,
    join_segments,
    log_mel_energies,
    mel_spectrogram,
    normalization_from_energies,
    segment,
)
from emodiff.audio.stft import istft, stft
from emodiff.audio.wav import read_wav, write_wav
from emodiff.errors import MissingArtifactError, WavFormatError
from emodiff.models.spectrogram import LOG_FLOOR, MelSpectrogram, NormalizationSpec, Waveform

SAMPLE_RATE = 22050


def tone(frequency, n_samples, rate=SAMPLE_RATE, amplitude=0.5):
    return amplitude * np.sin(2 * np.pi * frequency * np.arange(n_samples) / rate)


def test_fft_delta_is_flat():
    np.testing.assert_allclose(fft([1, 0, 0, 0]), [1, 1, 1, 1])


def test_fft_single_tone():
    n, k = 16, 3
    magnitude = np.abs(fft(np.cos(2 * np.pi * k * np.arange(n) / n)))
    assert magnitude[3] == pytest.approx(8.0)
    assert magnitude[13] == pytest.approx(8.0)
    others = np.delete(magnitude, [3, 13])
    assert np.all(others < 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=9), st.integers(min_value=0, max_value=2**31 - 1))
def test_fft_matches_dft_oracle(power, seed):
    rng = np.random.default_rng(seed)
    n = 2 ** power
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) @ x
    np.testing.assert_allclose(fft(x), dft, atol=1e-8 * n)
    np.testing.assert_allclose(ifft(fft(x)), x, atol=1e-10)


def test_rfft_inverse(rng):
    x = rng.standard_normal(32)
    half = rfft(x)
    assert half.shape == (17,)
    np.testing.assert_allclose(irfft(half, 32), x, atol=1e-12)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        fft(np.ones(12))


def test_stft_frame_count_and_bins():
    grid = stft(np.zeros(SAMPLE_RATE))
    assert grid.shape == (513, 87)
    assert np.all(grid == 0)


def test_stft_rejects_empty():
    with pytest.raises(ValueError):
        stft(np.zeros(0))


def test_stft_tone_peak_bin():
    grid = np.abs(stft(tone(1000.0, SAMPLE_RATE)))
    peaks = grid[:, 2:-2].argmax(axis=0)
    assert np.all(peaks == round(1000 * 1024 / SAMPLE_RATE))


def test_istft_inverts_stft(rng):
    x = rng.standard_normal(4000)
    np.testing.assert_allclose(istft(stft(x), length=x.size), x, atol=1e-9)


def test_filterbank_shape_and_rows():
    fb = MelFilterbank()
    assert fb.weights.shape == (80, 513)
    assert np.all(fb.weights >= 0)
    np.testing.assert_allclose(fb.weights.max(axis=1), 1.0)
    assert fb.pseudo_inverse.shape == (513, 80)


def test_filterbank_rejects_bad_range():
    with pytest.raises(ValueError):
        MelFilterbank(f_min=9000.0, f_max=8000.0)
    with pytest.raises(ValueError):
        MelFilterbank(f_max=20000.0)


def test_mel_spectrogram_silence_is_floor():
    fb = MelFilterbank()
    norm = NormalizationSpec(log_min=np.log(LOG_FLOOR), log_max=0.0)
    m = mel_spectrogram(np.zeros(4096), fb, norm)
    assert m.values.shape == (80, 17)
    np.testing.assert_allclose(m.values, -1.0)


def test_mel_spectrogram_values_are_clamped():
    fb = MelFilterbank()
    energies = log_mel_energies(tone(440.0, 8192), fb)
    low, high = float(energies.min()), float(energies.max())
    # A range narrower than the data forces clamping at both ends.
    norm = NormalizationSpec(log_min=low + 0.25 * (high - low), log_max=low + 0.75 * (high - low))
    values = mel_spectrogram(tone(440.0, 8192), fb, norm).values
    assert values.min() >= -1.0
    assert values.max() <= 1.0
    assert (values == -1.0).any() and (values == 1.0).any()


def test_normalization_from_energies_spans_corpus():
    norm = normalization_from_energies([np.array([[-3.0, 0.0]]), np.array([[1.5]])])
    assert (norm.log_min, norm.log_max) == (-3.0, 1.5)
    with pytest.raises(ValueError):
        normalization_from_energies([])


def test_degenerate_normalization_rejected():
    with pytest.raises(ValueError):
        NormalizationSpec(log_min=1.0, log_max=1.0)


def make_mel(frames, n_mels=80):
    values = np.linspace(-0.9, 0.9, n_mels * frames).reshape(n_mels, frames)
    return MelSpectrogram(values=values, emotion="happy", speaker="s1", source_id="utt")


def test_segment_exact_length():
    m = make_mel(256)
    (only,) = segment(m)
    np.testing.assert_array_equal(only.values, m.values)
    assert only.valid_frames == 256


def test_segment_pads_tail():
    m = make_mel(600)
    parts = segment(m)
    assert len(parts) == 3
    assert [p.valid_frames for p in parts] == [256, 256, 88]
    assert np.all(parts[2].values[:, 88:] == FLOOR_VALUE)
    assert parts[2].values[:, 88:].shape[1] == 168
    assert parts[1].source_id == "utt#1"
    assert parts[1].utterance_id == "utt"
    assert all(p.emotion == "happy" and p.speaker == "s1" for p in parts)
    np.testing.assert_array_equal(join_segments(parts), m.values)


def test_segment_short_input():
    (only,) = segment(make_mel(10))
    assert only.values.shape == (80, 256)
    assert only.valid_frames == 10


def test_phase_reconstruction_of_tone():
    magnitude = np.abs(stft(tone(500.0, 8192)))
    signal, residual = reconstruct_phase(magnitude, iterations=60, seed=3)
    assert signal.size == 8192
    assert residual < 1e-2


def test_griffin_lim_of_silence_is_silent():
    fb = MelFilterbank(n_mels=16)
    norm = NormalizationSpec(log_min=np.log(LOG_FLOOR), log_max=0.0)
    silence = MelSpectrogram(values=-np.ones((16, 20)), emotion="sad", speaker="s", source_id="x")
    waveform = griffin_lim(silence, fb, norm, iterations=2)
    assert not np.any(waveform.samples)


def test_griffin_lim_rejects_zero_iterations():
    fb = MelFilterbank(n_mels=16)
    norm = NormalizationSpec(log_min=-11.5, log_max=0.0)
    m = MelSpectrogram(values=np.zeros((16, 8)), emotion="sad", speaker="s", source_id="x")
    with pytest.raises(ValueError):
        griffin_lim(m, fb, norm, iterations=0)


def test_griffin_lim_peak_normalized():
    fb = MelFilterbank(n_mels=16)
    norm = NormalizationSpec(log_min=-11.5, log_max=0.0)
    m = MelSpectrogram(values=np.zeros((16, 8)), emotion="sad", speaker="s", source_id="x")
    waveform = griffin_lim(m, fb, norm, iterations=5)
    assert np.max(np.abs(waveform.samples)) == pytest.approx(0.95)


def test_wav_round_trip(tmp_path):
    original = Waveform(tone(300.0, 2000), sample_rate=16000)
    write_wav(tmp_path / "a.wav", original)
    loaded = read_wav(tmp_path / "a.wav", expected_rate=16000)
    assert loaded.sample_rate == 16000
    np.testing.assert_allclose(loaded.samples, original.samples, atol=2 / 32768)


def test_wav_rejects_other_encodings(tmp_path):
    wavfile.write(str(tmp_path / "stereo.wav"), 16000, np.zeros((10, 2), dtype=np.int16))
    wavfile.write(str(tmp_path / "float.wav"), 16000, np.zeros(10, dtype=np.float32))
    (tmp_path / "junk.wav").write_bytes(b"not a riff file")
    for name in ("stereo.wav", "float.wav", "junk.wav"):
        with pytest.raises(WavFormatError):
            read_wav(tmp_path / name)
    write_wav(tmp_path / "b.wav", Waveform(np.zeros(10), sample_rate=8000))
    with pytest.raises(WavFormatError):
        read_wav(tmp_path / "b.wav", expected_rate=16000)
    with pytest.raises(MissingArtifactError):
        read_wav(tmp_path / "absent.wav")


def test_spectrogram_pgm_layout(tmp_path):
    values = np.full((3, 2), -1.0)
    values[0, :] = 1.0
    pixels = spectrogram_pixels(values)
    assert pixels[-1].tolist() == [255, 255]
    assert pixels[0].tolist() == [0, 0]
    write_spectrogram_pgm(tmp_path / "m.pgm", values)
    blob = (tmp_path / "m.pgm").read_bytes()
    assert blob.startswith(b"P5\n2 3\n255\n")
    assert blob == encode_pgm(pixels)
