"""Short-time Fourier analysis and overlap-add synthesis."""
import logging
from typing import Optional, Union

import numpy as np

from ..models.spectrogram import Waveform
from .fft import irfft, is_power_of_two, rfft

logger = logging.getLogger(__name__)

N_FFT = 1024
HOP = 256


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def _samples(signal: Union[Waveform, np.ndarray]) -> np.ndarray:
    samples = signal.samples if isinstance(signal, Waveform) else np.asarray(signal, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError(f"stft expects a mono signal, got shape {samples.shape}")
    return samples


def frame_count(n_samples: int, hop: int = HOP) -> int:
    return n_samples // hop + 1


def stft(
    signal: Union[Waveform, np.ndarray],
    n_fft: int = N_FFT,
    hop: int = HOP,
    window: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Complex ``(n_fft // 2 + 1) x F`` grid with ``F = len // hop + 1``.

    The signal is reflection-padded by ``n_fft // 2`` at both ends so frame
    ``m`` is centered on sample ``m * hop``.
    """
    samples = _samples(signal)
    if samples.size == 0:
        raise ValueError("stft of an empty waveform")
    if not is_power_of_two(n_fft):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    window = hann_window(n_fft) if window is None else np.asarray(window, dtype=np.float64)
    if window.shape != (n_fft,):
        raise ValueError(f"window length {window.shape} != n_fft {n_fft}")

    padded = np.pad(samples, n_fft // 2, mode="reflect")
    n_frames = frame_count(samples.size, hop)
    starts = np.arange(n_frames) * hop
    frames = padded[starts[:, None] + np.arange(n_fft)[None, :]] * window
    return rfft(frames).T


def istft(
    spectrum: np.ndarray,
    hop: int = HOP,
    length: Optional[int] = None,
    window: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Windowed overlap-add inverse of :func:`stft`."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    n_fft = 2 * (spectrum.shape[0] - 1)
    n_frames = spectrum.shape[1]
    window = hann_window(n_fft) if window is None else np.asarray(window, dtype=np.float64)
    if length is None:
        length = (n_frames - 1) * hop

    frames = irfft(spectrum.T, n_fft) * window
    total = n_fft + hop * (n_frames - 1)
    signal = np.zeros(total)
    norm = np.zeros(total)
    squared = window ** 2
    for m in range(n_frames):
        start = m * hop
        signal[start:start + n_fft] += frames[m]
        norm[start:start + n_fft] += squared
    nonzero = norm > 1e-10
    signal[nonzero] /= norm[nonzero]

    trimmed = signal[n_fft // 2:]
    if trimmed.size >= length:
        return trimmed[:length]
    return np.pad(trimmed, (0, length - trimmed.size))
