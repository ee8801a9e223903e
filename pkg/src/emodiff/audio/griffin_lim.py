"""
Phase reconstruction from magnitude spectrograms (fast Griffin-Lim).
"""
import logging
from typing import Optional, Tuple

import numpy as np

from ..models.spectrogram import LOG_FLOOR, MelSpectrogram, NormalizationSpec, Waveform
from .mel import MelFilterbank
from .stft import HOP, istft, stft

logger = logging.getLogger(__name__)

PEAK_LEVEL = 0.95
SILENCE_LEVEL = 1e-8


def consistency_residual(magnitude: np.ndarray, signal: np.ndarray, hop: int = HOP) -> float:
    """``||target - |STFT(signal)|||_F / ||target||_F``; zero for an all-zero target."""
    target_norm = np.linalg.norm(magnitude)
    if target_norm == 0.0:
        return 0.0
    n_fft = 2 * (magnitude.shape[0] - 1)
    rebuilt = np.abs(stft(signal, n_fft=n_fft, hop=hop))
    return float(np.linalg.norm(magnitude - rebuilt) / target_norm)


def reconstruct_phase(
    magnitude: np.ndarray,
    iterations: int = 60,
    hop: int = HOP,
    momentum: float = 0.99,
    seed: int = 0,
    length: Optional[int] = None,
) -> Tuple[np.ndarray, float]:
    """Estimate a signal whose STFT magnitude matches ``magnitude``.

    Alternates inverse and forward STFTs from seeded random phases, with the
    momentum term of the fast variant (``momentum=0`` is the classic
    algorithm). Returns the signal and its magnitude-consistency residual.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if momentum < 0:
        raise ValueError(f"momentum must be non-negative, got {momentum}")
    magnitude = np.asarray(magnitude, dtype=np.float64)
    n_fft = 2 * (magnitude.shape[0] - 1)
    if length is None:
        length = (magnitude.shape[1] - 1) * hop
    if magnitude.max(initial=0.0) <= SILENCE_LEVEL:
        return np.zeros(length), 0.0

    rng = np.random.default_rng(seed)
    angles = np.exp(2j * np.pi * rng.random(magnitude.shape))
    previous = None
    tiny = np.finfo(np.float64).tiny
    for _ in range(iterations):
        signal = istft(magnitude * angles, hop=hop, length=length)
        rebuilt = stft(signal, n_fft=n_fft, hop=hop)
        angles = rebuilt if previous is None else rebuilt - (momentum / (1.0 + momentum)) * previous
        angles = angles / (np.abs(angles) + tiny)
        previous = rebuilt

    signal = istft(magnitude * angles, hop=hop, length=length)
    residual = consistency_residual(magnitude, signal, hop=hop)
    logger.debug(f"Phase reconstruction: {iterations} iterations, residual {residual:.3e}")
    return signal, residual


def mel_to_magnitude(m: MelSpectrogram, fb: MelFilterbank, norm: NormalizationSpec) -> np.ndarray:
    """Linear-frequency magnitudes from a normalized mel grid via the filterbank pseudo-inverse."""
    values = m.values[:, : m.valid_frames]
    if values.shape[0] != fb.n_mels:
        raise ValueError(f"spectrogram has {values.shape[0]} mel bins, filterbank {fb.n_mels}")
    mel_power = np.maximum(np.exp(norm.denormalize(values)) - LOG_FLOOR, 0.0)
    power = np.maximum(fb.pseudo_inverse @ mel_power, 0.0)
    return np.sqrt(power)


def griffin_lim(
    m: MelSpectrogram,
    fb: MelFilterbank,
    norm: NormalizationSpec,
    iterations: int = 60,
    seed: int = 0,
    momentum: float = 0.99,
) -> Waveform:
    """Render a normalized mel spectrogram as audio, peak-normalized to 0.95."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    magnitude = mel_to_magnitude(m, fb, norm)
    signal, residual = reconstruct_phase(
        magnitude, iterations=iterations, hop=m.frame_hop, momentum=momentum, seed=seed
    )
    peak = float(np.max(np.abs(signal), initial=0.0))
    if peak > SILENCE_LEVEL:
        signal = signal * (PEAK_LEVEL / peak)
    else:
        signal = np.zeros_like(signal)
    logger.info(f"Rendered {m.source_id or 'spectrogram'}: {signal.size} samples, residual {residual:.3e}")
    return Waveform(samples=signal, sample_rate=fb.sample_rate)
