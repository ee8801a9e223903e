"""
Mel filterbank, normalized log-mel spectrograms and fixed-length segmentation.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional, Sequence, Union

import numpy as np

from ..models.spectrogram import LOG_FLOOR, MelSpectrogram, NormalizationSpec, Waveform
from .stft import HOP, N_FFT, stft

logger = logging.getLogger(__name__)

SEGMENT_FRAMES = 256
FLOOR_VALUE = -1.0

# Slaney mel scale: linear below 1 kHz, logarithmic above.
_F_SP = 200.0 / 3
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOG_STEP = np.log(6.4) / 27.0


def hz_to_mel(frequencies) -> np.ndarray:
    f = np.asarray(frequencies, dtype=np.float64)
    linear = f / _F_SP
    log_part = _MIN_LOG_MEL + np.log(np.maximum(f, _MIN_LOG_HZ) / _MIN_LOG_HZ) / _LOG_STEP
    return np.where(f >= _MIN_LOG_HZ, log_part, linear)


def mel_to_hz(mels) -> np.ndarray:
    m = np.asarray(mels, dtype=np.float64)
    linear = _F_SP * m
    log_part = _MIN_LOG_HZ * np.exp(_LOG_STEP * (np.maximum(m, _MIN_LOG_MEL) - _MIN_LOG_MEL))
    return np.where(m >= _MIN_LOG_MEL, log_part, linear)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters over the ``n_fft // 2 + 1`` STFT bins, rows peak-normalized."""

    n_mels: int = 80
    n_fft: int = N_FFT
    sample_rate: int = 22050
    f_min: float = 0.0
    f_max: float = 8000.0
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError(f"n_mels must be positive, got {self.n_mels}")
        if not 0.0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValueError(
                f"need 0 <= f_min < f_max <= Nyquist, got {self.f_min}..{self.f_max} at {self.sample_rate} Hz"
            )
        object.__setattr__(self, "weights", self._build())

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def _build(self) -> np.ndarray:
        bin_hz = np.linspace(0.0, self.sample_rate / 2, self.n_bins)
        edges = mel_to_hz(np.linspace(hz_to_mel(self.f_min), hz_to_mel(self.f_max), self.n_mels + 2))
        weights = np.zeros((self.n_mels, self.n_bins))
        for i in range(self.n_mels):
            low, center, high = edges[i], edges[i + 1], edges[i + 2]
            rising = (bin_hz - low) / (center - low)
            falling = (high - bin_hz) / (high - center)
            row = np.maximum(0.0, np.minimum(rising, falling))
            if row.max() <= 0.0:
                # Narrower than one bin: keep the closest bin.
                row[int(np.argmin(np.abs(bin_hz - center)))] = 1.0
                logger.debug(f"Mel filter {i} at {center:.1f} Hz fell between bins")
            weights[i] = row / row.max()
        weights.flags.writeable = False
        return weights

    @cached_property
    def pseudo_inverse(self) -> np.ndarray:
        """``n_bins x n_mels`` least-squares map from mel power back to linear power."""
        inverse = np.linalg.pinv(self.weights)
        inverse.flags.writeable = False
        return inverse

    def apply(self, power: np.ndarray) -> np.ndarray:
        return self.weights @ power


def log_mel_energies(
    signal: Union[Waveform, np.ndarray],
    fb: MelFilterbank,
    hop: int = HOP,
) -> np.ndarray:
    """``log(mel_power + 1e-5)``; the first pass that corpus statistics are computed from."""
    spectrum = stft(signal, n_fft=fb.n_fft, hop=hop)
    power = np.abs(spectrum) ** 2
    return np.log(fb.apply(power) + LOG_FLOOR)


def mel_spectrogram(
    signal: Union[Waveform, np.ndarray],
    fb: MelFilterbank,
    norm: NormalizationSpec,
    *,
    source_id: str = "",
    emotion: str = "neutral",
    speaker: str = "unknown",
    text: str = "",
    hop: int = HOP,
) -> MelSpectrogram:
    values = norm.normalize(log_mel_energies(signal, fb, hop=hop))
    return MelSpectrogram(
        values=values,
        emotion=emotion,
        speaker=speaker,
        source_id=source_id,
        text=text,
        frame_hop=hop,
    )


def normalization_from_energies(energies: Sequence[np.ndarray]) -> NormalizationSpec:
    """Corpus-level min/max over every log-mel grid."""
    if not energies:
        raise ValueError("cannot compute normalization from an empty corpus")
    low = min(float(np.min(e)) for e in energies)
    high = max(float(np.max(e)) for e in energies)
    return NormalizationSpec(log_min=low, log_max=high)


def segment(m: MelSpectrogram, frames_per_segment: int = SEGMENT_FRAMES) -> List[MelSpectrogram]:
    """Non-overlapping fixed-width windows; the short tail is padded with the floor value."""
    if frames_per_segment < 1:
        raise ValueError(f"frames_per_segment must be positive, got {frames_per_segment}")
    n_frames = m.valid_frames if m.valid_frames is not None else m.n_frames
    count = max(1, -(-n_frames // frames_per_segment))
    segments = []
    for index in range(count):
        start = index * frames_per_segment
        chunk = m.values[:, start:min(start + frames_per_segment, n_frames)]
        valid = chunk.shape[1]
        if valid < frames_per_segment:
            chunk = np.pad(chunk, ((0, 0), (0, frames_per_segment - valid)), constant_values=FLOOR_VALUE)
        segments.append(
            replace(
                m,
                values=chunk,
                source_id=f"{m.source_id}#{index}",
                valid_frames=valid,
                metadata={**m.metadata, "parent_id": m.source_id, "segment_index": index},
            )
        )
    return segments


def join_segments(segments: Sequence[MelSpectrogram]) -> np.ndarray:
    """Concatenate the unpadded part of each segment; the inverse of :func:`segment`."""
    if not segments:
        raise ValueError("no segments to join")
    return np.concatenate([s.values[:, : s.valid_frames] for s in segments], axis=1)
