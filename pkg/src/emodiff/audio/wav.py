"""16-bit PCM mono WAV reading and writing."""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.io import wavfile

from ..errors import MissingArtifactError, WavFormatError
from ..models.spectrogram import Waveform
from ..utils.files import PathLike

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0


def read_wav(path: PathLike, expected_rate: Optional[int] = None) -> Waveform:
    """Load a PCM 16-bit mono RIFF file; anything else is rejected."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), "WAV file")
    try:
        rate, data = wavfile.read(str(path))
    except (ValueError, EOFError, OSError) as e:
        raise WavFormatError(f"{path}: unreadable WAV ({e})") from e
    if data.dtype != np.int16:
        raise WavFormatError(f"{path}: expected 16-bit PCM, got {data.dtype}")
    if data.ndim != 1:
        raise WavFormatError(f"{path}: expected mono, got {data.shape[1]} channels")
    if expected_rate is not None and rate != expected_rate:
        raise WavFormatError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz (no resampling)")
    if data.size == 0:
        raise WavFormatError(f"{path}: no samples")
    return Waveform(samples=data.astype(np.float64) / PCM16_SCALE, sample_rate=int(rate))


def write_wav(path: PathLike, waveform: Waveform) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.round(waveform.samples * (PCM16_SCALE - 1)), -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)
    wavfile.write(str(path), waveform.sample_rate, pcm)
    logger.debug(f"Wrote {pcm.size} samples to {path}")
