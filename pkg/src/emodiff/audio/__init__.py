"""Waveform analysis, normalized log-mel features and Griffin-Lim inversion."""
from .fft import fft, ifft, irfft, rfft
from .griffin_lim import griffin_lim, reconstruct_phase
from .mel import MelFilterbank, log_mel_energies, mel_spectrogram, normalization_from_energies, segment
from .stft import istft, stft
from .wav import read_wav, write_wav

__all__ = [
    'fft',
    'ifft',
    'irfft',
    'rfft',
    'griffin_lim',
    'reconstruct_phase',
    'MelFilterbank',
    'log_mel_energies',
    'mel_spectrogram',
    'normalization_from_energies',
    'segment',
    'istft',
    'stft',
    'read_wav',
    'write_wav',
]
