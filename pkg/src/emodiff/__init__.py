"""emodiff: diffusion-based emotional Mel-spectrogram augmentation."""

__version__ = "0.1.0"

from .models import ConditionSpec, MelSpectrogram, NormalizationSpec
from .storage import FileSpectrogramStore, SpectrogramStore
from .utils import generate_content_hash

__all__ = [
    'ConditionSpec',
    'MelSpectrogram',
    'NormalizationSpec',
    'FileSpectrogramStore',
    'SpectrogramStore',
    'generate_content_hash'
]
