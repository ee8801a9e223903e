from .base import SpectrogramStore
from .files import FileSpectrogramStore, load_segments, save_segments

__all__ = ['SpectrogramStore', 'FileSpectrogramStore', 'load_segments', 'save_segments']
