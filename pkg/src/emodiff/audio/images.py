"""Binary PGM (P5) dumps of spectrograms and confusion matrices."""
from typing import Union

import numpy as np

from ..models.report import ConfusionMatrix
from ..utils.files import PathLike, atomic_write_bytes


def encode_pgm(pixels: np.ndarray) -> bytes:
    """``pixels`` is a ``rows x columns`` uint8 image, top row first."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def spectrogram_pixels(values: np.ndarray) -> np.ndarray:
    """One byte per cell, ``round((v + 1) * 127.5)``; frames on x, mel bin 0 at the bottom."""
    scaled = np.round((np.clip(values, -1.0, 1.0) + 1.0) * 127.5)
    return scaled.astype(np.uint8)[::-1, :]


def write_spectrogram_pgm(path: PathLike, values: np.ndarray) -> None:
    atomic_write_bytes(path, encode_pgm(spectrogram_pixels(values)))


def confusion_pixels(cm: Union[ConfusionMatrix, np.ndarray], cell: int = 16) -> np.ndarray:
    """Row-normalized heatmap (white = all of the row's mass), ``cell`` pixels per entry."""
    counts = cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm)
    rows = counts.sum(axis=1, keepdims=True).astype(np.float64)
    fractions = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    image = np.round(fractions * 255.0).astype(np.uint8)
    return np.kron(image, np.ones((cell, cell), dtype=np.uint8))


def write_confusion_pgm(path: PathLike, cm: Union[ConfusionMatrix, np.ndarray], cell: int = 16) -> None:
    atomic_write_bytes(path, encode_pgm(confusion_pixels(cm, cell)))
