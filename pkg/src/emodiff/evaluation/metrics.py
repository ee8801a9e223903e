"""
Recognition and synthesis-fidelity metrics.

``uar`` is the unweighted mean of per-class recalls. ``mad`` compares the
per-emotion class means of a real and a synthetic set cell by cell.
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import DataError, DimensionMismatchError
from ..models.condition import EMOTIONS, EmotionLabel
from ..models.report import ConfusionMatrix
from ..models.spectrogram import MelSpectrogram

logger = logging.getLogger(__name__)

TOTAL_KEY = "total"


def class_names(n_classes: int) -> List[str]:
    return list(EMOTIONS) if n_classes == len(EMOTIONS) else [str(i) for i in range(n_classes)]


def recalls(cm: ConfusionMatrix, ignore_empty: bool = False) -> Dict[str, float]:
    """Per-class recall keyed by class name.

    A class without test items raises ``DataError`` unless ``ignore_empty``,
    in which case it is left out.
    """
    rows = cm.row_sums()
    names = class_names(cm.n_classes)
    result = {}
    for index, name in enumerate(names):
        if rows[index] == 0:
            if ignore_empty:
                continue
            raise DataError(f"no test items of class {name!r}; recall is undefined")
        result[name] = float(cm.counts[index, index]) / float(rows[index])
    return result


def uar(cm: ConfusionMatrix, ignore_empty: bool = False) -> float:
    per_class = recalls(cm, ignore_empty=ignore_empty)
    if not per_class:
        raise DataError("confusion matrix has no test items")
    return float(np.mean(list(per_class.values())))


def confusion(truth: Sequence[int], predicted: Sequence[int], n_classes: int = len(EMOTIONS)) -> ConfusionMatrix:
    return ConfusionMatrix.from_predictions(truth, predicted, n_classes)


def class_mean(items: Sequence[MelSpectrogram], emotion: str) -> np.ndarray:
    emotion = EmotionLabel.parse(emotion).emotion
    grids = [m.values for m in items if m.emotion == emotion]
    if not grids:
        raise DataError(f"no {emotion!r} segments to average")
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"{emotion} segments differ in shape: {sorted(shapes)}", axis="grid")
    return np.mean(np.stack(grids), axis=0)


def mad(real_set: Sequence[MelSpectrogram], syn_set: Sequence[MelSpectrogram], emotion: str) -> float:
    """Mean over grid cells of ``|mean(real) - mean(syn)|`` for one emotion."""
    real_mean = class_mean(real_set, emotion)
    syn_mean = class_mean(syn_set, emotion)
    if real_mean.shape != syn_mean.shape:
        raise DimensionMismatchError(f"real grids {real_mean.shape} vs synthetic {syn_mean.shape}", axis="grid")
    return float(np.mean(np.abs(real_mean - syn_mean)))


def mad_table(
    real_set: Sequence[MelSpectrogram],
    syn_set: Sequence[MelSpectrogram],
    emotions: Optional[Sequence[str]] = None,
) -> Dict[str, float]:
    """Per-emotion MAD plus ``total``, the plain sum of the per-emotion values."""
    table = {}
    for emotion in emotions or EMOTIONS:
        table[emotion] = mad(real_set, syn_set, emotion)
    total = 0.0
    for emotion in emotions or EMOTIONS:
        total += table[emotion]
    table[TOTAL_KEY] = total
    logger.info("MAD " + ", ".join(f"{k}={v:.4f}" for k, v in table.items()))
    return table
