from .condition import EMOTIONS, ConditionSpec, EmotionLabel, tokenize
from .report import ConfusionMatrix, ExperimentReport, FoldResult
from .spectrogram import MelSpectrogram, NormalizationSpec, Waveform

__all__ = [
    'EMOTIONS',
    'ConditionSpec',
    'EmotionLabel',
    'tokenize',
    'ConfusionMatrix',
    'ExperimentReport',
    'FoldResult',
    'MelSpectrogram',
    'NormalizationSpec',
    'Waveform',
]
