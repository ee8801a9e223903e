"""Training loops for the diffusion generator and the emotion classifier."""
from .classifier_trainer import (
    ClassifierRun,
    evaluate_utterances,
    load_classifier,
    predict_utterance,
    save_classifier,
    soft_cross_entropy,
    train_classifier,
)
from .diffusion_trainer import DiffusionRun, load_denoiser, save_denoiser, train_diffusion
from .mixup import mixup_batch
from .synthesis import balanced_requests, synthesize

__all__ = [
    'ClassifierRun',
    'evaluate_utterances',
    'load_classifier',
    'predict_utterance',
    'save_classifier',
    'soft_cross_entropy',
    'train_classifier',
    'DiffusionRun',
    'load_denoiser',
    'save_denoiser',
    'train_diffusion',
    'mixup_batch',
    'balanced_requests',
    'synthesize',
]
