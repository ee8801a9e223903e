"""Neural networks: condition encoding, the denoiser and the emotion classifier."""
from .classifier import ClassifierConfig, SERClassifier, classifier_forward
from .conditioning import ConditionEncoder, ConditionVector, encode_condition, timestep_embedding
from .denoiser import Denoiser, DenoiserConfig, denoiser_forward
from .embedders import EmbedderFactory, HashedTokenEmbedder, TokenEmbedder

__all__ = [
    'ClassifierConfig',
    'SERClassifier',
    'classifier_forward',
    'ConditionEncoder',
    'ConditionVector',
    'encode_condition',
    'timestep_embedding',
    'Denoiser',
    'DenoiserConfig',
    'denoiser_forward',
    'EmbedderFactory',
    'HashedTokenEmbedder',
    'TokenEmbedder',
]
