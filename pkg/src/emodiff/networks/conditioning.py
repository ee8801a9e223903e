"""
Timestep and condition embeddings for the denoiser.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.nn import Embedding, Linear, Module, SelfAttention
from ..autodiff.tensor import Tensor, no_grad
from ..models.condition import EMOTIONS, ConditionSpec, EmotionLabel
from ..utils.hashing import stable_bucket
from .embedders import EmbedderFactory, TokenEmbedder

MAX_PERIOD = 10000.0


def timestep_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding: interleaved ``(sin(t w_k), cos(t w_k))`` pairs.

    Frequencies ``w_k`` run geometrically from 1 down to 1/10000. ``t`` may be
    a scalar (returns ``[dim]``) or an array of timesteps (returns ``[B, dim]``).
    """
    if dim < 2 or dim % 2:
        raise ValueError(f"timestep embedding width must be even and positive, got {dim}")
    half = dim // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = np.exp(-math.log(MAX_PERIOD) * np.arange(half) / (half - 1))
    angles = np.asarray(t, dtype=np.float64)[..., None] * freqs
    out = np.empty(angles.shape[:-1] + (dim,))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


@dataclass(frozen=True)
class ConditionVector:
    """Fixed-width encoding of a ConditionSpec."""

    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[-1])


class ConditionEncoder(Module):
    """Emotion and speaker pseudo-tokens plus word tokens, mixed by FC+SiLU layers
    and one self-attention layer, mean-pooled to ``cond_dim``."""

    def __init__(
        self,
        cond_dim: int,
        token_dim: int,
        rng: np.random.Generator,
        embedder: str = "hashed",
        vocab_buckets: int = 4096,
        speaker_buckets: int = 64,
    ):
        self.cond_dim = cond_dim
        self.speaker_buckets = speaker_buckets
        self.tokens: TokenEmbedder = EmbedderFactory.create(embedder, token_dim, rng, buckets=vocab_buckets)
        self.emotion_table = Embedding(len(EMOTIONS), token_dim, rng)
        self.speaker_table = Embedding(speaker_buckets, token_dim, rng)
        self.fc1 = Linear(token_dim, cond_dim, rng)
        self.fc2 = Linear(cond_dim, cond_dim, rng)
        self.attention = SelfAttention(cond_dim, rng)

    def encode(self, spec: ConditionSpec) -> Tensor:
        """Differentiable ``[cond_dim]`` encoding of one spec."""
        emotion = self.emotion_table(np.array([int(EmotionLabel.parse(spec.emotion))]))
        speaker = self.speaker_table(np.array([stable_bucket(spec.speaker, self.speaker_buckets)]))
        parts = [emotion, speaker]
        if spec.tokens:
            parts.append(self.tokens(spec.tokens))
        sequence = ops.concat(parts, axis=0)  # [n, token_dim]
        hidden = ops.silu(self.fc2(ops.silu(self.fc1(sequence))))  # [n, cond_dim]
        mixed = self.attention(ops.swap_last(hidden))  # [cond_dim, n]
        return ops.mean(mixed, axis=-1)

    def encode_batch(self, specs: Sequence[ConditionSpec]) -> Tensor:
        """``[B, cond_dim]``; identical specs within a batch are encoded once."""
        cache = {}
        rows: List[Tensor] = []
        for spec in specs:
            if spec not in cache:
                cache[spec] = self.encode(spec)
            rows.append(cache[spec])
        return ops.stack(rows, axis=0)

    def __call__(self, spec: ConditionSpec) -> Tensor:
        return self.encode(spec)


def encode_condition(spec: ConditionSpec, encoder: ConditionEncoder) -> ConditionVector:
    """Evaluate the encoder without recording gradients."""
    with no_grad():
        values = np.array(encoder.encode(spec).data, dtype=np.float64)
    values.flags.writeable = False
    return ConditionVector(values=values)
