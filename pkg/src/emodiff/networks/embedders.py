"""
Token embedders for the condition encoder.

Embedders are trainable modules mapping a word sequence to one vector per
token. New kinds are added through ``EmbedderFactory.register_embedder``.
"""
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Type

import numpy as np

from ..autodiff import ops
from ..autodiff.nn import Module, Parameter
from ..autodiff.tensor import Tensor
from ..errors import ConfigError
from ..utils.hashing import stable_bucket


class TokenEmbedder(Module, ABC):
    """Base class for token-sequence embedders."""

    kind = "base"

    def __init__(self, dim: int):
        self.dim = dim

    @abstractmethod
    def embed(self, tokens: Sequence[str]) -> Tensor:
        """Return a ``[len(tokens), dim]`` tensor (``[0, dim]`` for no tokens)."""

    def __call__(self, tokens: Sequence[str]) -> Tensor:
        return self.embed(tokens)


class HashedTokenEmbedder(TokenEmbedder):
    """Lookup table over a hashed vocabulary; unseen words still get a row."""

    kind = "hashed"

    def __init__(self, dim: int, rng: np.random.Generator, buckets: int = 4096):
        super().__init__(dim)
        self.buckets = buckets
        self.table = Parameter(rng.normal(0.0, 1.0, size=(buckets, dim)), "table")

    def indices(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([stable_bucket(tok, self.buckets) for tok in tokens], dtype=np.int64)

    def embed(self, tokens: Sequence[str]) -> Tensor:
        return ops.getitem(self.table, self.indices(tokens))


class CharNgramEmbedder(TokenEmbedder):
    """Each token is the mean of its hashed character trigram rows.

    Words sharing sub-strings get related vectors.
    """

    kind = "char_ngram"

    def __init__(self, dim: int, rng: np.random.Generator, buckets: int = 4096, n: int = 3):
        super().__init__(dim)
        self.buckets = buckets
        self.n = n
        self.table = Parameter(rng.normal(0.0, 1.0, size=(buckets, dim)), "table")

    def ngrams(self, token: str) -> List[str]:
        padded = f"<{token}>"
        if len(padded) <= self.n:
            return [padded]
        return [padded[i:i + self.n] for i in range(len(padded) - self.n + 1)]

    def embed(self, tokens: Sequence[str]) -> Tensor:
        if not tokens:
            return ops.getitem(self.table, np.zeros(0, dtype=np.int64))
        rows = []
        for token in tokens:
            index = np.array([stable_bucket(g, self.buckets) for g in self.ngrams(token)], dtype=np.int64)
            rows.append(ops.mean(ops.getitem(self.table, index), axis=0))
        return ops.stack(rows, axis=0)


class EmbedderFactory:
    """Factory for creating token embedders by name."""

    _embedders: Dict[str, Type[TokenEmbedder]] = {
        HashedTokenEmbedder.kind: HashedTokenEmbedder,
        CharNgramEmbedder.kind: CharNgramEmbedder,
    }

    @classmethod
    def create(cls, kind: str, dim: int, rng: np.random.Generator, buckets: int = 4096) -> TokenEmbedder:
        embedder_class = cls._embedders.get(kind)
        if embedder_class is None:
            raise ConfigError(f"Unknown embedder {kind!r}; available: {', '.join(cls.get_available_embedders())}")
        return embedder_class(dim, rng, buckets=buckets)

    @classmethod
    def get_available_embedders(cls) -> List[str]:
        return sorted(cls._embedders)

    @classmethod
    def register_embedder(cls, kind: str, embedder_class: Type[TokenEmbedder]) -> None:
        cls._embedders[kind] = embedder_class
