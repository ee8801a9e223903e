"""
Conditional 1-D residual denoiser with a self-attention bottleneck.

Input ``x_t`` is ``[B, C, L]`` (C mel bins). The timestep embedding and the
condition vector are concatenated, broadcast along L and appended to the
input as extra channels; every residual block also receives them as a
per-channel bias. A zero-initialized 1x1 convolution emits ``2C`` channels
split into the noise estimate and the variance interpolation ``v``.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.nn import Conv1d, Linear, Module, SelfAttention
from ..autodiff.tensor import Tensor, TensorLike, as_tensor
from ..errors import ConfigError, DimensionMismatchError
from ..models.condition import ConditionSpec
from .conditioning import ConditionEncoder, ConditionVector, timestep_embedding

logger = logging.getLogger(__name__)


@dataclass
class DenoiserConfig:
    in_channels: int = 80
    res_filters: int = 1536
    n_res_pre: int = 8
    n_res_post: int = 3
    cond_dim: int = 128
    time_dim: int = 128
    kernel_size: int = 3
    token_dim: int = 64
    embedder: str = "hashed"
    vocab_buckets: int = 4096
    speaker_buckets: int = 64

    def validate(self) -> None:
        sizes = {k: v for k, v in asdict(self).items() if isinstance(v, int)}
        bad = [k for k, v in sizes.items() if v < 1]
        if bad:
            raise ConfigError(f"denoiser sizes must be positive: {', '.join(bad)}")
        if self.res_filters < self.in_channels:
            raise ConfigError(f"res_filters ({self.res_filters}) must be >= in_channels ({self.in_channels})")
        if self.time_dim % 2:
            raise ConfigError(f"time_dim must be even, got {self.time_dim}")
        if self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")

    @property
    def emb_dim(self) -> int:
        return self.time_dim + self.cond_dim


class ResBlock(Module):
    """``x + silu(conv(x) + proj(emb))``."""

    def __init__(self, channels: int, emb_dim: int, kernel_size: int, rng: np.random.Generator):
        self.conv = Conv1d(channels, channels, kernel_size, rng)
        self.emb_proj = Linear(emb_dim, channels, rng)

    def __call__(self, x: Tensor, emb: Tensor) -> Tensor:
        bias = ops.reshape(self.emb_proj(emb), (emb.shape[0], -1, 1))
        return ops.add(x, ops.silu(ops.add(self.conv(x), bias)))


class Denoiser(Module):
    def __init__(self, cfg: DenoiserConfig, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        self.time_fc1 = Linear(cfg.time_dim, cfg.time_dim, rng)
        self.time_fc2 = Linear(cfg.time_dim, cfg.time_dim, rng)
        self.condition = ConditionEncoder(
            cfg.cond_dim,
            cfg.token_dim,
            rng,
            embedder=cfg.embedder,
            vocab_buckets=cfg.vocab_buckets,
            speaker_buckets=cfg.speaker_buckets,
        )
        self.in_conv = Conv1d(cfg.in_channels + cfg.emb_dim, cfg.res_filters, cfg.kernel_size, rng)
        self.pre_blocks = [ResBlock(cfg.res_filters, cfg.emb_dim, cfg.kernel_size, rng) for _ in range(cfg.n_res_pre)]
        self.attention = SelfAttention(cfg.res_filters, rng)
        self.post_blocks = [ResBlock(cfg.res_filters, cfg.emb_dim, cfg.kernel_size, rng) for _ in range(cfg.n_res_post)]
        self.out_conv = Conv1d(cfg.res_filters, 2 * cfg.in_channels, 1, rng, zero=True)
        logger.debug(f"Denoiser with {sum(p.size for p in self.parameters())} parameters")

    def embed_time(self, t: np.ndarray) -> Tensor:
        emb = timestep_embedding(np.asarray(t), self.cfg.time_dim)
        return self.time_fc2(ops.silu(self.time_fc1(emb)))

    def forward(self, xt: TensorLike, t, cond: TensorLike) -> Tuple[Tensor, Tensor]:
        """``xt`` ``[B, C, L]``, ``t`` ``[B]`` ints, ``cond`` ``[B, cond_dim]``."""
        xt = as_tensor(xt)
        if xt.ndim != 3:
            raise DimensionMismatchError(f"denoiser input must be [B, C, L], got {xt.shape}", axis="ndim")
        batch, channels, length = xt.shape
        if channels != self.cfg.in_channels:
            raise DimensionMismatchError(
                f"denoiser expects {self.cfg.in_channels} mel channels, got {channels}", axis="C"
            )
        cond = as_tensor(cond)
        if cond.shape != (batch, self.cfg.cond_dim):
            raise DimensionMismatchError(
                f"condition must be [{batch}, {self.cfg.cond_dim}], got {cond.shape}", axis="cond_dim"
            )
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (batch,))

        emb = ops.concat([self.embed_time(t), cond], axis=1)  # [B, emb_dim]
        emb_channels = ops.broadcast_to(ops.reshape(emb, (batch, -1, 1)), (batch, self.cfg.emb_dim, length))
        h = self.in_conv(ops.concat([xt, emb_channels], axis=1))
        for block in self.pre_blocks:
            h = block(h, emb)
        h = self.attention(h)
        for block in self.post_blocks:
            h = block(h, emb)
        out = self.out_conv(h)
        eps_hat = ops.getitem(out, (slice(None), slice(0, channels)))
        v = ops.sigmoid(ops.getitem(out, (slice(None), slice(channels, 2 * channels))))
        return eps_hat, v

    def forward_specs(self, xt: TensorLike, t, specs: Sequence[ConditionSpec]) -> Tuple[Tensor, Tensor]:
        """Forward pass that also trains the condition encoder."""
        return self.forward(xt, t, self.condition.encode_batch(specs))

    def __call__(self, xt: TensorLike, t, cond: TensorLike) -> Tuple[Tensor, Tensor]:
        return self.forward(xt, t, cond)

    def manifest(self) -> Dict[str, Any]:
        return {"denoiser": asdict(self.cfg)}


def denoiser_forward(
    model: Denoiser,
    xt: TensorLike,
    t: Union[int, np.ndarray],
    cond: Union[ConditionVector, TensorLike],
) -> Tuple[Tensor, Tensor]:
    """Forward pass accepting a single ``[C, L]`` sample or a batch."""
    xt = as_tensor(xt)
    values = cond.values if isinstance(cond, ConditionVector) else cond
    single = xt.ndim == 2
    if single:
        xt = ops.reshape(xt, (1,) + xt.shape)
    cond_t = as_tensor(values)
    if cond_t.ndim == 1:
        cond_t = ops.reshape(cond_t, (1, -1))
    if cond_t.shape[0] == 1 and xt.shape[0] > 1:
        cond_t = ops.broadcast_to(cond_t, (xt.shape[0], cond_t.shape[1]))
    eps_hat, v = model.forward(xt, t, cond_t)
    if single:
        eps_hat = ops.reshape(eps_hat, eps_hat.shape[1:])
        v = ops.reshape(v, v.shape[1:])
    return eps_hat, v
