"""
Closed-form Gaussian diffusion: forward marginals, the true posterior and the
model's reverse-step distribution.

Functions accept arrays or Tensors and a timestep that is either an integer
or one integer per batch element (leading axis).
"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, TensorLike, as_tensor
from ..errors import DimensionMismatchError
from .schedule import NoiseSchedule

Timestep = Union[int, np.ndarray]


class VarianceMode(str, Enum):
    """How the reverse-step variance is chosen.

    LEARNED_RANGE interpolates log variance between beta_tilde and beta with
    the network's ``v``; the fixed modes ignore ``v``.
    """

    LEARNED_RANGE = "learned_range"
    FIXED_SMALL = "fixed_small"
    FIXED_LARGE = "fixed_large"


@dataclass
class ReverseStepDistribution:
    """Diagonal Gaussian p(x_{t-1} | x_t)."""

    mean: Tensor
    log_variance: Tensor

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_variance.data)


def coefficient(values: np.ndarray, t: Timestep, ndim: int) -> Union[float, np.ndarray]:
    """``values[t]`` shaped to broadcast against an ``ndim``-dimensional batch."""
    if np.ndim(t) == 0:
        return float(values[int(t)])
    t = np.asarray(t)
    return values[t].reshape((-1,) + (1,) * (ndim - 1))


def _check_same_shape(*tensors: Tensor) -> None:
    shape = tensors[0].shape
    for other in tensors[1:]:
        if other.shape != shape:
            raise DimensionMismatchError(f"shapes differ: {shape} vs {other.shape}", axis="shape")


def q_mean_variance(x0: TensorLike, t: Timestep, s: NoiseSchedule) -> Tuple[Tensor, np.ndarray, np.ndarray]:
    """Mean, variance and log variance of q(x_t | x_0)."""
    s.check_t(t)
    x0 = as_tensor(x0)
    mean = ops.mul(x0, coefficient(s.sqrt_alpha_bar, t, x0.ndim))
    variance = coefficient(1.0 - s.alpha_bar, t, x0.ndim)
    return mean, np.asarray(variance), np.log(variance)


def q_sample(x0: TensorLike, t: Timestep, eps: TensorLike, s: NoiseSchedule) -> Tensor:
    """``sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps``."""
    s.check_t(t)
    x0, eps = as_tensor(x0), as_tensor(eps)
    _check_same_shape(x0, eps)
    return ops.add(
        ops.mul(x0, coefficient(s.sqrt_alpha_bar, t, x0.ndim)),
        ops.mul(eps, coefficient(s.sqrt_one_minus_alpha_bar, t, x0.ndim)),
    )


def q_posterior(x0: TensorLike, xt: TensorLike, t: Timestep, s: NoiseSchedule) -> Tuple[Tensor, np.ndarray]:
    """Mean and variance (beta_tilde_t) of q(x_{t-1} | x_t, x_0)."""
    s.check_t(t)
    x0, xt = as_tensor(x0), as_tensor(xt)
    _check_same_shape(x0, xt)
    mean = ops.add(
        ops.mul(x0, coefficient(s.posterior_coef_x0, t, x0.ndim)),
        ops.mul(xt, coefficient(s.posterior_coef_xt, t, x0.ndim)),
    )
    return mean, np.asarray(coefficient(s.beta_tilde, t, x0.ndim))


def predict_x0_from_eps(
    xt: TensorLike, t: Timestep, eps_hat: TensorLike, s: NoiseSchedule, clip: bool = True
) -> Tensor:
    """``(xt - sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_bar_t)``, clamped to [-1, 1]."""
    s.check_t(t)
    xt, eps_hat = as_tensor(xt), as_tensor(eps_hat)
    _check_same_shape(xt, eps_hat)
    x0 = ops.div(
        ops.sub(xt, ops.mul(eps_hat, coefficient(s.sqrt_one_minus_alpha_bar, t, xt.ndim))),
        coefficient(s.sqrt_alpha_bar, t, xt.ndim),
    )
    return ops.clip(x0, -1.0, 1.0) if clip else x0


def p_mean_variance(
    eps_hat: TensorLike,
    v: TensorLike,
    xt: TensorLike,
    t: Timestep,
    s: NoiseSchedule,
    variance_mode: str = VarianceMode.LEARNED_RANGE.value,
) -> ReverseStepDistribution:
    """Reverse-step mean from the predicted noise and the (interpolated) log variance."""
    s.check_t(t)
    eps_hat, v, xt = as_tensor(eps_hat), as_tensor(v), as_tensor(xt)
    _check_same_shape(eps_hat, xt)
    ndim = xt.ndim
    eps_scale = coefficient(s.betas / np.where(s.sqrt_one_minus_alpha_bar > 0, s.sqrt_one_minus_alpha_bar, 1.0), t, ndim)
    mean = ops.mul(ops.sub(xt, ops.mul(eps_hat, eps_scale)), coefficient(1.0 / np.sqrt(s.alphas), t, ndim))

    min_log = coefficient(s.log_beta_tilde_clipped, t, ndim)
    max_log = coefficient(s.log_beta, t, ndim)
    mode = VarianceMode(variance_mode)
    if mode is VarianceMode.LEARNED_RANGE:
        _check_same_shape(v, xt)
        log_variance = ops.add(ops.mul(v, max_log), ops.mul(ops.sub(1.0, v), min_log))
    elif mode is VarianceMode.FIXED_SMALL:
        log_variance = as_tensor(np.broadcast_to(min_log, xt.shape))
    else:
        log_variance = as_tensor(np.broadcast_to(max_log, xt.shape))
    return ReverseStepDistribution(mean=mean, log_variance=log_variance)
