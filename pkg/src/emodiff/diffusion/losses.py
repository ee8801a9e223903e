"""
Training objectives: the simple noise-regression loss and the variational
bound term that trains the learned variance.

All values are nats averaged over dimensions.
"""
import math
from enum import Enum
from typing import NamedTuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, TensorLike, as_tensor
from .gaussian import ReverseStepDistribution, Timestep, VarianceMode, coefficient, p_mean_variance, q_posterior
from .schedule import NoiseSchedule

VLB_WEIGHT = 0.001
BIN_HALF_WIDTH = 1.0 / 255.0
_LOG_CLAMP = 1e-12


class LossMode(str, Enum):
    HYBRID = "hybrid"
    SIMPLE = "simple"


class LossTerms(NamedTuple):
    total: Tensor
    simple: Tensor
    vlb: Tensor


def normal_kl(mean1: TensorLike, logvar1: TensorLike, mean2: TensorLike, logvar2: TensorLike) -> Tensor:
    """Elementwise KL(N(mean1, e^logvar1) || N(mean2, e^logvar2))."""
    mean1, logvar1, mean2, logvar2 = (as_tensor(x) for x in (mean1, logvar1, mean2, logvar2))
    terms = ops.add(
        ops.add(-1.0, ops.sub(logvar2, logvar1)),
        ops.add(
            ops.exp(ops.sub(logvar1, logvar2)),
            ops.mul(ops.square(ops.sub(mean1, mean2)), ops.exp(ops.neg(logvar2))),
        ),
    )
    return ops.mul(terms, 0.5)


def approx_standard_normal_cdf(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    inner = ops.mul(ops.add(x, ops.mul(ops.power(x, 3.0), 0.044715)), math.sqrt(2.0 / math.pi))
    return ops.mul(ops.add(ops.tanh(inner), 1.0), 0.5)


def discretized_gaussian_log_likelihood(x: np.ndarray, means: TensorLike, log_scales: TensorLike) -> Tensor:
    """Log-probability of data in [-1, 1] quantized to bins of width 2/255.

    The outermost bins extend to infinity.
    """
    x = np.asarray(as_tensor(x).data)
    means, log_scales = as_tensor(means), as_tensor(log_scales)
    centered = ops.sub(x, means)
    inv_stdv = ops.exp(ops.neg(log_scales))
    cdf_plus = approx_standard_normal_cdf(ops.mul(inv_stdv, ops.add(centered, BIN_HALF_WIDTH)))
    cdf_min = approx_standard_normal_cdf(ops.mul(inv_stdv, ops.sub(centered, BIN_HALF_WIDTH)))
    log_cdf_plus = ops.log(ops.clip(cdf_plus, low=_LOG_CLAMP))
    log_one_minus_cdf_min = ops.log(ops.clip(ops.sub(1.0, cdf_min), low=_LOG_CLAMP))
    log_cdf_delta = ops.log(ops.clip(ops.sub(cdf_plus, cdf_min), low=_LOG_CLAMP))
    return ops.where(
        x < -0.999,
        log_cdf_plus,
        ops.where(x > 0.999, log_one_minus_cdf_min, log_cdf_delta),
    )


def vlb_term(
    model_dist: ReverseStepDistribution,
    x0: TensorLike,
    xt: TensorLike,
    t: Timestep,
    s: NoiseSchedule,
) -> Tensor:
    """Per-dimension variational bound term for step ``t``.

    ``t >= 2``: KL between the true posterior and the model step.
    ``t == 1``: negative discretized log-likelihood of ``x0``.
    The model mean is detached, so only the variance learns from this term.
    """
    s.check_t(t)
    x0, xt = as_tensor(x0), as_tensor(xt)
    true_mean, _ = q_posterior(x0, xt, t, s)
    true_log_variance = coefficient(s.log_beta_tilde_clipped, t, x0.ndim)
    model_mean = model_dist.mean.detach()

    kl = normal_kl(true_mean, true_log_variance, model_mean, model_dist.log_variance)
    nll = ops.neg(discretized_gaussian_log_likelihood(x0.data, model_mean, ops.mul(model_dist.log_variance, 0.5)))
    first_step = np.broadcast_to(np.asarray(coefficient(np.arange(s.num_steps + 1) == 1, t, x0.ndim)), x0.shape)
    if np.all(first_step):
        return ops.mean(nll)
    if not np.any(first_step):
        return ops.mean(kl)
    return ops.mean(ops.where(first_step, nll, kl))


def loss_terms(
    eps_hat: TensorLike,
    v: TensorLike,
    eps: TensorLike,
    x0: TensorLike,
    xt: TensorLike,
    t: Timestep,
    s: NoiseSchedule,
    vlb_weight: float = VLB_WEIGHT,
    mode: str = LossMode.HYBRID.value,
    variance_mode: str = VarianceMode.LEARNED_RANGE.value,
) -> LossTerms:
    eps_hat, eps = as_tensor(eps_hat), as_tensor(eps)
    simple = ops.mean(ops.square(ops.sub(eps, eps_hat)))
    if LossMode(mode) is LossMode.SIMPLE or VarianceMode(variance_mode) is not VarianceMode.LEARNED_RANGE:
        vlb = as_tensor(0.0)
        return LossTerms(total=simple, simple=simple, vlb=vlb)
    dist = p_mean_variance(eps_hat, v, xt, t, s, variance_mode)
    vlb = vlb_term(dist, x0, xt, t, s)
    return LossTerms(total=ops.add(simple, ops.mul(vlb, vlb_weight)), simple=simple, vlb=vlb)


def hybrid_loss(
    eps_hat: TensorLike,
    v: TensorLike,
    eps: TensorLike,
    x0: TensorLike,
    xt: TensorLike,
    t: Timestep,
    s: NoiseSchedule,
    vlb_weight: float = VLB_WEIGHT,
) -> Tensor:
    """``mean((eps - eps_hat)^2) + vlb_weight * vlb_term``."""
    return loss_terms(eps_hat, v, eps, x0, xt, t, s, vlb_weight).total
