"""Ancestral sampling through a (possibly strided) schedule."""
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..autodiff.tensor import Tensor, get_dtype, no_grad
from ..errors import NonFiniteError
from .gaussian import VarianceMode, p_mean_variance
from .schedule import NoiseSchedule

logger = logging.getLogger(__name__)

# (x_t [B, C, L], model timesteps [B], condition) -> (eps_hat, v), v already in [0, 1]
DenoiserFn = Callable[[Tensor, np.ndarray, np.ndarray], Tuple[Tensor, Tensor]]


def sample_loop(
    denoiser: DenoiserFn,
    cond: np.ndarray,
    schedule: NoiseSchedule,
    seed: int,
    shape: Sequence[int],
    variance_mode: str = VarianceMode.LEARNED_RANGE.value,
    progress: Optional[Callable[[int], None]] = None,
) -> np.ndarray:
    """Draw samples by running the reverse process from pure noise.

    ``shape`` is ``[B, C, L]`` (or ``[C, L]`` for a single sample). Index ``i``
    walks the schedule from its last entry down to 1 while the model sees the
    schedule's own timestep (``tau_i`` for strided schedules). The last step
    adds no noise and the result is clamped to [-1, 1].
    """
    shape = tuple(int(n) for n in shape)
    single = len(shape) == 2
    batch_shape = (1,) + shape if single else shape
    batch = batch_shape[0]
    cond = np.asarray(cond, dtype=np.float64)
    if cond.ndim == 1:
        cond = np.broadcast_to(cond, (batch, cond.size))

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(batch_shape).astype(get_dtype())
    timesteps = schedule.timesteps
    with no_grad():
        for i in range(schedule.num_steps, 0, -1):
            model_t = np.full(batch, timesteps[i], dtype=np.int64)
            eps_hat, v = denoiser(Tensor(x), model_t, cond)
            dist = p_mean_variance(eps_hat, v, x, i, schedule, variance_mode)
            if i > 1:
                noise = rng.standard_normal(batch_shape)
                x = dist.mean.data + np.exp(0.5 * dist.log_variance.data) * noise
            else:
                x = dist.mean.data
            x = np.asarray(x, dtype=get_dtype())
            if not np.all(np.isfinite(x)):
                logger.error(f"Sampling diverged at schedule index {i} (model timestep {timesteps[i]})")
                raise NonFiniteError("non-finite value during sampling", step=int(i))
            if progress:
                progress(i)
    out = np.clip(x, -1.0, 1.0)
    return out[0] if single else out
