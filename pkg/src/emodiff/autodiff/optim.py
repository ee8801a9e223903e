"""Adaptive-moment (Adam) parameter updates."""
import logging
from typing import Iterable, List

import numpy as np

from ..errors import NonFiniteError
from .nn import Parameter

logger = logging.getLogger(__name__)


def adam_step(
    params: Iterable[Parameter],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected adaptive-moment update of every parameter.

    Uses the step-size form ``lr_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t)``
    with ``eps`` added to the uncorrected root second moment.
    """
    params = list(params)
    for param in params:
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)
        if not np.all(np.isfinite(grad)):
            bad = int(np.size(grad) - np.count_nonzero(np.isfinite(grad)))
            raise NonFiniteError(
                f"non-finite gradient ({bad} of {grad.size} entries, shape {param.shape})",
                step=param.step,
                name=param.name,
            )

    for param in params:
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)
        param.step += 1
        param.m = beta1 * param.m + (1.0 - beta1) * grad
        param.v = beta2 * param.v + (1.0 - beta2) * grad * grad
        step_size = lr * np.sqrt(1.0 - beta2 ** param.step) / (1.0 - beta1 ** param.step)
        param.assign(param.data - step_size * param.m / (np.sqrt(param.v) + eps))


class Adam:
    """Keeps the hyper-parameters and the parameter list of one training loop."""

    def __init__(self, params: Iterable[Parameter], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params: List[Parameter] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        logger.debug(f"Adam over {len(self.params)} parameters, lr={lr}")

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps)
