"""Mixup: convex combinations of input pairs and of their label vectors."""
from typing import Optional, Tuple

import numpy as np

MIXUP_ALPHA = 0.2


def sample_lambda(alpha: float, rng: np.random.Generator) -> float:
    if alpha <= 0:
        raise ValueError(f"mixup alpha must be positive, got {alpha}")
    return float(rng.beta(alpha, alpha))


def mixup_batch(
    x_i: np.ndarray,
    x_j: np.ndarray,
    y_i: np.ndarray,
    y_j: np.ndarray,
    alpha: float = MIXUP_ALPHA,
    seed: int = 0,
    lam: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """``(lam * x_i + (1 - lam) * x_j, lam * y_i + (1 - lam) * y_j)``.

    ``lam`` is drawn from Beta(alpha, alpha) with ``seed`` unless given.
    """
    if lam is None:
        lam = sample_lambda(alpha, np.random.default_rng(seed))
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if x_i.shape != x_j.shape or y_i.shape != y_j.shape:
        raise ValueError(f"mixup pairs must match: {x_i.shape}/{x_j.shape}, {y_i.shape}/{y_j.shape}")
    return lam * x_i + (1.0 - lam) * x_j, lam * y_i + (1.0 - lam) * y_j
