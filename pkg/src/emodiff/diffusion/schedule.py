"""
Noise schedules and their strided (respaced) subsequences.

Arrays are indexed by timestep: entry ``t`` belongs to step ``t`` for
``1 <= t <= T`` and entry 0 is the clean-data sentinel (beta 0, alpha_bar 1).
"""
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..autodiff.serialization import dumps_json, read_tensor, write_tensor
from ..errors import ConfigError, MissingArtifactError
from ..utils.files import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

COSINE_OFFSET = 0.008
MAX_BETA = 0.999


class ScheduleKind(str, Enum):
    LINEAR = "linear"
    COSINE = "cosine"


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-timestep diffusion constants for ``T`` steps."""

    betas: np.ndarray
    alpha_bar: np.ndarray
    kind: str = ScheduleKind.COSINE.value
    alphas: np.ndarray = field(init=False, repr=False)
    alpha_bar_prev: np.ndarray = field(init=False, repr=False)
    sqrt_alpha_bar: np.ndarray = field(init=False, repr=False)
    sqrt_one_minus_alpha_bar: np.ndarray = field(init=False, repr=False)
    beta_tilde: np.ndarray = field(init=False, repr=False)
    log_beta: np.ndarray = field(init=False, repr=False)
    log_beta_tilde_clipped: np.ndarray = field(init=False, repr=False)
    posterior_coef_x0: np.ndarray = field(init=False, repr=False)
    posterior_coef_xt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        betas = np.array(self.betas, dtype=np.float64)
        alpha_bar = np.array(self.alpha_bar, dtype=np.float64)
        if betas.ndim != 1 or betas.shape != alpha_bar.shape or betas.size < 2:
            raise ValueError(f"betas {betas.shape} and alpha_bar {alpha_bar.shape} must be 1-D of length T+1 >= 2")
        if betas[0] != 0.0 or alpha_bar[0] != 1.0:
            raise ValueError("index 0 must hold the sentinel beta=0, alpha_bar=1")
        steps = betas[1:]
        if not np.all(np.isfinite(betas)) or np.any(steps <= 0.0) or np.any(steps >= 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if np.any(np.diff(alpha_bar) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")

        alphas = 1.0 - betas
        alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
        one_minus = 1.0 - alpha_bar
        denominator = np.where(one_minus > 0.0, one_minus, 1.0)
        beta_tilde = np.where(one_minus > 0.0, betas * (1.0 - alpha_bar_prev) / denominator, 0.0)
        beta_tilde[0] = 0.0

        with np.errstate(divide="ignore"):
            log_beta_tilde = np.log(beta_tilde)
        clipped = log_beta_tilde.copy()
        clipped[0] = -np.inf
        # Step 1 has zero posterior variance; borrow step 2 (or beta_1 when T=1).
        clipped[1] = log_beta_tilde[2] if betas.size > 2 else math.log(betas[1])

        derived = {
            "betas": betas,
            "alpha_bar": alpha_bar,
            "alphas": alphas,
            "alpha_bar_prev": alpha_bar_prev,
            "sqrt_alpha_bar": np.sqrt(alpha_bar),
            "sqrt_one_minus_alpha_bar": np.sqrt(one_minus),
            "beta_tilde": beta_tilde,
            "log_beta": np.concatenate([[-np.inf], np.log(betas[1:])]),
            "log_beta_tilde_clipped": clipped,
            "posterior_coef_x0": np.where(one_minus > 0.0, betas * np.sqrt(alpha_bar_prev) / denominator, 0.0),
            "posterior_coef_xt": np.where(one_minus > 0.0, (1.0 - alpha_bar_prev) * np.sqrt(alphas) / denominator, 0.0),
        }
        for name, value in derived.items():
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @classmethod
    def from_betas(cls, step_betas: Sequence[float], kind: str) -> "NoiseSchedule":
        """Schedule from ``beta_1..beta_T``; alpha_bar is the running product."""
        step_betas = np.asarray(step_betas, dtype=np.float64)
        alpha_bar = np.cumprod(np.concatenate([[1.0], 1.0 - step_betas]))
        return cls(betas=np.concatenate([[0.0], step_betas]), alpha_bar=alpha_bar, kind=kind)

    @property
    def num_steps(self) -> int:
        return int(self.betas.size - 1)

    @property
    def timesteps(self) -> np.ndarray:
        """Model-facing timestep of every schedule index."""
        return np.arange(self.num_steps + 1)

    def check_t(self, t) -> None:
        t_arr = np.asarray(t)
        if t_arr.dtype.kind not in "iu":
            raise ValueError(f"timesteps must be integers, got {t_arr.dtype}")
        if t_arr.size == 0 or t_arr.min() < 1 or t_arr.max() > self.num_steps:
            raise ValueError(f"timestep out of range [1, {self.num_steps}]: {t}")

    def header(self) -> Dict[str, Any]:
        return {"kind": self.kind, "T": self.num_steps, "S": self.num_steps}


@dataclass(frozen=True, eq=False)
class StridedSchedule(NoiseSchedule):
    """A subsequence ``tau`` of a parent schedule, rebased to ``S`` steps."""

    tau: np.ndarray = field(default=None)
    parent_steps: int = 0

    def __post_init__(self):
        super().__post_init__()
        tau = np.array(self.tau, dtype=np.int64)
        tau.flags.writeable = False
        object.__setattr__(self, "tau", tau)

    @property
    def timesteps(self) -> np.ndarray:
        return self.tau

    def header(self) -> Dict[str, Any]:
        return {"kind": self.kind, "T": self.parent_steps, "S": self.num_steps}


def make_cosine_schedule(T: int, s: float = COSINE_OFFSET, max_beta: float = MAX_BETA) -> NoiseSchedule:
    """Squared-cosine alpha_bar; betas from consecutive ratios, clipped to ``max_beta``."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")

    def f(step: int) -> float:
        return math.cos((step / T + s) / (1 + s) * math.pi / 2) ** 2

    betas = [min(1.0 - f(step) / f(step - 1), max_beta) for step in range(1, T + 1)]
    return NoiseSchedule.from_betas(betas, ScheduleKind.COSINE.value)


def make_linear_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, T), ScheduleKind.LINEAR.value)


def make_schedule(kind: str, T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    if kind == ScheduleKind.COSINE.value:
        return make_cosine_schedule(T)
    if kind == ScheduleKind.LINEAR.value:
        return make_linear_schedule(T, beta_start, beta_end)
    raise ConfigError(f"Unknown schedule kind {kind!r}; expected cosine or linear")


def make_schedule_from_timesteps(parent: NoiseSchedule, timesteps: Sequence[int]) -> StridedSchedule:
    """Rebase ``parent`` onto an explicit increasing subsequence ending at T."""
    tau = [int(t) for t in timesteps]
    if not tau:
        raise ValueError("timesteps must not be empty")
    if any(b <= a for a, b in zip(tau, tau[1:])):
        raise ValueError("timesteps must be strictly increasing")
    if tau[0] < 1 or tau[-1] != parent.num_steps:
        raise ValueError(f"timesteps must lie in [1, {parent.num_steps}] and end at {parent.num_steps}")

    full_tau = [0] + tau
    betas = [0.0]
    for prev, cur in zip(full_tau, full_tau[1:]):
        if cur - prev == 1:
            betas.append(float(parent.betas[cur]))
        else:
            betas.append(1.0 - parent.alpha_bar[cur] / parent.alpha_bar[prev])
    return StridedSchedule(
        betas=np.array(betas),
        alpha_bar=parent.alpha_bar[full_tau],
        kind=parent.kind,
        tau=np.array(full_tau),
        parent_steps=parent.num_steps,
    )


def make_strided_schedule(parent: NoiseSchedule, S: int) -> StridedSchedule:
    """``S`` evenly spaced steps ``tau_i = floor(i * T / S)``, so ``tau_S = T``."""
    T = parent.num_steps
    if not 1 <= S <= T:
        raise ValueError(f"sample steps must satisfy 1 <= S <= T={T}, got {S}")
    tau = [(i * T) // S for i in range(1, S + 1)]
    logger.debug(f"Strided schedule: {S} of {T} steps")
    return make_schedule_from_timesteps(parent, tau)


def save_schedule(directory: PathLike, schedule: NoiseSchedule) -> Path:
    """``betas.edtf`` and ``alpha_bar.edtf`` plus a ``schedule.json`` header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_tensor(directory / "betas.edtf", schedule.betas)
    write_tensor(directory / "alpha_bar.edtf", schedule.alpha_bar)
    header = schedule.header()
    if isinstance(schedule, StridedSchedule):
        write_tensor(directory / "tau.edtf", schedule.tau.astype(np.float64))
    atomic_write_text(directory / "schedule.json", dumps_json(header))
    return directory


def load_schedule(directory: PathLike) -> NoiseSchedule:
    directory = Path(directory)
    header_path = directory / "schedule.json"
    if not header_path.exists():
        raise MissingArtifactError(str(header_path), "schedule header")
    header = json.loads(header_path.read_text(encoding="utf-8"))
    betas = read_tensor(directory / "betas.edtf")
    alpha_bar = read_tensor(directory / "alpha_bar.edtf")
    if header["S"] != header["T"]:
        tau = read_tensor(directory / "tau.edtf").astype(np.int64)
        return StridedSchedule(betas=betas, alpha_bar=alpha_bar, kind=header["kind"], tau=tau, parent_steps=header["T"])
    return NoiseSchedule(betas=betas, alpha_bar=alpha_bar, kind=header["kind"])
