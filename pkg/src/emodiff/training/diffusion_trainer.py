"""
Diffusion training loop and denoiser checkpoints.

Each step draws a batch of segments, one uniform timestep per element and
standard-normal noise, corrupts the batch with ``q_sample`` and minimizes the
hybrid objective with Adam. Randomness comes from named sub-streams of the
run seed, so a rerun with the same seed is bit-identical.
"""
import csv
import io
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff.optim import Adam
from ..autodiff.serialization import load_checkpoint, save_checkpoint
from ..autodiff.tensor import get_precision
from ..diffusion.gaussian import VarianceMode, q_sample
from ..diffusion.losses import VLB_WEIGHT, LossMode, loss_terms
from ..diffusion.schedule import NoiseSchedule, load_schedule, save_schedule
from ..errors import ContractError, DataError, NonFiniteError
from ..models.condition import ConditionSpec
from ..models.spectrogram import MelSpectrogram
from ..networks.denoiser import Denoiser, DenoiserConfig
from ..utils.files import PathLike, atomic_write_text
from ..utils.hashing import sub_rng

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "l_simple", "l_vlb", "l_total")
CHECKPOINT_KIND = "denoiser"

TrainingItem = Union[MelSpectrogram, Tuple[MelSpectrogram, ConditionSpec]]


class LossRecord(NamedTuple):
    step: int
    l_simple: float
    l_vlb: float
    l_total: float


@dataclass
class DiffusionRun:
    model: Denoiser
    schedule: NoiseSchedule
    seed: int
    steps: int = 0
    history: List[LossRecord] = field(default_factory=list)

    def mean_simple_loss(self, last: int = 100) -> float:
        tail = self.history[-last:]
        return float(np.mean([r.l_simple for r in tail])) if tail else float("nan")


def build_denoiser(cfg: DenoiserConfig, seed: int) -> Denoiser:
    return Denoiser(cfg, sub_rng(seed, "denoiser-init"))


def _unpack(corpus: Sequence[TrainingItem]) -> Tuple[np.ndarray, List[ConditionSpec], List[str]]:
    grids, specs, ids = [], [], []
    for item in corpus:
        if isinstance(item, tuple):
            segment, spec = item
        else:
            segment, spec = item, item.condition()
        grids.append(segment.values)
        specs.append(spec)
        ids.append(segment.source_id)
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise DataError(f"training segments must share one shape, got {sorted(shapes)}")
    return np.stack(grids), specs, ids


def format_loss_csv(history: Sequence[LossRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LOSS_COLUMNS)
    for record in history:
        writer.writerow([record.step, f"{record.l_simple:.8f}", f"{record.l_vlb:.8f}", f"{record.l_total:.8f}"])
    return buffer.getvalue()


def train_diffusion(
    corpus: Sequence[TrainingItem],
    cfg: DenoiserConfig,
    schedule: NoiseSchedule,
    steps: int,
    batch: int = 64,
    seed: int = 0,
    *,
    lr: float = 1e-4,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    vlb_weight: float = VLB_WEIGHT,
    loss_mode: str = LossMode.HYBRID.value,
    variance_mode: str = VarianceMode.LEARNED_RANGE.value,
    output_dir: Optional[PathLike] = None,
    checkpoint_interval: int = 0,
    log_interval: int = 100,
    model: Optional[Denoiser] = None,
    manifest_extra: Optional[Dict[str, Any]] = None,
) -> DiffusionRun:
    """Train a denoiser; with ``output_dir`` also write checkpoints and ``loss.csv``.

    ``corpus`` holds segments (conditioned on their own labels and text) or
    explicit ``(segment, ConditionSpec)`` pairs.
    """
    if steps < 0:
        raise ContractError(f"steps must be non-negative, got {steps}")
    if batch < 1:
        raise ContractError(f"batch must be positive, got {batch}")
    model = model or build_denoiser(cfg, seed)
    run = DiffusionRun(model=model, schedule=schedule, seed=seed)
    extra = dict(manifest_extra or {})
    extra.update({"loss_mode": loss_mode, "variance_mode": variance_mode, "vlb_weight": vlb_weight})

    if steps and not corpus:
        raise DataError("cannot train the diffusion model on an empty corpus")
    grids, specs, ids = _unpack(corpus) if corpus else (np.zeros((0,)), [], [])
    if steps and grids.shape[1] != cfg.in_channels:
        raise DataError(f"segments have {grids.shape[1]} mel bins, denoiser expects {cfg.in_channels}")

    optimizer = Adam(model.parameters(), lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)
    batch_rng = sub_rng(seed, "batch")
    time_rng = sub_rng(seed, "timestep")
    noise_rng = sub_rng(seed, "noise")
    T = schedule.num_steps
    logger.info(f"Training denoiser for {steps} steps, batch {batch}, T={T}, {len(ids)} segments")

    for step in range(steps):
        index = batch_rng.integers(0, len(ids), size=batch)
        x0 = grids[index]
        t = time_rng.integers(1, T + 1, size=batch)
        noise = noise_rng.standard_normal(x0.shape)
        xt = q_sample(x0, t, noise, schedule)

        eps_hat, v = model.forward_specs(xt, t, [specs[i] for i in index])
        terms = loss_terms(eps_hat, v, noise, x0, xt, t, schedule, vlb_weight, loss_mode, variance_mode)
        record = LossRecord(step, terms.simple.item(), terms.vlb.item(), terms.total.item())
        if not np.isfinite(record.l_total):
            batch_ids = ", ".join(ids[i] for i in index[:8])
            logger.error(f"Non-finite loss at step {step}: {record}; batch starts with {batch_ids}; t={t[:8].tolist()}")
            raise NonFiniteError("non-finite diffusion loss", step=step)

        optimizer.zero_grad()
        terms.total.backward()
        optimizer.step()
        run.history.append(record)
        run.steps = step + 1

        if log_interval and run.steps % log_interval == 0:
            logger.info(
                f"step {run.steps}/{steps}: l_simple={record.l_simple:.4f} "
                f"l_vlb={record.l_vlb:.4f} l_total={record.l_total:.4f}"
            )
        if output_dir is not None and checkpoint_interval and run.steps % checkpoint_interval == 0 and run.steps < steps:
            save_denoiser(Path(output_dir) / "checkpoints" / f"step_{run.steps:07d}", run, extra)
            atomic_write_text(Path(output_dir) / "loss.csv", format_loss_csv(run.history))

    if output_dir is not None:
        save_denoiser(Path(output_dir) / "checkpoint", run, extra)
        atomic_write_text(Path(output_dir) / "loss.csv", format_loss_csv(run.history))
    return run


def save_denoiser(directory: PathLike, run: DiffusionRun, extra: Optional[Dict[str, Any]] = None) -> Path:
    """EDTF weights, the schedule and a manifest with config, step count and seed."""
    directory = Path(directory)
    manifest = {
        "kind": CHECKPOINT_KIND,
        "denoiser": asdict(run.model.cfg),
        "schedule": run.schedule.header(),
        "step": run.steps,
        "seed": run.seed,
        "precision": get_precision(),
        **(extra or {}),
    }
    save_checkpoint(directory, run.model.state_dict(), manifest)
    save_schedule(directory / "schedule", run.schedule)
    return directory


def load_denoiser(directory: PathLike) -> Tuple[Denoiser, NoiseSchedule, Dict[str, Any]]:
    tensors, manifest = load_checkpoint(directory)
    if manifest.get("kind") != CHECKPOINT_KIND:
        raise DataError(f"{directory} is not a denoiser checkpoint (kind={manifest.get('kind')!r})")
    cfg = DenoiserConfig(**manifest["denoiser"])
    model = build_denoiser(cfg, int(manifest.get("seed", 0)))
    model.load_state_dict(tensors)
    schedule = load_schedule(Path(directory) / "schedule")
    logger.info(f"Loaded denoiser at step {manifest.get('step')} from {directory}")
    return model, schedule, manifest
