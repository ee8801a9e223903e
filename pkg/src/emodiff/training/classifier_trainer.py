"""
Emotion classifier training, evaluation and utterance-level prediction.

Training minimizes soft-label cross-entropy (plain cross-entropy for one-hot
targets, mixed targets under mixup) with Adam and keeps the weights of the
epoch with the best development UAR.
"""
import csv
import io
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import Adam
from ..autodiff.serialization import load_checkpoint, save_checkpoint
from ..autodiff.tensor import Tensor, TensorLike, as_tensor, no_grad
from ..errors import DataError, NonFiniteError
from ..evaluation.metrics import confusion, uar
from ..models.condition import EmotionLabel
from ..models.report import ConfusionMatrix
from ..models.spectrogram import MelSpectrogram
from ..networks.classifier import ClassifierConfig, SERClassifier
from ..utils.files import PathLike, atomic_write_text
from ..utils.hashing import sub_rng
from .mixup import mixup_batch, sample_lambda

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "dev_uar")
CHECKPOINT_KIND = "classifier"
EVAL_BATCH = 256


class EpochRecord(NamedTuple):
    epoch: int
    train_loss: float
    dev_uar: float


@dataclass
class ClassifierRun:
    model: SERClassifier
    seed: int
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_uar: float = -1.0


def one_hot(labels: Sequence[int], classes: int) -> np.ndarray:
    out = np.zeros((len(labels), classes))
    out[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return out


def soft_cross_entropy(logits: TensorLike, targets: np.ndarray) -> Tensor:
    """``-mean_b sum_k targets[b, k] * log_softmax(logits)[b, k]``."""
    logits = as_tensor(logits)
    return ops.neg(ops.mean(ops.sum(ops.mul(ops.log_softmax(logits, axis=-1), np.asarray(targets)), axis=-1)))


def build_classifier(cfg: ClassifierConfig, seed: int) -> SERClassifier:
    return SERClassifier(cfg, sub_rng(seed, "classifier-init"))


def _stack(items: Sequence[MelSpectrogram], cfg: ClassifierConfig) -> np.ndarray:
    grids = np.stack([m.values for m in items])
    if grids.shape[1:] != (cfg.n_mels, cfg.frames):
        raise DataError(f"classifier expects {cfg.n_mels}x{cfg.frames} segments, got {grids.shape[1:]}")
    return grids


def posteriors(model: SERClassifier, grids: np.ndarray) -> np.ndarray:
    """Softmax outputs ``[N, classes]`` in evaluation mode."""
    model.eval()
    out = []
    with no_grad():
        for start in range(0, len(grids), EVAL_BATCH):
            out.append(ops.softmax(model(grids[start:start + EVAL_BATCH]), axis=-1).data.astype(np.float64))
    return np.concatenate(out) if out else np.zeros((0, model.cfg.classes))


def aggregate_posteriors(segment_posteriors: np.ndarray) -> EmotionLabel:
    """Mean posterior over segments; ties go to the lowest label index."""
    segment_posteriors = np.asarray(segment_posteriors, dtype=np.float64)
    if segment_posteriors.ndim != 2 or segment_posteriors.shape[0] == 0:
        raise DataError("an utterance needs at least one segment")
    return EmotionLabel(int(np.argmax(segment_posteriors.mean(axis=0))))


def predict_utterance(model: SERClassifier, segments: Sequence[MelSpectrogram]) -> EmotionLabel:
    if not segments:
        raise DataError("an utterance needs at least one segment")
    ordered = sorted(segments, key=lambda m: m.source_id)
    return aggregate_posteriors(posteriors(model, _stack(ordered, model.cfg)))


def group_utterances(items: Sequence[MelSpectrogram]) -> "OrderedDict[str, List[MelSpectrogram]]":
    groups: "OrderedDict[str, List[MelSpectrogram]]" = OrderedDict()
    for item in sorted(items, key=lambda m: (m.utterance_id, m.source_id)):
        groups.setdefault(item.utterance_id, []).append(item)
    return groups


def evaluate_utterances(model: SERClassifier, items: Sequence[MelSpectrogram]) -> ConfusionMatrix:
    """Utterance-level confusion matrix: segments are grouped by their parent recording."""
    if not items:
        raise DataError("cannot evaluate on an empty set")
    groups = group_utterances(items)
    flat = [m for members in groups.values() for m in members]
    probs = posteriors(model, _stack(flat, model.cfg))
    truth, predicted, offset = [], [], 0
    for members in groups.values():
        predicted.append(int(aggregate_posteriors(probs[offset:offset + len(members)])))
        truth.append(members[0].label)
        offset += len(members)
    return confusion(truth, predicted, model.cfg.classes)


def format_history_csv(history: Sequence[EpochRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for record in history:
        writer.writerow([record.epoch, f"{record.train_loss:.8f}", f"{record.dev_uar:.6f}"])
    return buffer.getvalue()


def train_classifier(
    train: Sequence[MelSpectrogram],
    dev: Sequence[MelSpectrogram],
    cfg: ClassifierConfig,
    seed: int = 0,
    *,
    mixup_alpha: Optional[float] = None,
    labels: Optional[Sequence[int]] = None,
    history_path: Optional[PathLike] = None,
) -> ClassifierRun:
    """Train for ``cfg.epochs`` epochs and restore the best-dev-UAR weights.

    ``labels`` overrides the items' own labels (label-permutation checks).
    """
    if not train:
        raise DataError("empty training split")
    if not dev:
        raise DataError("empty development split")
    model = build_classifier(cfg, seed)
    run = ClassifierRun(model=model, seed=seed)
    x_train = _stack(train, cfg)
    y_train = one_hot(list(labels) if labels is not None else [m.label for m in train], cfg.classes)
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    shuffle_rng = sub_rng(seed, "shuffle")
    mix_rng = sub_rng(seed, "mixup")
    dropout_rng = sub_rng(seed, "dropout")
    best_state: Dict[str, np.ndarray] = model.state_dict()

    logger.info(
        f"Training classifier on {len(train)} segments ({len(dev)} dev) for {cfg.epochs} epochs"
        + (f" with mixup alpha={mixup_alpha}" if mixup_alpha else "")
    )
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = shuffle_rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), cfg.batch):
            index = order[start:start + cfg.batch]
            x, y = x_train[index], y_train[index]
            if mixup_alpha:
                partner = mix_rng.permutation(len(index))
                lam = sample_lambda(mixup_alpha, mix_rng)
                x, y = mixup_batch(x, x[partner], y, y[partner], lam=lam)
            loss = soft_cross_entropy(model(x, dropout_rng), y)
            value = loss.item()
            if not np.isfinite(value):
                logger.error(f"Non-finite classifier loss in epoch {epoch}, batch starting at {start}")
                raise NonFiniteError("non-finite classifier loss", step=epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(value * len(index))

        train_loss = float(np.sum(losses) / len(order))
        dev_uar = uar(evaluate_utterances(model, dev), ignore_empty=True)
        run.history.append(EpochRecord(epoch, train_loss, dev_uar))
        if dev_uar > run.best_dev_uar:
            run.best_dev_uar, run.best_epoch = dev_uar, epoch
            best_state = model.state_dict()
        logger.info(f"epoch {epoch}/{cfg.epochs}: train_loss={train_loss:.4f} dev_uar={dev_uar:.4f}")

    model.load_state_dict(best_state)
    model.eval()
    if history_path is not None:
        atomic_write_text(history_path, format_history_csv(run.history))
    logger.info(f"Best dev UAR {run.best_dev_uar:.4f} at epoch {run.best_epoch}")
    return run


def save_classifier(directory: PathLike, run: ClassifierRun, extra: Optional[Dict[str, Any]] = None) -> Path:
    manifest = {
        "kind": CHECKPOINT_KIND,
        **run.model.manifest(),
        "seed": run.seed,
        "best_epoch": run.best_epoch,
        "best_dev_uar": run.best_dev_uar,
        **(extra or {}),
    }
    save_checkpoint(directory, run.model.state_dict(), manifest)
    return Path(directory)


def load_classifier(directory: PathLike) -> Tuple[SERClassifier, Dict[str, Any]]:
    tensors, manifest = load_checkpoint(directory)
    if manifest.get("kind") != CHECKPOINT_KIND:
        raise DataError(f"{directory} is not a classifier checkpoint (kind={manifest.get('kind')!r})")
    values = dict(manifest["classifier"])
    values["filters"] = tuple(values["filters"])
    values["kernels"] = tuple(values["kernels"])
    model = build_classifier(ClassifierConfig(**values), int(manifest.get("seed", 0)))
    model.load_state_dict(tensors)
    model.eval()
    return model, manifest
