"""
Experiment protocols: within-corpus leave-one-speaker-out, cross-corpus
transfer and the target-data adaptation sweep.

Every (fold, condition, seed) cell trains its own classifier and is run as an
independent job; reports are assembled from the key-sorted results, so the
output does not depend on the worker count.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..errors import ConfigError, DataError
from ..models.report import ExperimentReport, FoldResult
from ..models.spectrogram import MelSpectrogram
from ..networks.classifier import ClassifierConfig
from ..training.classifier_trainer import evaluate_utterances, train_classifier
from ..utils.hashing import corpus_hash, derive_seed, sub_rng
from ..utils.jobs import JobProgress, run_jobs
from .metrics import recalls, uar
from .splits import adaptation_split, cross_corpus_split, development_split, loso_split, speakers, take_percentage

logger = logging.getLogger(__name__)

REAL = "real"
SYN = "syn"
REAL_SYN = "real+syn"
REAL_SYN_MIXUP = "real+syn+mixup"
CONDITIONS = (REAL, SYN, REAL_SYN, REAL_SYN_MIXUP)


@dataclass
class ProtocolSettings:
    classifier: ClassifierConfig
    seeds: Sequence[int] = (0, 1, 2)
    conditions: Sequence[str] = CONDITIONS
    augment_ratio: float = 1.0
    mixup_alpha: float = 0.2
    train_dev_fraction: float = 0.20
    dev_fraction: float = 0.30
    adaptation_fraction: float = 0.50
    jobs: int = 1
    config_snapshot: Dict[str, Any] = field(default_factory=dict)
    history_dir: Optional[Path] = None
    progress_callback: Optional[Callable[[JobProgress], None]] = None

    def __post_init__(self):
        unknown = [c for c in self.conditions if c not in CONDITIONS]
        if unknown:
            raise ConfigError(f"Unknown conditions {unknown}; expected {', '.join(CONDITIONS)}")
        if self.augment_ratio < 0:
            raise ConfigError(f"augment_ratio must be non-negative, got {self.augment_ratio}")


def select_synthetic(
    pool: Sequence[MelSpectrogram],
    count: int,
    rng_seed: int,
    allowed_speakers: Optional[Sequence[str]] = None,
) -> List[MelSpectrogram]:
    """Up to ``count`` synthetic segments, restricted to ``allowed_speakers``."""
    allowed = set(allowed_speakers) if allowed_speakers is not None else None
    candidates = sorted(
        (m for m in pool if allowed is None or m.speaker in allowed),
        key=lambda m: m.source_id,
    )
    if count > len(candidates):
        logger.warning(f"Requested {count} synthetic segments, only {len(candidates)} available")
        count = len(candidates)
    order = sub_rng(rng_seed, "synthetic").permutation(len(candidates))[:count]
    return [candidates[i] for i in sorted(order)]


def condition_training_set(
    condition: str,
    real_train: Sequence[MelSpectrogram],
    synthetic: Sequence[MelSpectrogram],
    settings: ProtocolSettings,
) -> Tuple[List[MelSpectrogram], Optional[float]]:
    """Training items and the mixup alpha (or None) for one condition."""
    if condition == REAL:
        return list(real_train), None
    if not synthetic:
        raise DataError(f"condition {condition!r} needs synthetic segments, none were supplied")
    if condition == SYN:
        return list(synthetic), None
    if condition == REAL_SYN:
        return list(real_train) + list(synthetic), None
    return list(real_train) + list(synthetic), settings.mixup_alpha


def run_cell(
    protocol: str,
    condition: str,
    fold: str,
    seed: int,
    real_train: Sequence[MelSpectrogram],
    dev: Sequence[MelSpectrogram],
    test: Sequence[MelSpectrogram],
    synthetic_pool: Sequence[MelSpectrogram],
    settings: ProtocolSettings,
    allowed_speakers: Optional[Sequence[str]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> FoldResult:
    """Train one classifier for a (fold, condition, seed) cell and score it on ``test``."""
    synthetic: List[MelSpectrogram] = []
    if condition != REAL:
        count = int(round(settings.augment_ratio * len(real_train)))
        synthetic = select_synthetic(synthetic_pool, count, derive_seed(seed, protocol, fold), allowed_speakers)
    items, alpha = condition_training_set(condition, real_train, synthetic, settings)
    history_path = None
    if settings.history_dir is not None:
        safe_condition = condition.replace("+", "_")
        history_path = Path(settings.history_dir) / f"{protocol}_{safe_condition}_{fold}_{seed}.csv"
    run = train_classifier(
        items,
        dev,
        settings.classifier,
        seed=derive_seed(seed, "classifier", protocol, fold),
        mixup_alpha=alpha,
        history_path=history_path,
    )
    cm = evaluate_utterances(run.model, test)
    per_class = recalls(cm, ignore_empty=True)
    if len(per_class) < cm.n_classes:
        logger.warning(f"{protocol}/{condition}/{fold}/seed {seed}: test set lacks some classes; UAR over {len(per_class)}")
    result = FoldResult(
        protocol=protocol,
        condition=condition,
        fold=fold,
        seed=seed,
        uar=uar(cm, ignore_empty=True),
        recalls=per_class,
        confusion=cm,
        extra={
            "n_real": len(real_train),
            "n_synthetic": len(synthetic),
            "best_epoch": run.best_epoch,
            "best_dev_uar": run.best_dev_uar,
            **(extra or {}),
        },
    )
    logger.info(f"{protocol}/{condition}/{fold}/seed {seed}: UAR {100 * result.uar:.2f}")
    return result


def _assemble(
    protocol: str,
    results: Sequence[FoldResult],
    settings: ProtocolSettings,
    hashes: Dict[str, str],
    group_key: Callable[[FoldResult], Tuple[Any, str]],
) -> List[ExperimentReport]:
    groups: Dict[Tuple[Any, str], List[FoldResult]] = {}
    for result in results:
        groups.setdefault(group_key(result), []).append(result)
    reports = []
    for key in sorted(groups, key=lambda k: (k[0], CONDITIONS.index(k[1]))):
        reports.append(
            ExperimentReport(
                protocol=protocol,
                condition=key[1],
                folds=groups[key],
                config=dict(settings.config_snapshot),
                seeds=sorted(settings.seeds),
                corpus_hashes=dict(hashes),
            )
        )
    for report in reports:
        logger.info(report.summary())
    return reports


def _execute(jobs: List[Tuple[Any, Callable[[], FoldResult]]], settings: ProtocolSettings) -> List[FoldResult]:
    return [r.value for r in run_jobs(jobs, max_workers=settings.jobs, progress_callback=settings.progress_callback)]


def run_loso(
    corpus: Sequence[MelSpectrogram],
    synthetic_pool: Sequence[MelSpectrogram],
    settings: ProtocolSettings,
) -> List[ExperimentReport]:
    """Leave-one-speaker-out over every condition and seed; one report per condition.

    Synthetic segments conditioned on the held-out speaker never enter that fold.
    """
    speaker_list = speakers(corpus)
    if len(speaker_list) < 2:
        raise DataError(f"leave-one-speaker-out needs at least 2 speakers, got {len(speaker_list)}")

    def cell(condition: str, speaker: str, seed: int) -> Callable[[], FoldResult]:
        def run() -> FoldResult:
            train_all, test = loso_split(corpus, speaker)
            real_train, dev = development_split(train_all, settings.train_dev_fraction, derive_seed(seed, "loso", speaker))
            return run_cell(
                "loso", condition, speaker, seed, real_train, dev, test, synthetic_pool, settings,
                allowed_speakers=speakers(train_all),
            )
        return run

    jobs = [
        ((CONDITIONS.index(c), speaker, seed), cell(c, speaker, seed))
        for c in settings.conditions
        for speaker in speaker_list
        for seed in settings.seeds
    ]
    hashes = {"corpus": corpus_hash(corpus), "synthetic": corpus_hash(synthetic_pool)}
    return _assemble("loso", _execute(jobs, settings), settings, hashes, lambda r: (0, r.condition))


def run_cross_corpus(
    source: Sequence[MelSpectrogram],
    target: Sequence[MelSpectrogram],
    synthetic_pool: Sequence[MelSpectrogram],
    settings: ProtocolSettings,
) -> List[ExperimentReport]:
    """Train on the source corpus, select on a target dev split, test on the rest of the target."""
    if not source:
        raise DataError("cross-corpus evaluation needs a non-empty source corpus")

    def cell(condition: str, seed: int) -> Callable[[], FoldResult]:
        def run() -> FoldResult:
            dev, test = cross_corpus_split(target, settings.dev_fraction, seed)
            return run_cell("cross-corpus", condition, "target", seed, source, dev, test, synthetic_pool, settings)
        return run

    jobs = [((CONDITIONS.index(c), seed), cell(c, seed)) for c in settings.conditions for seed in settings.seeds]
    hashes = {"source": corpus_hash(source), "target": corpus_hash(target), "synthetic": corpus_hash(synthetic_pool)}
    return _assemble("cross-corpus", _execute(jobs, settings), settings, hashes, lambda r: (0, r.condition))


def adaptation_sweep(
    source_train: Sequence[MelSpectrogram],
    target_corpus: Sequence[MelSpectrogram],
    percentages: Sequence[float],
    conditions: Sequence[str],
    seeds: Sequence[int],
    settings: ProtocolSettings,
    synthetic_pool: Sequence[MelSpectrogram] = (),
) -> List[ExperimentReport]:
    """Add p% of a target adaptation pool to the training data for every p.

    The target corpus is split once per seed into an adaptation pool and a
    fixed test half. One report per (percentage, condition).
    """
    if any(not 0.0 <= p <= 100.0 for p in percentages):
        raise ConfigError(f"percentages must lie in [0, 100], got {list(percentages)}")
    if not source_train and any(p == 0.0 for p in percentages):
        raise DataError("percentage 0 with an empty source corpus leaves nothing to train on")
    settings = replace(settings, conditions=tuple(conditions), seeds=tuple(seeds))

    def cell(condition: str, percentage: float, seed: int) -> Callable[[], FoldResult]:
        def run() -> FoldResult:
            pool, test = adaptation_split(target_corpus, settings.adaptation_fraction, seed)
            adapt = take_percentage(pool, percentage, seed)
            real = list(source_train) + adapt
            real_train, dev = development_split(real, settings.train_dev_fraction, derive_seed(seed, "sweep", percentage))
            return run_cell(
                "adaptation", condition, f"p{percentage:g}", seed, real_train, dev, test, synthetic_pool, settings,
                extra={"percentage": percentage, "n_adaptation": len(adapt)},
            )
        return run

    jobs = [
        ((float(p), CONDITIONS.index(c), seed), cell(c, float(p), seed))
        for p in percentages
        for c in conditions
        for seed in seeds
    ]
    hashes = {
        "source": corpus_hash(source_train),
        "target": corpus_hash(target_corpus),
        "synthetic": corpus_hash(synthetic_pool),
    }
    return _assemble(
        "adaptation", _execute(jobs, settings), settings, hashes, lambda r: (r.extra["percentage"], r.condition)
    )
