"""
Corpus splits at utterance level.

Segments cut from one recording always land on the same side. Random splits
are stratified by emotion and seeded through named sub-streams, so a split is
reproducible from (corpus hash, seed).
"""
import logging
import math
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

from ..errors import SplitError
from ..models.condition import EMOTIONS
from ..models.spectrogram import MelSpectrogram
from ..utils.hashing import sub_rng

logger = logging.getLogger(__name__)

Split = Tuple[List[MelSpectrogram], List[MelSpectrogram]]
_EPS = 1e-9


def speakers(corpus: Sequence[MelSpectrogram]) -> List[str]:
    return sorted({m.speaker for m in corpus})


def loso_split(corpus: Sequence[MelSpectrogram], speaker_held_out: str) -> Split:
    """All segments of one speaker form the test set; the rest train."""
    known = speakers(corpus)
    if len(known) < 2:
        raise SplitError(f"leave-one-speaker-out needs at least 2 speakers, got {len(known)}")
    if speaker_held_out not in known:
        raise SplitError(f"unknown speaker {speaker_held_out!r}; corpus has {', '.join(known)}")
    train = [m for m in corpus if m.speaker != speaker_held_out]
    test = [m for m in corpus if m.speaker == speaker_held_out]
    return train, test


def loso_folds(corpus: Sequence[MelSpectrogram]) -> List[Tuple[str, List[MelSpectrogram], List[MelSpectrogram]]]:
    return [(speaker, *loso_split(corpus, speaker)) for speaker in speakers(corpus)]


def _utterances_by_emotion(items: Sequence[MelSpectrogram]) -> Dict[str, "OrderedDict[str, List[MelSpectrogram]]"]:
    grouped: Dict[str, "OrderedDict[str, List[MelSpectrogram]]"] = {}
    for item in sorted(items, key=lambda m: (m.utterance_id, m.source_id)):
        grouped.setdefault(item.emotion, OrderedDict()).setdefault(item.utterance_id, []).append(item)
    return grouped


def _quotas(counts: Dict[str, int], fraction: float) -> Dict[str, int]:
    """Per-class counts summing to round(N * fraction), each within 1 of n_c * fraction."""
    total = sum(counts.values())
    target = int(math.floor(total * fraction + 0.5))
    quotas = {e: int(math.floor(n * fraction + _EPS)) for e, n in counts.items()}
    order = sorted(counts, key=lambda e: (-(counts[e] * fraction - quotas[e]), EMOTIONS.index(e)))
    remaining = target - sum(quotas.values())
    for emotion in order:
        if remaining <= 0:
            break
        if quotas[emotion] < counts[emotion]:
            quotas[emotion] += 1
            remaining -= 1
    return quotas


def stratified_split(
    items: Sequence[MelSpectrogram],
    fraction: float,
    seed: int,
    stream: str = "split",
    require_both_sides: bool = False,
) -> Split:
    """``(selected, rest)`` with ``fraction`` of each emotion's utterances selected."""
    if not 0.0 <= fraction <= 1.0:
        raise SplitError(f"split fraction must lie in [0, 1], got {fraction}")
    grouped = _utterances_by_emotion(items)
    quotas = _quotas({e: len(u) for e, u in grouped.items()}, fraction)
    selected: List[MelSpectrogram] = []
    rest: List[MelSpectrogram] = []
    for emotion in sorted(grouped, key=EMOTIONS.index):
        utterances = list(grouped[emotion].values())
        quota = quotas[emotion]
        if require_both_sides and (quota == 0 or quota == len(utterances)):
            raise SplitError(
                f"class {emotion!r} ({len(utterances)} utterances) ends up on one side of a "
                f"{fraction:.2f} split; try a different seed or fraction"
            )
        order = sub_rng(seed, stream, emotion).permutation(len(utterances))
        for rank, position in enumerate(order):
            (selected if rank < quota else rest).extend(utterances[position])
    logger.debug(f"{stream} split (seed {seed}): {len(selected)} selected / {len(rest)} rest segments")
    return selected, rest


def cross_corpus_split(target_corpus: Sequence[MelSpectrogram], dev_fraction: float = 0.30, seed: int = 0) -> Split:
    """Seeded ``(dev, test)`` split of a target corpus, stratified by emotion."""
    if not 0.0 < dev_fraction < 1.0:
        raise SplitError(f"dev_fraction must lie in (0, 1), got {dev_fraction}")
    return stratified_split(target_corpus, dev_fraction, seed, stream="cross-corpus", require_both_sides=True)


def adaptation_split(target_corpus: Sequence[MelSpectrogram], adaptation_fraction: float = 0.50, seed: int = 0) -> Split:
    """``(adaptation pool, test)``."""
    if not 0.0 < adaptation_fraction < 1.0:
        raise SplitError(f"adaptation_fraction must lie in (0, 1), got {adaptation_fraction}")
    return stratified_split(target_corpus, adaptation_fraction, seed, stream="adaptation", require_both_sides=True)


def take_percentage(pool: Sequence[MelSpectrogram], percentage: float, seed: int = 0) -> List[MelSpectrogram]:
    """Stratified ``percentage`` % of the pool's utterances (all of it at 100, none at 0)."""
    if not 0.0 <= percentage <= 100.0:
        raise SplitError(f"percentage must lie in [0, 100], got {percentage}")
    if percentage >= 100.0:
        return list(pool)
    if percentage <= 0.0:
        return []
    return stratified_split(pool, percentage / 100.0, seed, stream="adaptation-take")[0]


def development_split(train: Sequence[MelSpectrogram], dev_fraction: float, seed: int) -> Split:
    """Carve a development set out of real training data: ``(train, dev)``."""
    dev, rest = stratified_split(train, dev_fraction, seed, stream="development")
    if not dev or not rest:
        raise SplitError(f"cannot carve a {dev_fraction:.2f} development set from {len(train)} segments")
    return rest, dev
