"""Experiment result data models."""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .condition import EMOTIONS

logger = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((len(EMOTIONS), len(EMOTIONS)), dtype=np.int64))

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError(f"Confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("Confusion matrix counts must be non-negative")

    @classmethod
    def from_predictions(cls, truth: Sequence[int], predicted: Sequence[int], n_classes: int = len(EMOTIONS)) -> "ConfusionMatrix":
        if len(truth) != len(predicted):
            raise ValueError(f"{len(truth)} labels but {len(predicted)} predictions")
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(truth, dtype=np.int64), np.asarray(predicted, dtype=np.int64)), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def to_list(self) -> List[List[int]]:
        return self.counts.tolist()


@dataclass
class FoldResult:
    """One trained-and-evaluated classifier: a (fold, condition, seed) cell."""

    protocol: str
    condition: str
    fold: str
    seed: int
    uar: float
    recalls: Dict[str, float]
    confusion: ConfusionMatrix
    extra: Dict[str, Any] = field(default_factory=dict)

    def csv_row(self) -> Dict[str, str]:
        """Flat CSV row with percentages to two decimals."""
        row = {
            "protocol": self.protocol,
            "condition": self.condition,
            "fold": self.fold,
            "seed": str(self.seed),
            "uar": f"{100.0 * self.uar:.2f}",
        }
        for emotion in EMOTIONS:
            row[f"recall_{emotion}"] = f"{100.0 * self.recalls.get(emotion, 0.0):.2f}"
        return row

    def to_dict(self) -> Dict[str, Any]:
        return {
            "protocol": self.protocol,
            "condition": self.condition,
            "fold": self.fold,
            "seed": self.seed,
            "uar": self.uar,
            "recalls": dict(self.recalls),
            "confusion": self.confusion.to_list(),
            **self.extra,
        }


@dataclass
class ExperimentReport:
    """Aggregate of one protocol run under one training condition."""

    protocol: str
    condition: str
    folds: List[FoldResult] = field(default_factory=list)
    mad: Optional[Dict[str, float]] = None
    config: Dict[str, Any] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)
    corpus_hashes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.folds = sorted(self.folds, key=lambda r: (r.fold, r.seed))

    @property
    def uars(self) -> np.ndarray:
        return np.array([r.uar for r in self.folds], dtype=np.float64)

    @property
    def uar_mean(self) -> float:
        return float(self.uars.mean()) if self.folds else 0.0

    @property
    def uar_std(self) -> float:
        return float(self.uars.std()) if self.folds else 0.0

    @property
    def confusion(self) -> ConfusionMatrix:
        total = ConfusionMatrix()
        for result in self.folds:
            total = total + result.confusion
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "protocol": self.protocol,
            "condition": self.condition,
            "uar_mean": self.uar_mean,
            "uar_std": self.uar_std,
            "confusion": self.confusion.to_list(),
            "mad": self.mad,
            "seeds": sorted(self.seeds),
            "corpus_hashes": dict(self.corpus_hashes),
            "config": self.config,
            "folds": [r.to_dict() for r in self.folds],
        }

    def summary(self) -> str:
        return f"{self.protocol}/{self.condition}: UAR {100 * self.uar_mean:.2f}±{100 * self.uar_std:.2f} over {len(self.folds)} runs"
