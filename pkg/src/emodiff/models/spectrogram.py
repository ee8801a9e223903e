"""Waveform and Mel-spectrogram data models."""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .condition import ConditionSpec, EmotionLabel

DEFAULT_SAMPLE_RATE = 22050
LOG_FLOOR = 1e-5


@dataclass
class Waveform:
    """Mono audio with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"Waveform must be mono (1-D), got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("Waveform contains non-finite samples")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / float(self.sample_rate)


@dataclass(frozen=True)
class NormalizationSpec:
    """Corpus-level log-mel range mapped affinely onto [-1, 1]."""

    log_min: float
    log_max: float

    def __post_init__(self):
        if not np.isfinite(self.log_min) or not np.isfinite(self.log_max):
            raise ValueError("Normalization bounds must be finite")
        if self.log_max <= self.log_min:
            raise ValueError(f"Degenerate normalization: min={self.log_min} max={self.log_max}")

    def normalize(self, log_energy: np.ndarray) -> np.ndarray:
        scaled = 2.0 * (np.asarray(log_energy) - self.log_min) / (self.log_max - self.log_min) - 1.0
        return np.clip(scaled, -1.0, 1.0)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values) + 1.0) * 0.5 * (self.log_max - self.log_min) + self.log_min

    def to_dict(self) -> Dict[str, float]:
        return {"log_min": float(self.log_min), "log_max": float(self.log_max)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NormalizationSpec":
        return cls(log_min=float(data["log_min"]), log_max=float(data["log_max"]))


@dataclass
class MelSpectrogram:
    """Normalized log-mel grid (mel bins x frames) with its labels."""

    values: np.ndarray
    emotion: str
    speaker: str
    source_id: str
    text: str = ""
    frame_hop: int = 256
    valid_frames: Optional[int] = None
    synthetic: bool = False
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"MelSpectrogram values must be 2-D, got shape {self.values.shape}")
        if self.values.size and (self.values.min() < -1.0 or self.values.max() > 1.0):
            raise ValueError("MelSpectrogram values must lie in [-1, 1]")
        self.emotion = EmotionLabel.parse(self.emotion).emotion
        self.speaker = str(self.speaker)
        if self.valid_frames is None:
            self.valid_frames = self.n_frames

    @property
    def n_mels(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[1])

    @property
    def label(self) -> int:
        return int(EmotionLabel.parse(self.emotion))

    @property
    def utterance_id(self) -> str:
        """Id of the recording this segment was cut from."""
        return str(self.metadata.get("parent_id", self.source_id))

    def condition(self) -> ConditionSpec:
        return ConditionSpec.from_text(self.emotion, self.speaker, self.text)

    def to_dict(self) -> Dict[str, Any]:
        """Labels and bookkeeping, without the grid itself."""
        return {
            "source_id": self.source_id,
            "emotion": self.emotion,
            "speaker": self.speaker,
            "text": self.text,
            "frame_hop": self.frame_hop,
            "valid_frames": self.valid_frames,
            "synthetic": self.synthetic,
            **self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], values: np.ndarray) -> "MelSpectrogram":
        known = {"source_id", "emotion", "speaker", "text", "frame_hop", "valid_frames", "synthetic"}
        return cls(
            values=values,
            emotion=data["emotion"],
            speaker=data["speaker"],
            source_id=data["source_id"],
            text=data.get("text", ""),
            frame_hop=int(data.get("frame_hop", 256)),
            valid_frames=int(data["valid_frames"]) if data.get("valid_frames") is not None else None,
            synthetic=bool(data.get("synthetic", False)),
            metadata={k: v for k, v in data.items() if k not in known},
        )
