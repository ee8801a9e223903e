"""Emotion labels and conditioning descriptions."""
import re
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Dict, Tuple

EMOTIONS: Tuple[str, ...] = ("angry", "happy", "neutral", "sad")

_TOKEN_PATTERN = re.compile(r"[a-z0-9']+")


class EmotionLabel(IntEnum):
    """Closed four-class label set; the order fixes confusion-matrix axes."""

    ANGRY = 0
    HAPPY = 1
    NEUTRAL = 2
    SAD = 3

    @classmethod
    def parse(cls, name: str) -> "EmotionLabel":
        key = str(name).strip().lower()
        if key not in EMOTIONS:
            raise ValueError(f"Unknown emotion {name!r}; expected one of {', '.join(EMOTIONS)}")
        return cls(EMOTIONS.index(key))

    @property
    def emotion(self) -> str:
        return EMOTIONS[int(self)]


def tokenize(text: str) -> Tuple[str, ...]:
    """Lower-cased word tokens of a manifest ``text`` field."""
    return tuple(_TOKEN_PATTERN.findall(text.lower()))


@dataclass(frozen=True)
class ConditionSpec:
    """What a sample should sound like: emotion, speaker and a word sequence."""

    emotion: str
    speaker: str
    tokens: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "emotion", EmotionLabel.parse(self.emotion).emotion)
        object.__setattr__(self, "speaker", str(self.speaker))
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_text(cls, emotion: str, speaker: str, text: str) -> "ConditionSpec":
        return cls(emotion=emotion, speaker=speaker, tokens=tokenize(text))

    @property
    def label(self) -> EmotionLabel:
        return EmotionLabel.parse(self.emotion)

    def to_dict(self) -> Dict[str, Any]:
        return {"emotion": self.emotion, "speaker": self.speaker, "tokens": list(self.tokens)}
