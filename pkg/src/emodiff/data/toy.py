"""
Procedural emotion/speaker-structured spectrogram corpora.

Each emotion owns a band-energy envelope (a fundamental band plus fading
harmonics) and a temporal modulation rate; each speaker adds a fixed spectral
tilt. Utterances add seeded per-cell noise and are clipped to [-1, 1].
``distribution_shift`` moves the emotion parameters to emulate a second
corpus recorded under different conditions.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from ..errors import ConfigError
from ..models.condition import EMOTIONS
from ..models.spectrogram import MelSpectrogram
from ..utils.hashing import corpus_hash, sub_rng
from ..utils.jobs import run_jobs
from .manifest import ManifestEntry

logger = logging.getLogger(__name__)

BASE_LEVEL = -0.55
N_HARMONICS = 3
HARMONIC_DECAY = 0.6
CENTER_JITTER = 0.01
GAIN_JITTER = 0.05
TILT_RANGE = 0.15

# emotion -> (band center on the unit mel axis, band width, modulation cycles per segment, depth, gain)
EMOTION_PARAMETERS: Dict[str, Tuple[float, float, float, float, float]] = {
    "angry": (0.70, 0.07, 3.0, 0.35, 0.90),
    "happy": (0.50, 0.07, 2.0, 0.30, 0.80),
    "neutral": (0.30, 0.07, 0.5, 0.10, 0.65),
    "sad": (0.12, 0.06, 1.0, 0.25, 0.70),
}

# Per-unit-shift displacement of (center, rate factor, gain factor).
SHIFT_CENTER = 0.08
SHIFT_RATE = 1.0
SHIFT_GAIN = -0.2


@dataclass(frozen=True)
class EmotionPattern:
    center: float
    width: float
    rate: float
    depth: float
    gain: float


@dataclass
class ToyCorpusSpec:
    n_emotions: int = len(EMOTIONS)
    n_speakers: int = 4
    utterances_per_pair: int = 200
    n_mels: int = 16
    frames: int = 64
    seed: int = 0
    distribution_shift: float = 0.0
    noise: float = 0.1
    corpus_id: str = "toy"
    speaker_prefix: str = "spk"

    def validate(self) -> None:
        if self.n_emotions != len(EMOTIONS):
            raise ConfigError(f"toy corpora have exactly {len(EMOTIONS)} emotions, got {self.n_emotions}")
        for name in ("n_speakers", "utterances_per_pair", "n_mels", "frames"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_mels < 2:
            raise ConfigError("toy corpora need at least 2 mel bins")
        if not 0.0 <= self.distribution_shift <= 1.0:
            raise ConfigError(f"distribution_shift must lie in [0, 1], got {self.distribution_shift}")
        if self.noise < 0:
            raise ConfigError(f"noise must be non-negative, got {self.noise}")

    @property
    def speakers(self) -> List[str]:
        return [f"{self.speaker_prefix}{k}" for k in range(self.n_speakers)]

    def pattern_table(self) -> Dict[str, EmotionPattern]:
        """Class parameters after applying the distribution shift."""
        shift = self.distribution_shift
        table = {}
        for emotion, (center, width, rate, depth, gain) in EMOTION_PARAMETERS.items():
            table[emotion] = EmotionPattern(
                center=center + SHIFT_CENTER * shift,
                width=width,
                rate=rate * (1.0 + SHIFT_RATE * shift),
                depth=depth,
                gain=gain * (1.0 + SHIFT_GAIN * shift),
            )
        return table

    def speaker_tilts(self) -> Dict[str, float]:
        slopes = np.linspace(-TILT_RANGE, TILT_RANGE, self.n_speakers) if self.n_speakers > 1 else np.zeros(1)
        return {speaker: float(slope) for speaker, slope in zip(self.speakers, slopes)}


@dataclass
class ToyCorpus:
    spec: ToyCorpusSpec
    segments: List[MelSpectrogram] = field(default_factory=list)

    @property
    def manifest(self) -> List[ManifestEntry]:
        return [ManifestEntry(path=f"{m.source_id}.edtf", emotion=m.emotion, speaker=m.speaker, text=m.text) for m in self.segments]

    @property
    def content_hash(self) -> str:
        return corpus_hash(self.segments)

    def stats(self) -> Dict[str, Any]:
        return {
            "toy_spec": asdict(self.spec),
            "n_segments": len(self.segments),
            "corpus_hash": self.content_hash,
            "patterns": {e: asdict(p) for e, p in self.spec.pattern_table().items()},
        }


def toy_text(emotion: str, speaker: str, index: int) -> str:
    return f"speaker {speaker} says a {emotion} sentence number {index}"


def band_envelope(n_mels: int, pattern: EmotionPattern, center: float) -> np.ndarray:
    """Fundamental band at ``center`` plus harmonics at integer multiples."""
    axis = np.linspace(0.0, 1.0, n_mels)
    envelope = np.zeros(n_mels)
    for k in range(1, N_HARMONICS + 1):
        envelope += HARMONIC_DECAY ** (k - 1) * np.exp(-0.5 * ((axis - k * center) / pattern.width) ** 2)
    return envelope


def toy_utterance(spec: ToyCorpusSpec, emotion: str, speaker: str, index: int) -> MelSpectrogram:
    pattern = spec.pattern_table()[emotion]
    tilt = spec.speaker_tilts()[speaker]
    rng = sub_rng(spec.seed, "toy", emotion, speaker, index)

    center = pattern.center + rng.uniform(-CENTER_JITTER, CENTER_JITTER)
    gain = pattern.gain * (1.0 + rng.uniform(-GAIN_JITTER, GAIN_JITTER))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    time_axis = np.arange(spec.frames) / spec.frames
    modulation = 1.0 + pattern.depth * np.sin(2.0 * np.pi * pattern.rate * time_axis + phase)
    mel_axis = np.linspace(-0.5, 0.5, spec.n_mels)

    grid = BASE_LEVEL + gain * np.outer(band_envelope(spec.n_mels, pattern, center), modulation)
    grid = grid + (tilt * mel_axis)[:, None]
    grid = grid + spec.noise * rng.standard_normal((spec.n_mels, spec.frames))

    source_id = f"{spec.corpus_id}_{emotion}_{speaker}_{index:04d}"
    return MelSpectrogram(
        values=np.clip(grid, -1.0, 1.0),
        emotion=emotion,
        speaker=speaker,
        source_id=source_id,
        text=toy_text(emotion, speaker, index),
        metadata={"parent_id": source_id, "corpus_seed": spec.seed, "shift": spec.distribution_shift},
    )


def generate_toy_corpus(spec: ToyCorpusSpec, jobs: int = 1) -> ToyCorpus:
    """Deterministic corpus ordered by (emotion, speaker, index)."""
    spec.validate()
    keys = [
        (e, s, i)
        for e in range(len(EMOTIONS))
        for s in range(spec.n_speakers)
        for i in range(spec.utterances_per_pair)
    ]
    speakers = spec.speakers

    def job(e: int, s: int, i: int):
        return lambda: toy_utterance(spec, EMOTIONS[e], speakers[s], i)

    results = run_jobs([(key, job(*key)) for key in keys], max_workers=jobs)
    corpus = ToyCorpus(spec=spec, segments=[r.value for r in results])
    logger.info(
        f"Generated toy corpus: {len(corpus.segments)} segments of {spec.n_mels}x{spec.frames}, "
        f"shift={spec.distribution_shift}, seed={spec.seed}"
    )
    return corpus
