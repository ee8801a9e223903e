"""
Run configuration.

A RunConfig is a tree of dataclasses, one per module. Values resolve in the
order preset -> ``key=value`` config file -> command-line ``--set`` overrides.
Keys are dotted (``denoiser.res_filters=64``); unknown keys are rejected.
"""
import logging
import os
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import ConfigError
from .networks.classifier import ClassifierConfig
from .networks.denoiser import DenoiserConfig
from .utils.files import PathLike

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING").upper()
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
PRECISION = os.getenv("EMODIFF_PRECISION", "f32").lower()

CONDITIONS = ("real", "syn", "real+syn", "real+syn+mixup")


@dataclass
class AudioConfig:
    sample_rate: int = 22050
    n_fft: int = 1024
    hop: int = 256
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    segment_frames: int = 256
    griffin_lim_iters: int = 60


@dataclass
class DiffusionConfig:
    schedule: str = "cosine"
    steps: int = 4000
    sample_steps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    variance_mode: str = "learned_range"
    loss: str = "hybrid"
    vlb_weight: float = 0.001


@dataclass
class TrainConfig:
    """Diffusion training loop."""

    steps: int = 120000
    batch: int = 64
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    checkpoint_interval: int = 10000
    log_interval: int = 100


@dataclass
class ExperimentConfig:
    seeds: Tuple[int, ...] = (0, 1, 2)
    conditions: Tuple[str, ...] = CONDITIONS
    augment_ratio: float = 1.0
    mixup_alpha: float = 0.2
    dev_fraction: float = 0.30
    train_dev_fraction: float = 0.20
    adaptation_fraction: float = 0.50
    percentages: Tuple[float, ...] = (0.0, 25.0, 50.0, 75.0, 100.0)
    sweep_conditions: Tuple[str, ...] = ("real", "real+syn")
    sample_batch: int = 16


@dataclass
class ToyConfig:
    n_speakers: int = 4
    utterances_per_pair: int = 200
    n_mels: int = 16
    frames: int = 64
    seed: int = 0
    distribution_shift: float = 0.0
    noise: float = 0.1
    corpus_id: str = "toy"
    speaker_prefix: str = "spk"


@dataclass
class RuntimeConfig:
    precision: str = PRECISION
    jobs: int = 0


@dataclass
class RunConfig:
    audio: AudioConfig = field(default_factory=AudioConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    toy: ToyConfig = field(default_factory=ToyConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    # -- construction ------------------------------------------------------

    @classmethod
    def preset(cls, name: str) -> "RunConfig":
        if name not in PRESETS:
            raise ConfigError(f"Unknown preset {name!r}; expected one of {', '.join(sorted(PRESETS))}")
        return cls().with_overrides(PRESETS[name])

    @classmethod
    def resolve(
        cls,
        preset: str = "full",
        config_path: Optional[PathLike] = None,
        overrides: Iterable[str] = (),
    ) -> "RunConfig":
        config = cls.preset(preset)
        if config_path is not None:
            config = config.with_overrides(read_config_file(config_path))
        config = config.with_overrides(parse_assignments(overrides, source="--set"))
        config.validate()
        return config

    def with_overrides(self, values: Mapping[str, Any]) -> "RunConfig":
        """Copy with dotted-key overrides applied; string values are coerced."""
        sections = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, raw in values.items():
            section_name, _, attr = key.partition(".")
            if section_name not in sections or not attr:
                raise ConfigError(f"Unknown configuration key {key!r}")
            section = sections[section_name]
            hints = typing.get_type_hints(type(section))
            if attr not in {f.name for f in fields(section)}:
                raise ConfigError(f"Unknown configuration key {key!r}")
            sections[section_name] = replace(section, **{attr: coerce(raw, hints[attr], key)})
        return replace(self, **sections)

    # -- checks and snapshots ---------------------------------------------

    def validate(self) -> None:
        if self.audio.n_mels != self.denoiser.in_channels:
            raise ConfigError(
                f"audio.n_mels={self.audio.n_mels} but denoiser.in_channels={self.denoiser.in_channels}"
            )
        if self.audio.n_mels != self.classifier.n_mels:
            raise ConfigError(f"audio.n_mels={self.audio.n_mels} but classifier.n_mels={self.classifier.n_mels}")
        if self.audio.segment_frames != self.classifier.frames:
            raise ConfigError(
                f"audio.segment_frames={self.audio.segment_frames} but classifier.frames={self.classifier.frames}"
            )
        if self.diffusion.schedule not in ("cosine", "linear"):
            raise ConfigError(f"diffusion.schedule must be cosine or linear, got {self.diffusion.schedule!r}")
        if self.diffusion.variance_mode not in ("learned_range", "fixed_small", "fixed_large"):
            raise ConfigError(f"Unknown diffusion.variance_mode {self.diffusion.variance_mode!r}")
        if self.diffusion.loss not in ("hybrid", "simple"):
            raise ConfigError(f"Unknown diffusion.loss {self.diffusion.loss!r}")
        if not 1 <= self.diffusion.sample_steps <= self.diffusion.steps:
            raise ConfigError(
                f"diffusion.sample_steps must lie in [1, {self.diffusion.steps}], got {self.diffusion.sample_steps}"
            )
        unknown = [c for c in self.experiment.conditions + self.experiment.sweep_conditions if c not in CONDITIONS]
        if unknown:
            raise ConfigError(f"Unknown experiment conditions {unknown}; expected {', '.join(CONDITIONS)}")
        for name in ("dev_fraction", "train_dev_fraction", "adaptation_fraction"):
            value = getattr(self.experiment, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"experiment.{name} must lie in (0, 1), got {value}")
        if any(not 0.0 <= p <= 100.0 for p in self.experiment.percentages):
            raise ConfigError(f"experiment.percentages must lie in [0, 100], got {self.experiment.percentages}")
        if self.runtime.precision not in ("f32", "f64"):
            raise ConfigError(f"runtime.precision must be f32 or f64, got {self.runtime.precision!r}")
        self.denoiser.validate()
        self.classifier.validate()

    def to_flat_dict(self) -> Dict[str, Any]:
        """``{"section.key": value}`` snapshot, sorted, tuples as lists."""
        flat = {}
        for section in fields(self):
            values = getattr(self, section.name)
            for f in fields(values):
                value = getattr(values, f.name)
                flat[f"{section.name}.{f.name}"] = list(value) if isinstance(value, tuple) else value
        return dict(sorted(flat.items()))


def coerce(raw: Any, hint: Any, key: str = "") -> Any:
    """Convert ``raw`` (usually a string) to the field type ``hint``."""
    if not isinstance(raw, str):
        if typing.get_origin(hint) is tuple and isinstance(raw, (list, tuple)):
            return tuple(coerce(item, typing.get_args(hint)[0], key) for item in raw)
        return raw
    text = raw.strip()
    try:
        if hint is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint is str:
            return text
        if typing.get_origin(hint) is tuple:
            item_type = typing.get_args(hint)[0]
            parts = [p for p in (part.strip() for part in text.strip("()[]").split(",")) if p]
            return tuple(coerce(part, item_type, key) for part in parts)
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {e}") from e
    raise ConfigError(f"Unsupported type {hint} for {key}")


def parse_assignments(lines: Iterable[str], source: str = "config") -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are ignored."""
    values: Dict[str, str] = {}
    for number, line in enumerate(lines, start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}:{number}: expected key=value, got {line.strip()!r}")
        key, value = content.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def read_config_file(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return parse_assignments(path.read_text(encoding="utf-8").splitlines(), source=str(path))


def format_config(config: RunConfig) -> str:
    """Render a RunConfig back into the ``key=value`` file format."""
    lines: List[str] = []
    for key, value in config.to_flat_dict().items():
        rendered = ",".join(str(v) for v in value) if isinstance(value, list) else str(value)
        lines.append(f"{key}={rendered}")
    return "\n".join(lines) + "\n"


PRESETS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "toy": {
        "audio.n_mels": 16,
        "audio.segment_frames": 64,
        "denoiser.in_channels": 16,
        "denoiser.res_filters": 64,
        "denoiser.cond_dim": 32,
        "denoiser.time_dim": 32,
        "denoiser.token_dim": 32,
        "denoiser.vocab_buckets": 512,
        "denoiser.speaker_buckets": 16,
        "diffusion.steps": 200,
        "diffusion.sample_steps": 100,
        "train.steps": 2000,
        "train.batch": 32,
        "train.lr": 2e-4,
        "train.checkpoint_interval": 500,
        "train.log_interval": 50,
        "classifier.n_mels": 16,
        "classifier.frames": 64,
        "classifier.filters": (32, 32, 32),
        "classifier.hidden": 32,
        "classifier.blstm_layers": 1,
        "classifier.lr": 1e-3,
        "classifier.epochs": 20,
        "classifier.batch": 64,
    },
}
