"""
CNN-BLSTM speech emotion classifier.

Three 1-D convolutions (batch norm, ReLU, dropout) feed a bidirectional
LSTM over frames; the final forward and backward states are concatenated
and mapped to four emotion logits.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.nn import BatchNorm1d, Conv1d, Linear, LSTMCell, Module
from ..autodiff.tensor import Tensor, TensorLike, as_tensor
from ..errors import ConfigError, DimensionMismatchError
from ..models.condition import EMOTIONS

logger = logging.getLogger(__name__)


@dataclass
class ClassifierConfig:
    n_mels: int = 80
    frames: int = 256
    filters: Tuple[int, ...] = (128, 128, 128)
    kernels: Tuple[int, ...] = (5, 3, 3)
    hidden: int = 128
    blstm_layers: int = 2
    dropout_conv: float = 0.1
    dropout_lstm: float = 0.2
    classes: int = len(EMOTIONS)
    lr: float = 1e-5
    epochs: int = 100
    batch: int = 64

    def validate(self) -> None:
        if self.classes != len(EMOTIONS):
            raise ConfigError(f"classifier must have {len(EMOTIONS)} classes, got {self.classes}")
        if len(self.filters) != len(self.kernels) or not self.filters:
            raise ConfigError("classifier filters and kernels must be non-empty and of equal length")
        if any(k % 2 == 0 for k in self.kernels):
            raise ConfigError(f"classifier kernels must be odd, got {self.kernels}")
        for name in ("dropout_conv", "dropout_lstm"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {rate}")
        if min(self.n_mels, self.frames, self.hidden, self.blstm_layers, self.epochs, self.batch, *self.filters) < 1:
            raise ConfigError("classifier sizes must be positive")


class BLSTMLayer(Module):
    def __init__(self, input_size: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.forward_cell = LSTMCell(input_size, hidden, rng)
        self.backward_cell = LSTMCell(input_size, hidden, rng)

    def __call__(self, steps: List[Tensor]) -> Tuple[List[Tensor], Tensor, Tensor]:
        """``steps`` is one ``[B, D]`` tensor per frame.

        Returns per-frame ``[B, 2H]`` outputs plus the last forward state and
        the last backward state (which belongs to frame 0).
        """
        batch = steps[0].shape[0]
        zeros = np.zeros((batch, self.hidden))
        h, c = zeros, zeros
        forward_states = []
        for x in steps:
            h, c = self.forward_cell(x, h, c)
            forward_states.append(h)
        h_forward = h
        h, c = zeros, zeros
        backward_states: List[Optional[Tensor]] = [None] * len(steps)
        for index in range(len(steps) - 1, -1, -1):
            h, c = self.backward_cell(steps[index], h, c)
            backward_states[index] = h
        outputs = [ops.concat([f, b], axis=1) for f, b in zip(forward_states, backward_states)]
        return outputs, h_forward, h


class SERClassifier(Module):
    def __init__(self, cfg: ClassifierConfig, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        self.convs = []
        self.norms = []
        channels = cfg.n_mels
        for width, kernel in zip(cfg.filters, cfg.kernels):
            self.convs.append(Conv1d(channels, width, kernel, rng))
            self.norms.append(BatchNorm1d(width))
            channels = width
        self.blstm = []
        for layer in range(cfg.blstm_layers):
            self.blstm.append(BLSTMLayer(channels if layer == 0 else 2 * cfg.hidden, cfg.hidden, rng))
        self.fc = Linear(2 * cfg.hidden, cfg.classes, rng)

    def forward(self, x: TensorLike, rng: Optional[np.random.Generator] = None) -> Tensor:
        """``x`` ``[B, n_mels, frames]`` -> logits ``[B, classes]``.

        ``rng`` drives dropout and is required in training mode.
        """
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[1] != self.cfg.n_mels:
            raise DimensionMismatchError(
                f"classifier input must be [B, {self.cfg.n_mels}, L], got {x.shape}", axis="n_mels"
            )
        h = x
        for conv, norm in zip(self.convs, self.norms):
            h = ops.dropout(ops.relu(norm(conv(h))), self.cfg.dropout_conv, rng, self.training)

        frames = ops.transpose(h, (2, 0, 1))  # [L, B, F]
        steps = [ops.getitem(frames, index) for index in range(frames.shape[0])]
        final = None
        for layer_index, layer in enumerate(self.blstm):
            if layer_index > 0:
                steps = [ops.dropout(s, self.cfg.dropout_lstm, rng, self.training) for s in steps]
            steps, h_forward, h_backward = layer(steps)
            final = ops.concat([h_forward, h_backward], axis=1)
        final = ops.dropout(final, self.cfg.dropout_lstm, rng, self.training)
        return self.fc(final)

    def __call__(self, x: TensorLike, rng: Optional[np.random.Generator] = None) -> Tensor:
        return self.forward(x, rng)

    def manifest(self) -> Dict[str, Any]:
        cfg = asdict(self.cfg)
        cfg["filters"] = list(self.cfg.filters)
        cfg["kernels"] = list(self.cfg.kernels)
        return {"classifier": cfg}


def classifier_forward(model: SERClassifier, segment: TensorLike) -> Tensor:
    """Logits for one ``[n_mels, frames]`` segment (``[classes]``) or a batch."""
    segment = as_tensor(segment)
    if segment.ndim == 2:
        return ops.reshape(model(ops.reshape(segment, (1,) + segment.shape)), (model.cfg.classes,))
    return model(segment)
