"""
Parameter containers for the networks.

Modules hold Parameters and child modules as attributes; ``named_parameters``
walks them in attribute definition order, so parameter order (and therefore
optimizer updates and checkpoints) is deterministic.
"""
import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..errors import DimensionMismatchError
from . import ops
from .tensor import Tensor, get_dtype


class Parameter(Tensor):
    """Trainable leaf tensor with adaptive-moment optimizer state."""

    __slots__ = ("name", "m", "v", "step")

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def assign(self, value: np.ndarray) -> None:
        """Replace the value; the shape never changes."""
        value = np.array(value, dtype=get_dtype())
        if value.shape != self.shape:
            raise DimensionMismatchError(f"cannot assign {value.shape} to parameter {self.name} {self.shape}")
        value.flags.writeable = False
        self.data = value

    def reset_state(self) -> None:
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape})"


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base class for anything that owns parameters."""

    training = True

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{name}.{i}", item

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            children = value if isinstance(value, (list, tuple)) else [value]
            for child in children:
                if isinstance(child, Module):
                    yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        for name, module in self._named_modules():
            state.update({f"{name}{k}": v for k, v in module.buffers().items()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        for name, param in params.items():
            if name not in state:
                raise KeyError(f"missing parameter {name} in state")
            param.assign(state[name])
        for name, module in self._named_modules():
            module.load_buffers({k[len(name):]: v for k, v in state.items() if k.startswith(name)})

    def buffers(self) -> Dict[str, np.ndarray]:
        """Non-trainable state such as running statistics."""
        return {}

    def load_buffers(self, state: Dict[str, np.ndarray]) -> None:
        pass

    def _named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for attr, value in vars(self).items():
            if isinstance(value, Module):
                yield from value._named_modules(f"{prefix}{attr}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item._named_modules(f"{prefix}{attr}.{i}.")


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, zero: bool = False):
        shape = (in_features, out_features)
        init = np.zeros(shape) if zero else uniform_init(rng, shape, in_features)
        self.weight = Parameter(init, "weight")
        self.bias = Parameter(np.zeros(out_features) if zero else uniform_init(rng, (out_features,), in_features), "bias")

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class Conv1d(Module):
    """Length-preserving 1-D convolution."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator, zero: bool = False):
        if kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {kernel_size}")
        fan_in = in_channels * kernel_size
        shape = (out_channels, in_channels, kernel_size)
        self.weight = Parameter(np.zeros(shape) if zero else uniform_init(rng, shape, fan_in), "weight")
        self.bias = Parameter(np.zeros(out_channels) if zero else uniform_init(rng, (out_channels,), fan_in), "bias")
        self.padding = (kernel_size - 1) // 2

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias, padding=self.padding)


class SelfAttention(Module):
    def __init__(self, channels: int, rng: np.random.Generator):
        self.proj_q = Parameter(uniform_init(rng, (channels, channels), channels))
        self.proj_k = Parameter(uniform_init(rng, (channels, channels), channels))
        self.proj_v = Parameter(uniform_init(rng, (channels, channels), channels))
        self.proj_out = Parameter(uniform_init(rng, (channels, channels), channels))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.self_attention(x, self.proj_q, self.proj_k, self.proj_v, self.proj_out)


class Embedding(Module):
    def __init__(self, rows: int, dim: int, rng: np.random.Generator):
        self.table = Parameter(rng.normal(0.0, 1.0, size=(rows, dim)), "table")

    def __call__(self, index) -> Tensor:
        return ops.getitem(self.table, np.asarray(index, dtype=np.int64))


class LSTMCell(Module):
    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.hidden_size = hidden_size
        self.w_x = Parameter(uniform_init(rng, (input_size, 4 * hidden_size), hidden_size))
        self.w_h = Parameter(uniform_init(rng, (hidden_size, 4 * hidden_size), hidden_size))
        self.bias = Parameter(uniform_init(rng, (4 * hidden_size,), hidden_size))

    @property
    def weights(self) -> ops.LSTMWeights:
        return ops.LSTMWeights(self.w_x, self.w_h, self.bias)

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> Tuple[Tensor, Tensor]:
        return ops.lstm_cell(x, h, c, self.weights)


class BatchNorm1d(Module):
    """Per-channel normalization of ``[B, C, L]`` activations."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(channels), "gamma")
        self.beta = Parameter(np.zeros(channels), "beta")
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def __call__(self, x: Tensor) -> Tensor:
        gamma = ops.reshape(self.gamma, (1, -1, 1))
        beta = ops.reshape(self.beta, (1, -1, 1))
        if self.training:
            mu = ops.mean(x, axis=(0, 2), keepdims=True)
            centered = ops.sub(x, mu)
            var = ops.mean(ops.square(centered), axis=(0, 2), keepdims=True)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu.data.reshape(-1)
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var.data.reshape(-1)
            normalized = ops.mul(centered, ops.power(ops.add(var, self.eps), -0.5))
        else:
            mu = self.running_mean.reshape(1, -1, 1)
            scale = 1.0 / np.sqrt(self.running_var.reshape(1, -1, 1) + self.eps)
            normalized = ops.mul(ops.sub(x, mu), scale)
        return ops.add(ops.mul(normalized, gamma), beta)

    def buffers(self) -> Dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_buffers(self, state: Dict[str, np.ndarray]) -> None:
        if "running_mean" in state:
            self.running_mean = np.array(state["running_mean"], dtype=np.float64)
            self.running_var = np.array(state["running_var"], dtype=np.float64)
