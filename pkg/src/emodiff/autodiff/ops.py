"""
Differentiable primitives.

Each primitive computes its forward value with numpy and registers a gradient
rule mapping the upstream gradient to one gradient per parent. Composite
layers (self-attention, LSTM cell) are built from these primitives so they
inherit exact gradients.
"""
import math
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionMismatchError
from .tensor import Tensor, TensorLike, as_tensor

Axis = Union[None, int, Tuple[int, ...]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# -- elementwise arithmetic --------------------------------------------------

def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), rule, "add")


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), rule, "sub")


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def rule(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), rule, "mul")


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def rule(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return Tensor.from_op(a.data / b.data, (a, b), rule, "div")


def neg(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,), "neg")


def power(a: TensorLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)

    def rule(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return Tensor.from_op(a.data ** exponent, (a,), rule, "power")


def square(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out,), "exp")


def log(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def clip(a: TensorLike, low: Optional[float] = None, high: Optional[float] = None) -> Tensor:
    a = as_tensor(a)
    out = np.clip(a.data, low, high)
    inside = np.ones(a.shape, dtype=bool)
    if low is not None:
        inside &= a.data >= low
    if high is not None:
        inside &= a.data <= high
    return Tensor.from_op(out, (a,), lambda g: (g * inside,), "clip")


def where(condition: np.ndarray, a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    condition = np.asarray(condition, dtype=bool)

    def rule(g):
        return (
            _unbroadcast(np.where(condition, g, 0.0), a.shape),
            _unbroadcast(np.where(condition, 0.0, g), b.shape),
        )

    return Tensor.from_op(np.where(condition, a.data, b.data), (a, b), rule, "where")


# -- activations ---------------------------------------------------------------

def _logistic(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = _logistic(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor.from_op(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def silu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    s = _logistic(a.data)

    def rule(g):
        return (g * (s + a.data * s * (1.0 - s)),)

    return Tensor.from_op(a.data * s, (a,), rule, "silu")


def softmax(a: TensorLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (a,), rule, "softmax")


def log_softmax(a: TensorLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def rule(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return Tensor.from_op(out, (a,), rule, "log_softmax")


# -- reductions and shape manipulation -------------------------------------------

def sum(a: TensorLike, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)

    def rule(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return Tensor.from_op(a.data.sum(axis=axes, keepdims=keepdims), (a,), rule, "sum")


def mean(a: TensorLike, axis: Axis = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1

    def rule(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, a.shape),)

    return Tensor.from_op(a.data.mean(axis=axes, keepdims=keepdims), (a,), rule, "mean")


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    return Tensor.from_op(a.data.reshape(tuple(shape)), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: TensorLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def swap_last(a: TensorLike) -> Tensor:
    """Transpose the two trailing axes."""
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def broadcast_to(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    out = np.broadcast_to(a.data, shape)
    return Tensor.from_op(out, (a,), lambda g: (_unbroadcast(g, a.shape),), "broadcast_to")


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (slice, int, type(Ellipsis), type(None))) for p in parts)


def getitem(a: TensorLike, index) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic_index(index)

    def rule(g):
        grad = np.zeros(a.shape, dtype=g.dtype)
        if basic:
            grad[index] += g
        else:
            np.add.at(grad, index, g)
        return (grad,)

    return Tensor.from_op(a.data[index], (a,), rule, "getitem")


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.from_op(np.concatenate([p.data for p in parts], axis=axis), parts, rule, "concat")


def stack(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def rule(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return Tensor.from_op(np.stack([p.data for p in parts], axis=axis), parts, rule, "stack")


# -- linear algebra ------------------------------------------------------------

def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionMismatchError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}", axis="ndim")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionMismatchError(f"matmul inner sizes differ: {a.shape} @ {b.shape}", axis="inner")

    def rule(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor.from_op(a.data @ b.data, (a, b), rule, "matmul")


def linear(x: TensorLike, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight + bias`` over the trailing axis."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def conv1d(x: TensorLike, kernels: TensorLike, bias: Optional[TensorLike] = None, padding: int = 0) -> Tensor:
    """Cross-correlation along the last axis.

    ``x`` is ``[C_in, L]`` or ``[B, C_in, L]``; ``kernels`` is ``[C_out, C_in, K]``.
    With ``padding = (K - 1) // 2`` the output length equals ``L``.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    bias = as_tensor(bias) if bias is not None else None
    unbatched = x.ndim == 2
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 3:
        raise DimensionMismatchError(f"conv1d input must be 2-D or 3-D, got {x.shape}", axis="ndim")
    if kernels.ndim != 3:
        raise DimensionMismatchError(f"conv1d kernels must be 3-D, got {kernels.shape}", axis="ndim")
    c_out, c_in, width = kernels.shape
    if x.shape[1] != c_in:
        raise DimensionMismatchError(
            f"conv1d input has {x.shape[1]} channels, kernels expect {c_in}", axis="C_in"
        )
    if width % 2 == 0:
        raise DimensionMismatchError(f"conv1d kernel size must be odd, got {width}", axis="K")
    if bias is not None and bias.shape != (c_out,):
        raise DimensionMismatchError(f"conv1d bias shape {bias.shape} != ({c_out},)", axis="C_out")
    if padding < 0:
        raise ValueError(f"padding must be non-negative, got {padding}")

    batch, _, length = x.shape
    out_length = length + 2 * padding - width + 1
    if out_length < 1:
        raise DimensionMismatchError(f"conv1d input length {length} shorter than kernel {width}", axis="L")

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    windows = sliding_window_view(padded, width, axis=2)
    cols = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(batch, out_length, c_in * width)
    flat_kernels = kernels.data.reshape(c_out, c_in * width)
    out = (cols @ flat_kernels.T).transpose(0, 2, 1)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def rule(g):
        g_t = g.transpose(0, 2, 1)
        g_kernels = np.tensordot(g_t, cols, axes=([0, 1], [0, 1])).reshape(kernels.shape)
        g_cols = (g_t @ flat_kernels).reshape(batch, out_length, c_in, width)
        g_padded = np.zeros_like(padded)
        for k in range(width):
            g_padded[:, :, k:k + out_length] += g_cols[:, :, :, k].transpose(0, 2, 1)
        grads = [g_padded[:, :, padding:padding + length], g_kernels]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    parents = (x, kernels) + ((bias,) if bias is not None else ())
    result = Tensor.from_op(np.ascontiguousarray(out), parents, rule, "conv1d")
    if unbatched:
        result = reshape(result, result.shape[1:])
    return result


# -- composite layers ------------------------------------------------------------

def self_attention(x: TensorLike, proj_q: Tensor, proj_k: Tensor, proj_v: Tensor, proj_out: Tensor) -> Tensor:
    """Single-head scaled dot-product attention over the length axis, plus residual.

    ``x`` is ``[C, L]`` or ``[B, C, L]``; every projection is ``[C, C]``.
    """
    x = as_tensor(x)
    channels = x.shape[-2]
    for name, weight in (("proj_q", proj_q), ("proj_k", proj_k), ("proj_v", proj_v), ("proj_out", proj_out)):
        if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
            raise DimensionMismatchError(f"{name} must be square, got {weight.shape}", axis=name)
        if weight.shape[1] != channels:
            raise DimensionMismatchError(f"{name} is {weight.shape}, input has {channels} channels", axis="C")
    q = matmul(proj_q, x)
    k = matmul(proj_k, x)
    v = matmul(proj_v, x)
    scores = mul(matmul(swap_last(k), q), 1.0 / math.sqrt(channels))
    attention = softmax(scores, axis=-2)
    return add(matmul(proj_out, matmul(v, attention)), x)


class LSTMWeights(NamedTuple):
    """Gate weights in (input, forget, candidate, output) column blocks."""

    w_x: Tensor  # [D, 4H]
    w_h: Tensor  # [H, 4H]
    bias: Tensor  # [4H]


def lstm_cell(x: TensorLike, h_prev: TensorLike, c_prev: TensorLike, weights: LSTMWeights) -> Tuple[Tensor, Tensor]:
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    hidden = weights.w_h.shape[0]
    if weights.w_h.shape != (hidden, 4 * hidden):
        raise DimensionMismatchError(f"w_h must be [H, 4H], got {weights.w_h.shape}", axis="H")
    if weights.w_x.shape != (x.shape[-1], 4 * hidden):
        raise DimensionMismatchError(f"w_x is {weights.w_x.shape}, input width {x.shape[-1]}", axis="D")
    if weights.bias.shape != (4 * hidden,):
        raise DimensionMismatchError(f"bias must be [4H], got {weights.bias.shape}", axis="H")
    if h_prev.shape[-1] != hidden or c_prev.shape[-1] != hidden:
        raise DimensionMismatchError(f"state width must be {hidden}", axis="H")

    unbatched = x.ndim == 1
    if unbatched:
        x, h_prev, c_prev = reshape(x, (1, -1)), reshape(h_prev, (1, -1)), reshape(c_prev, (1, -1))

    gates = add(add(matmul(x, weights.w_x), matmul(h_prev, weights.w_h)), weights.bias)
    i = sigmoid(getitem(gates, (Ellipsis, slice(0, hidden))))
    f = sigmoid(getitem(gates, (Ellipsis, slice(hidden, 2 * hidden))))
    g = tanh(getitem(gates, (Ellipsis, slice(2 * hidden, 3 * hidden))))
    o = sigmoid(getitem(gates, (Ellipsis, slice(3 * hidden, 4 * hidden))))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))

    if unbatched:
        h, c = reshape(h, (hidden,)), reshape(c, (hidden,))
    return h, c


def dropout(x: TensorLike, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout needs a random generator while training")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, keep)
