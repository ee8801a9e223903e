"""
Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a read-only numpy array. Operations on tensors that require
gradients record the parents and a gradient rule, which together form the
computation graph that ``Tensor.backward`` walks in reverse topological order.
"""
import logging
import os
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError

logger = logging.getLogger(__name__)

PRECISIONS = {"f32": np.dtype(np.float32), "f64": np.dtype(np.float64)}

_default_precision = os.getenv("EMODIFF_PRECISION", "f32").lower()
if _default_precision not in PRECISIONS:
    logger.warning(f"Unknown EMODIFF_PRECISION={_default_precision!r}, using f32")
    _default_precision = "f32"

_state = {"dtype": PRECISIONS[_default_precision]}

# Graph recording is a per-thread flag; the element type is process-wide.
_local = threading.local()

GradRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def set_precision(name: str) -> None:
    """Select the global element type: ``f32`` for training, ``f64`` for verification."""
    key = name.lower()
    if key not in PRECISIONS:
        raise ValueError(f"Unknown precision {name!r}; expected one of {sorted(PRECISIONS)}")
    _state["dtype"] = PRECISIONS[key]
    logger.debug(f"Global precision set to {key}")


def get_precision() -> str:
    return "f64" if _state["dtype"] == np.float64 else "f32"


def get_dtype() -> np.dtype:
    return _state["dtype"]


@contextmanager
def precision(name: str) -> Iterator[None]:
    previous = get_precision()
    set_precision(name)
    try:
        yield
    finally:
        set_precision(previous)


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording graph nodes (sampling, evaluation)."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


class Tensor:
    """Immutable n-dimensional value, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_rule", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        array = np.array(data, dtype=dtype or get_dtype())
        array.flags.writeable = False
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._grad_rule: Optional[GradRule] = None
        self.op = "leaf"

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], rule: GradRule, op: str) -> "Tensor":
        """Create the output of a primitive and register its gradient rule."""
        out = cls.__new__(cls)
        array = np.asarray(data)
        if array.dtype != get_dtype() and array.dtype.kind == "f":
            array = array.astype(get_dtype())
        array.flags.writeable = False
        out.data = array
        out.grad = None
        out.op = op
        tracked = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._parents = tuple(parents) if tracked else ()
        out._grad_rule = rule if tracked else None
        return out

    # -- basic properties --------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._grad_rule is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- graph traversal ---------------------------------------------------

    def graph(self) -> List["Tensor"]:
        """Nodes reachable from this tensor in topological order (inputs first)."""
        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def backward(self) -> int:
        """Accumulate d(self)/d(leaf) into every leaf that requires gradients.

        Returns the number of graph nodes visited, each exactly once.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = self.graph()
        pending = {id(self): np.ones_like(self.data)}
        visited = 0
        for node in reversed(order):
            visited += 1
            upstream = pending.pop(id(node), None)
            if upstream is None:
                continue
            if node._grad_rule is None:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = np.zeros_like(node.data)
                    node.grad = node.grad + upstream.reshape(node.shape)
                continue
            for parent, grad in zip(node._parents, node._grad_rule(upstream)):
                if grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = grad if key not in pending else pending[key] + grad
        return visited

    # -- operators ---------------------------------------------------------

    def __add__(self, other): return ops.add(self, other)
    def __radd__(self, other): return ops.add(other, self)
    def __sub__(self, other): return ops.sub(self, other)
    def __rsub__(self, other): return ops.sub(other, self)
    def __mul__(self, other): return ops.mul(self, other)
    def __rmul__(self, other): return ops.mul(other, self)
    def __truediv__(self, other): return ops.div(self, other)
    def __rtruediv__(self, other): return ops.div(other, self)
    def __neg__(self): return ops.neg(self)
    def __matmul__(self, other): return ops.matmul(self, other)
    def __pow__(self, exponent: float): return ops.power(self, exponent)
    def __getitem__(self, index): return ops.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)


TensorLike = Union[Tensor, np.ndarray, float, int]


def as_tensor(value: TensorLike) -> Tensor:
    """Wrap constants; tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


from . import ops  # noqa: E402  (operators above resolve ops lazily)
