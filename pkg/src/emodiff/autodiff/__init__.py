"""Minimal dense tensors with reverse-mode automatic differentiation."""
from .tensor import Tensor, as_tensor, get_dtype, get_precision, no_grad, precision, set_precision
from . import ops
from .nn import Module, Parameter
from .optim import Adam, adam_step

__all__ = [
    'Tensor',
    'as_tensor',
    'get_dtype',
    'get_precision',
    'no_grad',
    'precision',
    'set_precision',
    'ops',
    'Module',
    'Parameter',
    'Adam',
    'adam_step',
]
