"""
emodiff error hierarchy.

Library code raises these; only the command line maps them to exit codes.
"""
from typing import Optional


class EmodiffError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(EmodiffError, ValueError):
    """Invalid or unknown configuration keys/values."""

    exit_code = 1


class DataError(EmodiffError, ValueError):
    """Malformed or missing input data."""

    exit_code = 2


class WavFormatError(DataError):
    """WAV file is not 16-bit PCM mono RIFF."""


class ManifestError(DataError):
    """CSV manifest is unreadable or has the wrong columns."""


class SplitError(DataError):
    """A requested corpus split cannot be formed."""


class MissingArtifactError(DataError):
    """An upstream artifact expected on disk is absent."""

    def __init__(self, path: str, what: str = "artifact"):
        super().__init__(f"Missing {what}: expected {path}")
        self.path = path


class DimensionMismatchError(EmodiffError, ValueError):
    """Tensor shapes disagree along a named axis."""

    def __init__(self, message: str, axis: Optional[str] = None):
        if axis is not None:
            message = f"{message} (axis: {axis})"
        super().__init__(message)
        self.axis = axis


class ContractError(EmodiffError, RuntimeError):
    """An API precondition was violated by the caller."""


class NumericalError(EmodiffError, ArithmeticError):
    """Training or sampling produced unusable numbers."""

    exit_code = 3


class NonFiniteError(NumericalError):
    """A NaN or infinity showed up in a loss, gradient or sample."""

    def __init__(self, message: str, step: Optional[int] = None, name: Optional[str] = None):
        details = []
        if step is not None:
            details.append(f"step={step}")
        if name is not None:
            details.append(f"name={name}")
        if details:
            message = f"{message} [{', '.join(details)}]"
        super().__init__(message)
        self.step = step
        self.name = name
