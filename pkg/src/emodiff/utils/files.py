"""
Filesystem helpers: writable output directories and atomic writes.
"""
import logging
import os
import tempfile
from pathlib import Path
from typing import Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def validate_and_create_path(path: PathLike) -> Path:
    """Create ``path`` (and parents) if needed and check that it is a writable directory."""
    abs_path = Path(os.path.abspath(os.path.expanduser(str(path))))
    logger.debug(f"Validating path: {abs_path}")
    try:
        abs_path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Error creating directory {abs_path}: {e}")
        raise PermissionError(f"Cannot create directory {abs_path}: {e}")

    if not abs_path.is_dir():
        raise PermissionError(f"Path is not a directory: {abs_path}")
    if not os.access(abs_path, os.W_OK):
        raise PermissionError(f"Directory {abs_path} is not writable")
    return abs_path


def atomic_write_bytes(path: PathLike, payload: bytes) -> None:
    """Write to a temporary sibling, then rename over ``path``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
