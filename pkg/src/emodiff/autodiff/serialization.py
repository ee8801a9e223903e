"""
EDTF tensor files and checkpoints.

Layout: magic ``EDTF``, u32 version (1), u8 dtype (0=f32, 1=f64), u32 ndim,
ndim x u64 dims, then the row-major little-endian payload.
"""
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from ..errors import DataError, MissingArtifactError
from ..utils.files import PathLike, atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

MAGIC = b"EDTF"
VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_HEADER = struct.Struct("<4sIBI")

MANIFEST_NAME = "manifest.json"


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype not in _DTYPE_CODES:
        array = array.astype(np.float64)
    code = _DTYPE_CODES[array.dtype]
    header = _HEADER.pack(MAGIC, VERSION, code, array.ndim)
    dims = struct.pack(f"<{array.ndim}Q", *array.shape)
    payload = np.ascontiguousarray(array, dtype=_CODE_DTYPES[code]).tobytes(order="C")
    return header + dims + payload


def decode_tensor(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise DataError("EDTF blob shorter than its header")
    magic, version, code, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"Not an EDTF tensor (magic {magic!r})")
    if version != VERSION:
        raise DataError(f"Unsupported EDTF version {version}")
    if code not in _CODE_DTYPES:
        raise DataError(f"Unknown EDTF dtype code {code}")
    offset = _HEADER.size
    shape = struct.unpack_from(f"<{ndim}Q", blob, offset)
    offset += 8 * ndim
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(shape)) if ndim else 1
    expected = offset + count * dtype.itemsize
    if len(blob) != expected:
        raise DataError(f"EDTF payload size mismatch: {len(blob)} bytes, expected {expected}")
    array = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
    return array.astype(dtype.newbyteorder("="))


def write_tensor(path: PathLike, array: np.ndarray) -> None:
    atomic_write_bytes(path, encode_tensor(array))


def read_tensor(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(str(path), "EDTF tensor")
    return decode_tensor(path.read_bytes())


def dumps_json(payload: Dict[str, Any]) -> str:
    """Canonical JSON so reruns are byte-identical."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def save_checkpoint(directory: PathLike, tensors: Dict[str, np.ndarray], manifest: Dict[str, Any]) -> Path:
    """Write every tensor as ``<name>.edtf`` and the JSON manifest last."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in sorted(tensors):
        write_tensor(directory / f"{name}.edtf", tensors[name])
    body = dict(manifest)
    body["tensors"] = sorted(tensors)
    atomic_write_text(directory / MANIFEST_NAME, dumps_json(body))
    logger.info(f"Checkpoint with {len(tensors)} tensors written to {directory}")
    return directory


def load_checkpoint(directory: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingArtifactError(str(manifest_path), "checkpoint manifest")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    tensors = {name: read_tensor(directory / f"{name}.edtf") for name in manifest.get("tensors", [])}
    return tensors, manifest
