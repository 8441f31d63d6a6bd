"""PTNSR binary tensor files.

Layout (all integers little-endian)::

    magic   6 bytes  b"PTNSR\\0"
    version u8       1
    dtype   u8       0 = float32, 1 = float64
    ndim    u8
    dims    ndim x u64
    payload row-major values
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"PTNSR\0"
VERSION = 1
_DTYPE_CODES: dict[int, np.dtype] = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_HEADER = struct.Struct("<6sBBB")


def encode(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    code = _CODE_FOR_DTYPE.get(arr.dtype.newbyteorder("="))
    if code is None:
        msg = f"PTNSR stores float32 or float64, got {arr.dtype}"
        raise FormatError(msg)
    if arr.ndim > 255:
        raise FormatError("PTNSR supports at most 255 dimensions")
    header = _HEADER.pack(MAGIC, VERSION, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes(order="C")
    return header + dims + payload


def decode(blob: bytes, *, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < _HEADER.size:
        msg = f"{source}: truncated PTNSR header"
        raise FormatError(msg)
    magic, version, code, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        msg = f"{source}: bad magic {magic!r}"
        raise FormatError(msg)
    if version != VERSION:
        msg = f"{source}: unsupported PTNSR version {version}"
        raise FormatError(msg)
    if code not in _DTYPE_CODES:
        msg = f"{source}: unknown dtype code {code}"
        raise FormatError(msg)
    offset = _HEADER.size
    dims_end = offset + 8 * ndim
    if len(blob) < dims_end:
        msg = f"{source}: truncated dims"
        raise FormatError(msg)
    dims = struct.unpack_from(f"<{ndim}Q", blob, offset)
    dtype = _DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(blob) - dims_end != expected:
        msg = f"{source}: payload has {len(blob) - dims_end} bytes, expected {expected}"
        raise FormatError(msg)
    values = np.frombuffer(blob, dtype=dtype, offset=dims_end)
    return values.reshape(dims).astype(dtype.newbyteorder("="), copy=True)


def write_ptnsr(path: str | Path, array: np.ndarray) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode(array))
    return target


def read_ptnsr(path: str | Path) -> np.ndarray:
    source = Path(path)
    return decode(source.read_bytes(), source=str(source))
