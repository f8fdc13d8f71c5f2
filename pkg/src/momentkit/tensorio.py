"""STCF binary tensor container.

Layout (all little-endian)::

    b"STCF" | version u8 = 1 | dtype u8 = 0 (float32) | ndim u16 | ndim x dim u64 | payload
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .features import FeatureTensor

MAGIC = b"STCF"
VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sBBH")


class TensorFormatError(ValueError):
    pass


class BadMagic(TensorFormatError):
    pass


class UnsupportedVersion(TensorFormatError):
    pass


class UnsupportedDtype(TensorFormatError):
    pass


class TruncatedPayload(TensorFormatError):
    pass


def encode_tensor(t) -> bytes:
    arr = t.data if isinstance(t, FeatureTensor) else np.asarray(t, dtype=np.float32)
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + dims + arr.tobytes(order="C")


def decode_tensor(buf: bytes) -> FeatureTensor:
    if bytes(buf[:4]) != MAGIC:
        raise BadMagic(f"bad magic {bytes(buf[:4])!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedPayload("header truncated")
    _, version, dtype, ndim = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported STCF version {version}")
    if dtype != DTYPE_F32:
        raise UnsupportedDtype(f"unsupported dtype code {dtype}")
    offset = _HEADER.size
    if len(buf) < offset + 8 * ndim:
        raise TruncatedPayload("dimension table truncated")
    shape = struct.unpack_from(f"<{ndim}Q", buf, offset)
    offset += 8 * ndim
    count = 1
    for d in shape:
        count *= d
    need = 4 * count
    have = len(buf) - offset
    if have < need:
        raise TruncatedPayload(f"shape {tuple(shape)} needs {count} values, file holds {have // 4}")
    if have > need:
        raise TensorFormatError(f"{have - need} trailing bytes after payload")
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=offset).astype(np.float32)
    return FeatureTensor(data.reshape(shape))


def write_tensor(t, path) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path) -> FeatureTensor:
    return decode_tensor(Path(path).read_bytes())
