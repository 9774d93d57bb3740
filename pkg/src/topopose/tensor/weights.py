"""Binary weight container.

Layout (little-endian): b"TSMW", u32 version, u32 entry count, then per
entry u16 name length, UTF-8 name, u8 rank, u32 extent per axis and the raw
float32 data in row-major order.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .graph import get_dtype

MAGIC = b"TSMW"
VERSION = 1


def dumps(params: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def loads(buf: bytes) -> dict[str, np.ndarray]:
    """Parse a container; arrays come back at the active precision."""
    if buf[:4] != MAGIC:
        raise DataError("not a weight container (bad magic)")
    try:
        version, count = struct.unpack_from("<II", buf, 4)
        if version != VERSION:
            raise DataError(f"unsupported weight container version {version}")
        pos = 12
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", buf, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(buf, dtype="<f4", count=size, offset=pos)
            pos += 4 * size
            out[name] = data.reshape(shape).astype(get_dtype())
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"truncated or corrupt weight container: {exc}") from None
    if pos != len(buf):
        raise DataError(f"{len(buf) - pos} trailing bytes after last entry")
    return out


def save(path, params: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(params))


def load(path) -> dict[str, np.ndarray]:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read weights {path}: {exc}") from None
    return loads(buf)
