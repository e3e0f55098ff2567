"""Binary tensor container used across the package.

Layout: magic bytes ``TGT1``, a little-endian u32 tensor order ``D``,
``D`` little-endian u64 mode sizes, then the ``prod(sizes)`` float64
values little-endian in column-major order. Masks reuse the container
with values restricted to {0.0, 1.0}.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TGT1"


def write_tensor(path: str | Path, x: np.ndarray) -> None:
    x = np.asarray(x, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", x.ndim))
        fh.write(struct.pack(f"<{x.ndim}Q", *x.shape))
        fh.write(np.ravel(x, order="F").astype("<f8").tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (ndim,) = struct.unpack("<I", fh.read(4))
        if ndim < 1:
            raise ValueError(f"{path}: tensor order must be >= 1, got {ndim}")
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        count = math.prod(shape)
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if data.size != count:
            raise ValueError(f"{path}: truncated payload, expected {count} values")
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after payload")
    return np.reshape(data, shape, order="F").astype(np.float64)


def write_mask(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    write_tensor(path, values.astype(np.float64))


def read_mask(path: str | Path) -> np.ndarray:
    values = read_tensor(path)
    if not np.isin(values, (0.0, 1.0)).all():
        raise ValueError(f"{path}: mask values must be 0.0 or 1.0")
    return values != 0.0
