"""Ordering keypoints along 3D Hilbert or Z-order curves."""
from __future__ import annotations

import numpy as np

from .errors import DataError

METHODS = ("hilbert", "zorder", "none")


def quantize(coords, bits: int = 10) -> np.ndarray:
    """Map the bounding box of ``coords`` affinely onto {0..2^bits-1}^3 (floor).

    An axis with zero extent maps to 0.
    """
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3:
        raise DataError(f"coords must be N x 3, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("coords must be finite")
    top = (1 << bits) - 1
    lo = x.min(axis=0)
    ext = x.max(axis=0) - lo
    safe = np.where(ext > 0, ext, 1.0)
    g = np.floor((x - lo) / safe * top)
    g = np.where(ext > 0, g, 0.0)
    return np.clip(g, 0, top).astype(np.int64)


def _check_grid(grid, bits):
    g = np.asarray(grid)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape[-1] != 3:
        raise DataError(f"grid coordinates must have 3 columns, got {g.shape}")
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if np.any(g < 0) or np.any(g >= (1 << bits)):
        raise DataError(f"grid coordinate outside [0, 2^{bits})")
    # Python ints once codes no longer fit in 63 bits
    dtype = np.int64 if 3 * bits <= 62 else object
    return g.astype(dtype), dtype


def _interleave(X, bits, dtype):
    """Bits of X[:, 0], X[:, 1], X[:, 2] woven high to low, x most significant."""
    code = np.zeros(len(X), dtype=dtype)
    for i in range(bits - 1, -1, -1):
        for d in range(3):
            code = (code << 1) | ((X[:, d] >> i) & 1)
    return code


def hilbert_index(grid3, bits: int):
    """Hilbert code of integer grid points (Skilling's transpose algorithm)."""
    X, dtype = _check_grid(grid3, bits)
    X = X.copy()
    n = 3
    M = 1 << (bits - 1)
    # inverse undo of excess work
    Q = M
    while Q > 1:
        P = Q - 1
        for i in range(n):
            hit = (X[:, i] & Q) != 0
            # where set, invert the low bits of X[0]; else swap low bits of X[0] and X[i]
            X[hit, 0] ^= P
            t = (X[~hit, 0] ^ X[~hit, i]) & P
            X[~hit, 0] ^= t
            X[~hit, i] ^= t
        Q >>= 1
    # Gray encode
    for i in range(1, n):
        X[:, i] ^= X[:, i - 1]
    t = np.zeros(len(X), dtype=dtype)
    Q = M
    while Q > 1:
        hit = (X[:, n - 1] & Q) != 0
        t[hit] ^= Q - 1
        Q >>= 1
    for i in range(n):
        X[:, i] ^= t
    code = _interleave(X, bits, dtype)
    return code if np.ndim(grid3) > 1 else code[0]


def zorder_index(grid3, bits: int):
    """Morton code: bit i of x at position 3i, of y at 3i+1, of z at 3i+2."""
    X, dtype = _check_grid(grid3, bits)
    code = np.zeros(len(X), dtype=dtype)
    for i in range(bits):
        for d in range(3):
            code = code | (((X[:, d] >> i) & 1) << (3 * i + d))
    return code if np.ndim(grid3) > 1 else code[0]


def serialize_keypoints(coords, method: str = "hilbert", bits: int = 10) -> np.ndarray:
    """Permutation sorting keypoints by curve code; ties keep input order."""
    x = np.asarray(coords, dtype=np.float64)
    if method not in METHODS:
        raise ValueError(f"unknown serialization method {method!r}")
    if len(x) < 1:
        raise DataError("need at least one keypoint")
    if method == "none":
        return np.arange(len(x))
    grid = quantize(x, bits)
    code = hilbert_index(grid, bits) if method == "hilbert" else zorder_index(grid, bits)
    if code.dtype == object:
        return np.array(sorted(range(len(x)), key=lambda i: (code[i], i)), dtype=np.int64)
    return np.argsort(code, kind="stable")
