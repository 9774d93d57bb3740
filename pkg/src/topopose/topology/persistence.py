"""Boundary-matrix reduction over Z/2 and persistence diagrams."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .. import kernels
from ..errors import TopologyError
from .complexes import FilteredComplex, face_positions


@dataclass
class PersistenceDiagram:
    """Bars per homology dimension.

    ``pairs[k]`` is an (m, 2) array of (birth, death) with ``inf`` deaths for
    essential classes, sorted by (birth, death). ``max_value`` is the largest
    filtration value of the complex, used to cap essential bars.
    """

    pairs: dict = field(default_factory=dict)
    max_value: float = 0.0

    def __getitem__(self, k) -> np.ndarray:
        return self.pairs.get(k, np.zeros((0, 2)))

    @property
    def dims(self):
        return sorted(self.pairs)

    def bars(self):
        """Iterate (birth, death, dim) triples."""
        for k in self.dims:
            for b, d in self.pairs[k].tolist():
                yield b, d, k

    def capped(self, k, cap=None) -> np.ndarray:
        """Bars of dimension ``k`` with infinite deaths replaced by ``cap``."""
        cap = self.max_value if cap is None else cap
        out = self[k].copy()
        out[~np.isfinite(out[:, 1]), 1] = cap
        return out

    def lifetimes(self, k) -> np.ndarray:
        b = self.capped(k)
        return b[:, 1] - b[:, 0]

    def to_json(self) -> dict:
        return {
            f"H{k}": [[b, None if not np.isfinite(d) else d] for b, d in self.pairs[k].tolist()]
            for k in self.dims
        }


def _sorted_bars(bars):
    a = np.asarray(bars, dtype=np.float64).reshape(-1, 2)
    if not len(a):
        return a
    return a[np.lexsort((a[:, 1], a[:, 0]))]


def boundary_matrix(fc: FilteredComplex, max_dim: int):
    """Sort simplices of dimension <= max_dim + 1 by (value, dim, index).

    Returns (dims, values, offsets, rows) where column j of the CSR boundary
    holds the filtration positions of simplex j's faces.
    """
    top = min(max_dim + 1, fc.max_dim)
    dims, vals, local = [], [], []
    for k in range(top + 1):
        m = len(fc.simplices[k])
        dims.append(np.full(m, k, dtype=np.int64))
        vals.append(np.asarray(fc.values[k], dtype=np.float64))
        local.append(np.arange(m, dtype=np.int64))
    dims = np.concatenate(dims)
    vals = np.concatenate(vals)
    local = np.concatenate(local)
    order = np.lexsort((local, dims, vals))
    # position[k][i] = filtration index of the i-th simplex of dimension k
    position = [None] * (top + 1)
    for k in range(top + 1):
        position[k] = np.empty(len(fc.simplices[k]), dtype=np.int64)
    inv = np.empty(len(order), dtype=np.int64)
    inv[order] = np.arange(len(order))
    start = 0
    for k in range(top + 1):
        m = len(fc.simplices[k])
        position[k] = inv[start:start + m]
        start += m

    n = len(order)
    counts = np.where(dims[order] == 0, 0, dims[order] + 1)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    rows = np.empty(offsets[-1], dtype=np.int64)
    for k in range(1, top + 1):
        s = fc.simplices[k]
        if not len(s):
            continue
        cols = position[k]
        faces = [face_positions(fc.simplices[k - 1], s[:, list(f)]) for f in combinations(range(k + 1), k)]
        face_pos = np.stack([position[k - 1][f] for f in faces], axis=1)
        face_val = fc.values[k - 1][np.stack(faces, axis=1)]
        if np.any(face_val > fc.values[k][:, None]):
            raise TopologyError(f"filtration is not monotone in dimension {k}")
        face_pos.sort(axis=1)
        for c in range(k + 1):
            rows[offsets[cols] + c] = face_pos[:, c]
    return dims[order], vals[order], offsets, rows


def persistence(fc: FilteredComplex, max_dim: int = 1, backend=None) -> PersistenceDiagram:
    """Persistence pairs of a filtered complex in dimensions 0..max_dim.

    H0 keeps all N bars (including any of zero length); zero-length bars in
    higher dimensions are dropped.
    """
    dims, vals, offsets, rows = boundary_matrix(fc, max_dim)
    n = len(dims)
    idx = np.arange(n)
    # higher dimensions first so their pivots clear lower columns
    order = np.concatenate([idx[dims == k] for k in range(max_dim + 1, 0, -1)])
    low = kernels.reduce_boundary(offsets, rows, order, backend=backend)

    paired = np.zeros(n, dtype=bool)
    bars = {k: [] for k in range(max_dim + 1)}
    killers = np.nonzero(low >= 0)[0]
    for j in killers.tolist():
        i = int(low[j])
        paired[i] = True
        paired[j] = True
        k = int(dims[i])
        if k > max_dim:
            continue
        b, d = vals[i], vals[j]
        if k == 0 or d > b:
            bars[k].append((b, d))
    for i in np.nonzero(~paired & (dims <= max_dim))[0].tolist():
        bars[int(dims[i])].append((vals[i], np.inf))
    return PersistenceDiagram({k: _sorted_bars(v) for k, v in bars.items()}, fc.max_value)
