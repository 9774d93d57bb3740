"""Delaunay triangulation, alpha (Delaunay-Cech) filtration and the
brute-force Cech filtration used as its oracle."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import Delaunay, QhullError

from ..errors import DataError, TopologyError
from .meb import edge_balls, tetra_balls, triangle_balls

JITTER_SCALE = 1e-9


@dataclass
class SimplicialComplex:
    """Vertices 0..n-1 plus sorted vertex tuples per dimension."""

    n_vertices: int
    edges: np.ndarray
    triangles: np.ndarray
    tetrahedra: np.ndarray


@dataclass
class FilteredComplex:
    """Simplices of dimension 0..3 with filtration values (MEB radii, metres).

    ``simplices[k]`` is an (m_k, k+1) array of sorted vertex indices and
    ``values[k]`` the matching filtration values.
    """

    simplices: list
    values: list

    @property
    def n_vertices(self) -> int:
        return len(self.simplices[0])

    @property
    def max_dim(self) -> int:
        return len(self.simplices) - 1

    @property
    def max_value(self) -> float:
        return float(max((v.max() for v in self.values if len(v)), default=0.0))

    def __len__(self):
        return sum(len(s) for s in self.simplices)

    def __iter__(self):
        """Yield (vertex tuple, dim, value) triples."""
        for k, (s, v) in enumerate(zip(self.simplices, self.values)):
            for verts, val in zip(s.tolist(), v.tolist()):
                yield tuple(verts), k, val

    def is_monotone(self) -> bool:
        for k in range(1, self.max_dim + 1):
            s, v = self.simplices[k], self.values[k]
            if not len(s):
                continue
            for face in combinations(range(k + 1), k):
                fv = self.values[k - 1][face_positions(self.simplices[k - 1], s[:, list(face)])]
                if np.any(fv > v):
                    return False
        return True


def _encode(tuples, n):
    key = np.zeros(len(tuples), dtype=np.int64)
    for c in range(tuples.shape[1]):
        key = key * n + tuples[:, c]
    return key


def face_positions(faces: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Row index in ``faces`` (sorted tuples) of every row of ``query``."""
    n = int(max(faces.max(initial=0), query.max(initial=0))) + 1
    fk = _encode(faces, n)
    order = np.argsort(fk, kind="stable")
    qk = _encode(query, n)
    pos = np.searchsorted(fk[order], qk)
    pos = np.minimum(pos, len(fk) - 1)
    if len(fk) and not np.array_equal(fk[order][pos], qk):
        raise ValueError("query contains a simplex whose face is missing")
    return order[pos]


def _unique_rows(a):
    if not len(a):
        return a.reshape(0, a.shape[1])
    return np.unique(np.sort(a, axis=1), axis=0)


def delaunay3(points, seed: int = 0) -> SimplicialComplex:
    """Delaunay tetrahedralization with all of its faces.

    Points are perturbed by a seeded jitter of relative size 1e-9 before the
    triangulation so cospherical and coplanar configurations resolve to one
    consistent triangulation. Points Qhull leaves out (near duplicates) are
    tied to their nearest vertex by an extra edge so they stay connected.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DataError(f"points must be N x 3, got {pts.shape}")
    n = len(pts)
    if n < 4:
        raise TopologyError(f"Delaunay needs at least 4 points, got {n}")
    radius = float(np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    rng = np.random.default_rng(seed)
    jittered = pts + rng.uniform(-1.0, 1.0, pts.shape) * JITTER_SCALE * max(radius, 1e-300)
    try:
        tri = Delaunay(jittered)
    except QhullError as exc:
        first = str(exc).strip().splitlines()[0] if str(exc).strip() else "qhull failure"
        raise TopologyError(f"Delaunay failed for {n} points (all coplanar?): {first}") from None
    tets = np.sort(tri.simplices.astype(np.int64), axis=1)
    tets = tets[np.lexsort(tets.T[::-1])]
    tris = _unique_rows(np.concatenate([tets[:, list(f)] for f in combinations(range(4), 3)]))
    edge_list = [tets[:, list(e)] for e in combinations(range(4), 2)]
    if len(tri.coplanar):
        edge_list.append(tri.coplanar[:, [0, 2]].astype(np.int64))
    edges = _unique_rows(np.concatenate(edge_list))
    return SimplicialComplex(n, edges, tris, tets)


def _filtration_values(pts, edges, tris, tets):
    _, ev = edge_balls(pts, edges) if len(edges) else (None, np.zeros(0))
    values = [np.zeros(len(pts)), ev]
    if tris is not None:
        tv = triangle_balls(pts, tris)[1] if len(tris) else np.zeros(0)
        if len(tris):
            for face in ((0, 1), (0, 2), (1, 2)):
                tv = np.maximum(tv, ev[face_positions(edges, tris[:, list(face)])])
        values.append(tv)
    if tets is not None:
        qv = tetra_balls(pts, tets)[1] if len(tets) else np.zeros(0)
        if len(tets):
            for face in combinations(range(4), 3):
                qv = np.maximum(qv, values[2][face_positions(tris, tets[:, list(face)])])
        values.append(qv)
    return values


def alpha_filtration(cx: SimplicialComplex, points) -> FilteredComplex:
    """Filter a Delaunay complex by minimum-enclosing-ball radius.

    Balls of radius r around a simplex's vertices share a point exactly when
    the MEB radius of the vertices is at most r. Values are clamped to their
    faces' maxima so monotonicity holds bitwise.
    """
    pts = np.asarray(points, dtype=np.float64)
    verts = np.arange(cx.n_vertices, dtype=np.int64)[:, None]
    values = _filtration_values(pts, cx.edges, cx.triangles, cx.tetrahedra)
    return FilteredComplex([verts, cx.edges, cx.triangles, cx.tetrahedra], values)


CECH_MAX_POINTS = 48


def cech_filtration(points, max_dim: int = 2, r_max: float = np.inf) -> FilteredComplex:
    """Full Cech filtration on every vertex subset of size <= max_dim + 1."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n > CECH_MAX_POINTS:
        raise DataError(f"Cech oracle limited to {CECH_MAX_POINTS} points, got {n}")
    if not 1 <= max_dim <= 3:
        raise ValueError("max_dim must be 1, 2 or 3")

    def subsets(k):
        if n < k:
            return np.zeros((0, k), dtype=np.int64)
        return np.array(list(combinations(range(n), k)), dtype=np.int64)

    edges = subsets(2)
    tris = subsets(3) if max_dim >= 2 else None
    tets = subsets(4) if max_dim >= 3 else None
    values = _filtration_values(pts, edges, tris, tets)
    simplices = [np.arange(n, dtype=np.int64)[:, None], edges] + [s for s in (tris, tets) if s is not None]
    if np.isfinite(r_max):
        keep = [v <= r_max for v in values]
        simplices = [s[k] for s, k in zip(simplices, keep)]
        values = [v[k] for v, k in zip(values, keep)]
    return FilteredComplex(simplices, values)
