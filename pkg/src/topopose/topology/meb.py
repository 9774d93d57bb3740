"""Minimum enclosing balls of 2, 3 and 4 points, vectorized over simplices.

Vertex tuples must be sorted ascending. Every routine computes the ball of a
given vertex subset with the same arithmetic no matter which larger simplex
asks for it, so a face and a coface that share a ball get bit-identical radii.
"""
import numpy as np


def _dot(u, v):
    return u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1] + u[:, 2] * v[:, 2]


def _cross(u, v):
    return np.stack(
        [
            u[:, 1] * v[:, 2] - u[:, 2] * v[:, 1],
            u[:, 2] * v[:, 0] - u[:, 0] * v[:, 2],
            u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0],
        ],
        axis=1,
    )


def edge_balls(points, edges):
    """Centres and radii of the diameter balls of ``edges`` (m x 2)."""
    a = points[edges[:, 0]]
    b = points[edges[:, 1]]
    d = a - b
    return (a + b) * 0.5, 0.5 * np.sqrt(_dot(d, d))


def triangle_balls(points, tris):
    """MEB of each triangle: diameter ball of the longest edge when the
    triangle is right or obtuse, its circumball otherwise."""
    i, j, k = tris[:, 0], tris[:, 1], tris[:, 2]
    a, b, c = points[i], points[j], points[k]
    center = np.empty((len(tris), 3))
    radius = np.empty(len(tris))

    at_a = _dot(b - a, c - a) <= 0
    at_b = ~at_a & (_dot(a - b, c - b) <= 0)
    at_c = ~at_a & ~at_b & (_dot(a - c, b - c) <= 0)
    acute = ~(at_a | at_b | at_c)
    for mask, (p, q) in ((at_a, (j, k)), (at_b, (i, k)), (at_c, (i, j))):
        if mask.any():
            center[mask], radius[mask] = edge_balls(points, np.stack([p[mask], q[mask]], axis=1))
    if acute.any():
        u = (b - a)[acute]
        v = (c - a)[acute]
        w = _cross(u, v)
        num = _dot(u, u)[:, None] * _cross(v, w) + _dot(v, v)[:, None] * _cross(w, u)
        cc = a[acute] + num / (2.0 * _dot(w, w))[:, None]
        d = cc - a[acute]
        center[acute] = cc
        radius[acute] = np.sqrt(_dot(d, d))
    return center, radius


TET_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))  # face opposite vertex 0, 1, 2, 3


def tetra_balls(points, tets, rtol=1e-12):
    """MEB of each tetrahedron.

    If the MEB of some face already contains the opposite vertex, that face's
    ball is the answer (the smallest such face is used); otherwise it is the
    circumball. Returns (center, radius, face) where ``face`` is the index in
    ``TET_FACES`` whose ball was used, or -1 for the circumball.
    """
    m = len(tets)
    best_r = np.full(m, np.inf)
    best_c = np.zeros((m, 3))
    face_used = np.full(m, -1)
    for f, cols in enumerate(TET_FACES):
        c, r = triangle_balls(points, tets[:, cols])
        opp = points[tets[:, f]]
        d = opp - c
        inside = _dot(d, d) <= r * r * (1.0 + rtol)
        better = inside & (r < best_r)
        best_r[better] = r[better]
        best_c[better] = c[better]
        face_used[better] = f
    circ = face_used < 0
    if circ.any():
        t = tets[circ]
        a, b, c, d = (points[t[:, q]] for q in range(4))
        u, v, w = b - a, c - a, d - a
        num = (
            _dot(u, u)[:, None] * _cross(v, w)
            + _dot(v, v)[:, None] * _cross(w, u)
            + _dot(w, w)[:, None] * _cross(u, v)
        )
        cc = a + num / (2.0 * _dot(u, _cross(v, w)))[:, None]
        diff = cc - a
        best_c[circ] = cc
        best_r[circ] = np.sqrt(_dot(diff, diff))
    return best_c, best_r, face_used
