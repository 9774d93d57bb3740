"""Oriented-box IoU, rotation/translation errors and the n-degree m-cm report."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateWarning
from .geometry import AXIAL_KINDS, Pose

IOU_THRESHOLDS = (0.25, 0.50, 0.75)
POSE_CELLS = ((5, 2), (5, 5), (10, 2), (10, 5))  # (degrees, centimetres)
SYMMETRIES = ("none", "axial-y")
ORTHO_TOL = 1e-6


def symmetry_for(kind: str) -> str:
    return "axial-y" if kind in AXIAL_KINDS else "none"


def _check_rotation(R):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise DataError(f"rotation must be 3x3, got {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1) > ORTHO_TOL:
        raise DataError("rotation is not orthonormal")
    return R


def rotation_error(R_pred, R_gt, symmetry: str = "none") -> float:
    """Geodesic angle in degrees; for axial-y only the y axes are compared."""
    Rp, Rg = _check_rotation(R_pred), _check_rotation(R_gt)
    # atan2 keeps small angles accurate where arccos(1 - eps) does not
    if symmetry == "none":
        D = Rp @ Rg.T
        axis = np.array([D[2, 1] - D[1, 2], D[0, 2] - D[2, 0], D[1, 0] - D[0, 1]])
        ang = np.arctan2(np.linalg.norm(axis) / 2.0, (np.trace(D) - 1.0) / 2.0)
    elif symmetry == "axial-y":
        a, b = Rp[:, 1], Rg[:, 1]
        ang = np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b)
    else:
        raise ValueError(f"unknown symmetry {symmetry!r}")
    return float(np.degrees(ang))


def translation_error_cm(t_pred, t_gt) -> float:
    return float(np.linalg.norm(np.asarray(t_pred) - np.asarray(t_gt)) * 100.0)


# --------------------------------------------------------------------------
# oriented boxes


@dataclass
class OrientedBox:
    center: np.ndarray
    rotation: np.ndarray
    extents: np.ndarray

    @classmethod
    def from_pose(cls, pose: Pose) -> "OrientedBox":
        return cls(pose.translation, pose.rotation, pose.size)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def corners(self) -> np.ndarray:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
        return self.center + (signs * self.extents / 2) @ self.rotation.T

    def planes(self):
        """Six (normal, offset) half-spaces n.x <= c whose intersection is the box."""
        out = []
        for k in range(3):
            n = self.rotation[:, k]
            h = self.extents[k] / 2
            out.append((n, n @ self.center + h))
            out.append((-n, -(n @ self.center) + h))
        return out

    def faces(self):
        """Faces as counter-clockwise (outward normal) vertex loops."""
        c = self.corners()
        # corner index = 4*ix + 2*iy + iz
        loops = [
            (0, 1, 3, 2), (4, 6, 7, 5),  # x-, x+
            (0, 4, 5, 1), (2, 3, 7, 6),  # y-, y+
            (0, 2, 6, 4), (1, 5, 7, 3),  # z-, z+
        ]
        return [c[list(l)] for l in loops]

    def contains(self, pts) -> np.ndarray:
        local = (np.asarray(pts) - self.center) @ self.rotation
        return np.all(np.abs(local) <= self.extents / 2, axis=-1)


def _clip_polygon(poly, n, c, eps):
    """Sutherland-Hodgman clip of a closed polygon against n.x <= c."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        dp, dq = p @ n - c, q @ n - c
        if dp <= eps:
            out.append(p)
        if (dp < -eps and dq > eps) or (dp > eps and dq < -eps):
            s = dp / (dp - dq)
            out.append(p + s * (q - p))
    return out


def _order_cap(points, n):
    pts = np.unique(np.round(np.asarray(points), 12), axis=0) if len(points) else np.zeros((0, 3))
    if len(pts) < 3:
        return None
    centre = pts.mean(axis=0)
    u = pts[0] - centre
    u /= np.linalg.norm(u) or 1.0
    v = np.cross(n, u)
    ang = np.arctan2((pts - centre) @ v, (pts - centre) @ u)
    return list(pts[np.argsort(ang)])


def clip_polytope(faces, planes, eps=1e-12):
    """Intersect a convex polytope (list of outward CCW faces) with half-spaces."""
    for n, c in planes:
        tol = 1e-9 * max(1.0, abs(c))
        new_faces, cut = [], []
        for f in faces:
            clipped = _clip_polygon(f, n, c, eps)
            on_plane = [abs(p @ n - c) <= tol for p in clipped]
            cut.extend(p for p, on in zip(clipped, on_plane) if on)
            # faces lying in the plane are rebuilt by the cap below
            if len(clipped) >= 3 and not all(on_plane):
                new_faces.append(np.array(clipped))
        cap = _order_cap(cut, n)
        if cap is not None:
            new_faces.append(np.array(cap))
        if len(new_faces) < 4:  # flat or empty
            return []
        faces = new_faces
    return faces


def polytope_volume(faces, origin=None) -> float:
    """Divergence theorem: sum of signed tetra volumes from ``origin`` over face fans."""
    if not faces:
        return 0.0
    o = faces[0][0] if origin is None else origin
    vol = 0.0
    for f in faces:
        a = f[0] - o
        for i in range(1, len(f) - 1):
            vol += np.dot(a, np.cross(f[i] - o, f[i + 1] - o))
    return abs(vol) / 6.0


def _degenerate(a: OrientedBox, b: OrientedBox) -> bool:
    if a.volume <= 0 or b.volume <= 0:
        warnings.warn("zero-volume box; IoU defined as 0", DegenerateWarning, stacklevel=3)
        return True
    return False


def box_iou_exact(a: OrientedBox, b: OrientedBox) -> float:
    if _degenerate(a, b):
        return 0.0
    inter = polytope_volume(clip_polytope(a.faces(), b.planes()), origin=a.center)
    inter = min(inter, a.volume, b.volume)
    return float(inter / (a.volume + b.volume - inter))


def _grid(box: OrientedBox, n: int) -> np.ndarray:
    mid = (np.arange(n) + 0.5) / n - 0.5
    g = np.stack(np.meshgrid(mid, mid, mid, indexing="ij"), axis=-1).reshape(-1, 3)
    return box.center + (g * box.extents) @ box.rotation.T


def box_iou_sampled(a: OrientedBox, b: OrientedBox, n: int = 64) -> float:
    """Midpoint-grid estimate: n^3 cells in each box, intersection averaged."""
    if _degenerate(a, b):
        return 0.0
    fa = b.contains(_grid(a, n)).mean()
    fb = a.contains(_grid(b, n)).mean()
    inter = 0.5 * (fa * a.volume + fb * b.volume)
    return float(inter / (a.volume + b.volume - inter))


def box_iou(a, b, mode: str = "exact") -> float:
    a = a if isinstance(a, OrientedBox) else OrientedBox.from_pose(a)
    b = b if isinstance(b, OrientedBox) else OrientedBox.from_pose(b)
    if mode == "exact":
        return box_iou_exact(a, b)
    if mode == "sampled":
        return box_iou_sampled(a, b)
    raise ValueError(f"unknown IoU mode {mode!r}")


# --------------------------------------------------------------------------
# report


@dataclass
class MetricReport:
    iou: dict = field(default_factory=dict)    # threshold -> fraction
    pose: dict = field(default_factory=dict)   # (deg, cm) -> fraction
    rotation_errors: list = field(default_factory=list)
    translation_errors: list = field(default_factory=list)
    ious: list = field(default_factory=list)

    def is_monotone(self) -> bool:
        ok = all(self.iou[a] >= self.iou[b] for a, b in zip(IOU_THRESHOLDS, IOU_THRESHOLDS[1:]))
        loose = self.pose[(10, 5)]
        return ok and all(v <= loose for v in self.pose.values()) and (
            self.pose[(5, 2)] <= min(self.pose[(5, 5)], self.pose[(10, 2)])
        )

    def to_json(self) -> dict:
        out = {f"IoU{int(round(t * 100))}": v for t, v in self.iou.items()}
        out.update({f"{d}deg{c}cm": v for (d, c), v in self.pose.items()})
        out["n"] = len(self.ious)
        return out


def evaluate_set(predictions, gts) -> MetricReport:
    """Fraction of instances passing every IoU and (degree, cm) threshold.

    ``gts`` holds (Pose, symmetry) pairs, or bare poses (symmetry "none").
    """
    if len(predictions) != len(gts):
        raise DataError(f"{len(predictions)} predictions for {len(gts)} ground truths")
    if not predictions:
        raise DataError("empty evaluation set")
    rot, tra, ious = [], [], []
    for p, g in zip(predictions, gts):
        gp, sym = g if isinstance(g, tuple) else (g, "none")
        rot.append(rotation_error(p.rotation, gp.rotation, sym))
        tra.append(translation_error_cm(p.translation, gp.translation))
        ious.append(box_iou(p, gp))
    rot, tra, ious = np.array(rot), np.array(tra), np.array(ious)
    report = MetricReport(
        iou={t: float(np.mean(ious >= t)) for t in IOU_THRESHOLDS},
        pose={(d, c): float(np.mean((rot < d) & (tra < c))) for d, c in POSE_CELLS},
        rotation_errors=rot.tolist(), translation_errors=tra.tolist(), ious=ious.tolist(),
    )
    return report
