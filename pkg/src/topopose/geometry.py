"""Point clouds, poses, neighbourhoods and the synthetic shape corpus."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DataError, DegenerateWarning

SHAPE_KINDS = (
    "circle-ring",
    "sphere-shell",
    "torus",
    "cylinder-can",
    "mug-with-handle",
    "bowl",
    "two-clusters",
)
# category id n -> kind, for the six "object" categories
CATEGORY_KINDS = SHAPE_KINDS[:6]

EXPECTED_BETTI = {
    "circle-ring": (1, 1),
    "sphere-shell": (1, 0),
    "torus": (1, 2),
    "cylinder-can": (1, 0),
    "mug-with-handle": (1, 1),
    "bowl": (1, 0),
    "two-clusters": (2, 0),
}

# kinds whose shape is invariant to rotation about their y axis
AXIAL_KINDS = frozenset({"circle-ring", "sphere-shell", "torus", "cylinder-can", "bowl"})


@dataclass
class PointCloud:
    points: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise DataError(f"points must be N x 3, got shape {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise DataError("point coordinates must be finite")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if len(self.features) != len(self.points):
                raise DataError("feature rows do not match point count")

    def __len__(self):
        return len(self.points)


@dataclass
class Pose:
    rotation: np.ndarray
    translation: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        self.size = np.asarray(self.size, dtype=np.float64).reshape(3)

    def check(self, tol: float = 1e-9) -> None:
        R = self.rotation
        if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
            raise DataError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > tol:
            raise DataError("rotation determinant is not +1")
        if np.any(self.size <= 0):
            raise DataError("size must be positive")

    def to_json(self) -> dict:
        return {"R": self.rotation.tolist(), "t": self.translation.tolist(), "s": self.size.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Pose":
        try:
            return cls(obj["R"], obj["t"], obj["s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed pose object: {exc}") from None


@dataclass
class ShapeSpec:
    kind: str
    radius: float = 1.0
    minor_radius: float = 0.3
    height: float = 1.0
    jitter: float = 0.01
    n_points: int = 256
    seed: int = 0
    translation_range: float = 0.5
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if min(self.radius, self.minor_radius, self.height) <= 0:
            raise ValueError("shape parameters must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")
        if self.n_points < 1:
            raise ValueError("n_points must be positive")


def downsample(cloud: PointCloud, n: int, seed: int = 0) -> PointCloud:
    """Uniform subset of ``n`` points without replacement, in original order."""
    if len(cloud) < n:
        raise DataError(f"cannot sample {n} points from a cloud of {len(cloud)}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(cloud), size=n, replace=False))
    feats = None if cloud.features is None else cloud.features[idx]
    return PointCloud(cloud.points[idx], feats)


def farthest_point_sample(points: np.ndarray, n: int, start: int = 0) -> np.ndarray:
    """Indices (ascending) of a greedy farthest-point subset of size ``n``."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < n:
        raise DataError(f"cannot sample {n} points from a cloud of {len(pts)}")
    chosen = [start]
    dist = np.linalg.norm(pts - pts[start], axis=1)
    for _ in range(n - 1):
        i = int(np.argmax(dist))
        chosen.append(i)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[i], axis=1))
    return np.sort(np.array(chosen, dtype=np.int64))


def normalize(cloud: PointCloud) -> tuple[PointCloud, np.ndarray, float]:
    """Centre on the centroid and divide by the mean point norm.

    Returns ``(normalized, centroid, scale)`` with
    ``cloud.points == normalized.points * scale + centroid``.
    """
    pts = cloud.points
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scale = float(np.mean(np.linalg.norm(centered, axis=1)))
    if not scale > 0:
        warnings.warn("all points coincide; normalization scale clamped to 1", DegenerateWarning, stacklevel=2)
        scale = 1.0
    return PointCloud(centered / scale, cloud.features), centroid, scale


def knn(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other points for every point.

    Euclidean distance, self excluded, ties broken by the smaller index.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n <= k:
        raise DataError(f"knn needs more than K={k} points, got {n}")
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps index order among equal distances
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


# --------------------------------------------------------------------------
# synthetic shapes (canonical frame: symmetry axis along +y)


def _unit_sphere(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _circle(rng, n, r):
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(th), np.zeros(n), r * np.sin(th)], axis=1)


def _torus(rng, n, R, r):
    # rejection sampling gives area-uniform points on the torus
    out = []
    while sum(len(o) for o in out) < n:
        u = rng.uniform(0, 2 * np.pi, 2 * n)
        v = rng.uniform(0, 2 * np.pi, 2 * n)
        keep = rng.uniform(0, 1, 2 * n) < (R + r * np.cos(v)) / (R + r)
        u, v = u[keep], v[keep]
        out.append(np.stack([(R + r * np.cos(v)) * np.cos(u), r * np.sin(v), (R + r * np.cos(v)) * np.sin(u)], axis=1))
    return np.concatenate(out)[:n]


def _disk(rng, n, r, y):
    rad = r * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([rad * np.cos(th), np.full(n, y), rad * np.sin(th)], axis=1)


def _tube(rng, n, r, h):
    th = rng.uniform(0, 2 * np.pi, n)
    y = rng.uniform(-h / 2, h / 2, n)
    return np.stack([r * np.cos(th), y, r * np.sin(th)], axis=1)


def _split(n, weights):
    w = np.asarray(weights, dtype=float)
    counts = np.floor(n * w / w.sum()).astype(int)
    counts[0] += n - counts.sum()
    return counts


def _can(rng, n, r, h, top=True):
    areas = [2 * np.pi * r * h, np.pi * r * r] + ([np.pi * r * r] if top else [])
    c = _split(n, areas)
    parts = [_tube(rng, c[0], r, h), _disk(rng, c[1], r, -h / 2)]
    if top:
        parts.append(_disk(rng, c[2], r, h / 2))
    return np.concatenate(parts)


def _mug(rng, n, r, h):
    # open cup plus a half-ring handle bridging two points on the wall
    hr = 0.3 * h
    handle_len = np.pi * hr
    cup_area = 2 * np.pi * r * h + np.pi * r * r
    c = _split(n, [cup_area, handle_len * 0.25 * h * 4])
    cup = _can(rng, c[0], r, h, top=False)
    a = rng.uniform(-np.pi / 2, np.pi / 2, c[1])
    handle = np.stack([r + hr * np.cos(a), hr * np.sin(a), np.zeros(c[1])], axis=1)
    return np.concatenate([cup, handle])


def _bowl(rng, n, r):
    v = _unit_sphere(rng, n)
    v[:, 1] = -np.abs(v[:, 1])
    return r * v + np.array([0.0, r / 2, 0.0])


def _two_clusters(rng, n, r):
    c = _split(n, [1, 1])
    a = 0.25 * r * _unit_sphere(rng, c[0]) * rng.uniform(0, 1, (c[0], 1)) ** (1 / 3)
    b = 0.25 * r * _unit_sphere(rng, c[1]) * rng.uniform(0, 1, (c[1], 1)) ** (1 / 3)
    return np.concatenate([a - [r, 0, 0], b + [r, 0, 0]])


def canonical_shape(spec: ShapeSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free canonical samples of ``spec`` and its box extents."""
    n, r, h = spec.n_points, spec.radius, spec.height
    thin = max(4 * spec.jitter, 0.01 * r)
    if spec.kind == "circle-ring":
        pts, size = _circle(rng, n, r), (2 * r, thin, 2 * r)
    elif spec.kind == "sphere-shell":
        pts, size = r * _unit_sphere(rng, n), (2 * r,) * 3
    elif spec.kind == "torus":
        rr = spec.minor_radius
        pts, size = _torus(rng, n, r, rr), (2 * (r + rr), 2 * rr, 2 * (r + rr))
    elif spec.kind == "cylinder-can":
        pts, size = _can(rng, n, r, h), (2 * r, h, 2 * r)
    elif spec.kind == "mug-with-handle":
        pts = _mug(rng, n, r, h)
        size = (2 * r + 0.3 * h, h, 2 * r)
        pts = pts - np.array([0.15 * h, 0.0, 0.0])
    elif spec.kind == "bowl":
        pts, size = _bowl(rng, n, r), (2 * r, r, 2 * r)
    else:
        pts, size = _two_clusters(rng, n, r), (2.5 * r, 0.5 * r, 0.5 * r)
    return pts, np.asarray(size, dtype=np.float64)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def synth(spec: ShapeSpec) -> tuple[PointCloud, Pose, tuple[int, int]]:
    """Sample a shape, jitter it, and place it with a random pose.

    Returns the observed cloud, the pose that maps canonical coordinates to
    the observation (``x_obs = R @ x + t``) and the (b0, b1) Betti numbers of
    the underlying space.
    """
    rng = np.random.default_rng(spec.seed)
    pts, size = canonical_shape(spec, rng)
    if spec.jitter > 0:
        pts = pts + rng.normal(0.0, spec.jitter, pts.shape)
    R = random_rotation(rng)
    t = rng.uniform(-spec.translation_range, spec.translation_range, 3)
    observed = pts @ R.T + t
    return PointCloud(observed), Pose(R, t, size), EXPECTED_BETTI[spec.kind]


def add_noise(cloud: PointCloud, std: float = 0.001, seed: int = 0) -> PointCloud:
    """Gaussian point jitter used as a training augmentation."""
    rng = np.random.default_rng(seed)
    return PointCloud(cloud.points + rng.normal(0.0, std, cloud.points.shape), cloud.features)


def rot_x(deg):
    return Rotation.from_euler("x", deg, degrees=True).as_matrix()


def rot_y(deg):
    return Rotation.from_euler("y", deg, degrees=True).as_matrix()


def rot_z(deg):
    return Rotation.from_euler("z", deg, degrees=True).as_matrix()
