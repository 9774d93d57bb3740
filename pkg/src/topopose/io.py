"""Point-cloud and pose files: ASCII XYZ, binary little-endian PLY, pose JSON."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .geometry import PointCloud, Pose

_PLY_TYPES = {
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
    "uchar": "u1", "uint8": "u1", "char": "i1", "int8": "i1",
    "ushort": "<u2", "uint16": "<u2", "short": "<i2", "int16": "<i2",
    "uint": "<u4", "uint32": "<u4", "int": "<i4", "int32": "<i4",
}


def read_cloud(path) -> PointCloud:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if raw.startswith(b"ply"):
        return _read_ply(raw, path)
    return _read_xyz(raw, path)


def write_cloud(path, cloud: PointCloud) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        _write_ply(path, cloud.points)
    else:
        path.write_text("".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in cloud.points.tolist()))


def _read_xyz(raw: bytes, path: Path) -> PointCloud:
    rows = []
    for lineno, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3:
            raise DataError(f"{path}:{lineno}: expected x y z")
        try:
            rows.append([float(p) for p in parts[:3]])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric coordinate") from None
    if not rows:
        raise DataError(f"{path}: no points")
    return PointCloud(np.array(rows))


def _read_ply(raw: bytes, path: Path) -> PointCloud:
    end = raw.find(b"end_header")
    if end < 0:
        raise DataError(f"{path}: PLY header not terminated")
    body_start = raw.index(b"\n", end) + 1
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    if not any(h.strip() == "format binary_little_endian 1.0" for h in header):
        raise DataError(f"{path}: only binary_little_endian PLY is supported")
    count, fields, in_vertex = None, [], False
    for h in header:
        tok = h.split()
        if not tok:
            continue
        if tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                count = int(tok[2])
            elif count is not None:
                break
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise DataError(f"{path}: list properties on vertices are not supported")
            if tok[1] not in _PLY_TYPES:
                raise DataError(f"{path}: unknown PLY type {tok[1]!r}")
            fields.append((tok[2], _PLY_TYPES[tok[1]]))
    names = [f[0] for f in fields]
    if count is None or not {"x", "y", "z"} <= set(names):
        raise DataError(f"{path}: PLY needs a vertex element with x/y/z")
    dt = np.dtype(fields)
    if len(raw) - body_start < dt.itemsize * count:
        raise DataError(f"{path}: PLY body truncated")
    data = np.frombuffer(raw, dtype=dt, count=count, offset=body_start)
    pts = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    return PointCloud(pts)


def _write_ply(path: Path, pts: np.ndarray) -> None:
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(pts)}\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n"
    )
    path.write_bytes(header.encode("ascii") + np.ascontiguousarray(pts, dtype="<f4").tobytes())


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def read_pose(path) -> Pose:
    return Pose.from_json(read_json(path))


def write_pose(path, pose: Pose) -> None:
    Path(path).write_text(json.dumps(pose.to_json()))
