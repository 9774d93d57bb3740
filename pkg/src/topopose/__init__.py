"""Topology-aware keypoint pose estimation on point clouds, at desk scale."""
from .errors import DataError, DegenerateWarning, GraphError, ShapeError, TopologyError
from .geometry import PointCloud, Pose, ShapeSpec, synth
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DataError", "DegenerateWarning", "GraphError", "PointCloud", "Pose",
    "ShapeError", "ShapeSpec", "TopologyError", "synth", "__version__",
]
