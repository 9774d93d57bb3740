"""Instance-adaptive keypoint detection and the two keypoint losses."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateWarning
from .nn import layer_norm, linear, mlp, pairwise_sqdist, run_graph
from .tensor import Graph

TAU = 0.1
DIV_THRESHOLD = 0.01  # metres
COS_EPS = 1e-12


@dataclass
class KeypointSet:
    coords: np.ndarray    # (N_k, 3)
    features: np.ndarray  # (N_k, d)
    heatmap: np.ndarray   # (N_k, N)

    def __len__(self):
        return len(self.coords)


def _cross_attention(g: Graph, q, kv, name: str, d: int):
    """Single-head scaled dot-product attention of ``q`` over ``kv`` rows."""
    qq = linear(g, q, f"{name}.q", d, d, bias=False)
    kk = linear(g, kv, f"{name}.k", d, d, bias=False)
    vv = linear(g, kv, f"{name}.v", d, d, bias=False)
    att = g.softmax(g.matmul(qq, g.transpose(kk)) * (1.0 / np.sqrt(d)), axis=-1)
    return linear(g, g.matmul(att, vv), f"{name}.o", d, d, bias=False)


def cosine_matrix(g: Graph, a, b, eps: float = COS_EPS):
    """cos(a_j, b_i) for all row pairs; a zero row gives 0 against everything."""
    na = g.sqrt(g.sum(a * a, axis=-1, keepdims=True))
    nb = g.sqrt(g.sum(b * b, axis=-1, keepdims=True))
    return g.matmul(a, g.transpose(b)) / (g.matmul(na, g.transpose(nb)) + eps)


def build_detector(g: Graph, feats, points, n_kpts: int, tau: float = TAU, prefix: str = "iakd"):
    """Add the detector to ``g``.

    feats (N, d) and points (N, 3) are nodes. Returns nodes for the keypoint
    coordinates (same frame as ``points``), features and heatmap.
    """
    d = feats.shape[1]
    queries = g.param(f"{prefix}.queries", (n_kpts, d))
    # pre-norm cross-attention then feed-forward, both residual
    fn = layer_norm(g, feats, f"{prefix}.ln_kv", d)
    q = queries + _cross_attention(g, layer_norm(g, queries, f"{prefix}.ln_q", d), fn, f"{prefix}.attn", d)
    q = q + mlp(g, layer_norm(g, q, f"{prefix}.ln_ff", d), f"{prefix}.ffn", (d, d, d))
    heat = g.softmax(cosine_matrix(g, q, feats) * (1.0 / tau), axis=-1)
    coords = g.matmul(heat, points)
    pos = mlp(g, coords, f"{prefix}.pos", (3, d, d))
    return {"coords": coords, "features": g.matmul(heat, feats) + pos, "heatmap": heat}


def detect(feats, points, params: dict | None = None, n_kpts: int = 96, tau: float = TAU, seed: int = 0) -> KeypointSet:
    """Run the detector on numpy inputs. Missing parameters are initialised from ``seed``."""
    F = np.asarray(feats, dtype=np.float64)
    P = np.asarray(points, dtype=np.float64)
    if F.ndim != 2 or P.shape != (len(F), 3):
        raise DataError(f"features {F.shape} and points {P.shape} do not align")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if np.any(np.linalg.norm(F, axis=1) == 0):
        warnings.warn("zero-norm feature row; its cosine similarity is 0", DegenerateWarning, stacklevel=2)
    out, _ = run_graph(
        lambda g, F, P: build_detector(g, F, P, n_kpts, tau),
        {"F": F, "P": P}, params, seed,
    )
    return KeypointSet(out["coords"], out["features"], out["heatmap"])


def surface_loss(g: Graph, kpts, cloud):
    """Mean distance from each keypoint to its nearest cloud point."""
    nearest = g.min(pairwise_sqdist(g, kpts, cloud), axis=1)
    return g.mean(g.sqrt(nearest))


def diversity_loss(g: Graph, kpts, th: float = DIV_THRESHOLD):
    """Sum over ordered pairs i != j of max(0, th - |p_i - p_j|)."""
    n = kpts.shape[0]
    dist = g.sqrt(pairwise_sqdist(g, kpts, kpts))
    off_diag = g.const(1.0 - np.eye(n))
    return g.sum(g.relu(th - dist) * off_diag)


def loss_surface(kpts, cloud) -> float:
    out, _ = run_graph(surface_loss, {"kpts": np.asarray(kpts, float), "cloud": np.asarray(cloud, float)})
    return float(out)


def loss_diversity(kpts, th: float = DIV_THRESHOLD) -> float:
    k = np.asarray(kpts, float)
    if len(k) < 2:
        raise DataError("diversity loss needs at least two keypoints")
    out, _ = run_graph(lambda g, kpts: diversity_loss(g, kpts, th), {"kpts": k})
    return float(out)
