"""Pose, NOCS and reconstruction heads plus the weighted multi-term loss."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateWarning
from .geometry import Pose
from .keypoints import DIV_THRESHOLD, diversity_loss, surface_loss
from .nn import mlp, pairwise_sqdist, run_graph
from .tensor import Graph

M_OFF = 12
SMOOTH_L1_BETA = 1.0
PARALLEL_TOL = 1e-8
_NORM_EPS = 1e-30


@dataclass
class LossWeights:
    pose: float = 0.3
    nocs: float = 2.0
    cd: float = 2.0
    div: float = 10.0
    recon: float = 15.0
    delta: float = 1.0

    def __post_init__(self):
        if min(asdict(self).values()) < 0:
            raise ValueError("loss weights must be non-negative")

    def items(self):
        return asdict(self).items()


LOSS_TERMS = ("pose", "nocs", "cd", "div", "recon", "delta")


@dataclass
class Prediction:
    pose: Pose
    nocs: np.ndarray            # (N_k, 3)
    recon_offsets: np.ndarray   # (N_k, M_off, 3)
    recon_cloud: np.ndarray     # (N_k * M_off, 3)


# --------------------------------------------------------------------------
# rotation from two 3-vectors


def _dot3(g, a, b):
    return g.sum(a * b)


def _cross3(g, a, b):
    s = lambda v, i: g.slice(v, i, i + 1)
    return g.concat([
        s(a, 1) * s(b, 2) - s(a, 2) * s(b, 1),
        s(a, 2) * s(b, 0) - s(a, 0) * s(b, 2),
        s(a, 0) * s(b, 1) - s(a, 1) * s(b, 0),
    ])


def gram_schmidt(g: Graph, r6):
    """Rotation whose first two columns orthonormalise r6[0:3] and r6[3:6]."""
    a1 = g.slice(r6, 0, 3)
    a2 = g.slice(r6, 3, 6)
    b1 = a1 / g.sqrt(_dot3(g, a1, a1) + _NORM_EPS)
    u2 = a2 - b1 * _dot3(g, b1, a2)
    b2 = u2 / g.sqrt(_dot3(g, u2, u2) + _NORM_EPS)
    b3 = _cross3(g, b1, b2)
    return g.concat([g.reshape(b, (3, 1)) for b in (b1, b2, b3)], axis=1)


def rotation_from_6d(r6, fallback=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Numpy Gram-Schmidt with a fixed fallback axis for near-parallel inputs."""
    r6 = np.asarray(r6, dtype=np.float64)
    a1, a2 = r6[:3], r6[3:]
    n1 = np.linalg.norm(a1)
    b1 = a1 / n1 if n1 > 0 else np.array([1.0, 0.0, 0.0])
    if np.linalg.norm(np.cross(b1, a2)) < PARALLEL_TOL * max(np.linalg.norm(a2), 1.0):
        warnings.warn("6D rotation vectors nearly parallel; using fallback axis", DegenerateWarning, stacklevel=2)
        a2 = np.asarray(fallback, dtype=np.float64)
        if abs(b1 @ a2) > 0.9:
            a2 = np.array([0.0, 1.0, 0.0])
    u2 = a2 - b1 * (b1 @ a2)
    b2 = u2 / np.linalg.norm(u2)
    return np.stack([b1, b2, np.cross(b1, b2)], axis=1)


# --------------------------------------------------------------------------
# heads


def _pose_bias(rng, shape):
    b = np.zeros(shape)
    b[0] = 1.0
    b[4] = 1.0  # 6D part starts at the identity
    return b


def _small(rng, shape):
    return rng.normal(0.0, 0.1 / np.sqrt(shape[0]), shape)


def build_pose_head(g: Graph, feats, prefix: str = "head.pose"):
    """[mean | max] pooling -> perceptron -> (r6, t, log s), all in the
    normalized frame of the network input."""
    d = feats.shape[1]
    pooled = g.concat([g.mean(feats, axis=0), g.max(feats, axis=0)])
    out = mlp(g, pooled, prefix, (2 * d, d, 12), last_init=_small, last_bias_init=_pose_bias)
    r6 = g.slice(out, 0, 6)
    return {
        "r6": r6,
        "R": gram_schmidt(g, r6),
        "t": g.slice(out, 6, 9),
        "log_s": g.slice(out, 9, 12),
    }


def build_nocs_head(g: Graph, feats, prefix: str = "head.nocs"):
    d = feats.shape[1]
    return mlp(g, feats, prefix, (d, d, 3))


def build_recon_head(g: Graph, feats, m_off: int = M_OFF, prefix: str = "head.recon"):
    n, d = feats.shape
    out = mlp(g, feats, prefix, (d, d, 3 * m_off), last_init=_small)
    return g.reshape(out, (n, m_off, 3))


def pose_head(feats, params=None, seed: int = 0) -> Pose:
    out, _ = run_graph(lambda g, F: build_pose_head(g, F), {"F": np.asarray(feats, float)}, params, seed)
    return Pose(_checked_rotation(out["r6"], out["R"]), out["t"], np.exp(out["log_s"]))


def _checked_rotation(r6, R):
    a1, a2 = r6[:3], r6[3:]
    if np.linalg.norm(np.cross(a1, a2)) < PARALLEL_TOL * max(np.linalg.norm(a1) * np.linalg.norm(a2), 1e-300):
        return rotation_from_6d(r6)
    return R


# --------------------------------------------------------------------------
# losses


def chamfer_graph(g: Graph, a, b):
    d = pairwise_sqdist(g, a, b)
    return g.mean(g.sqrt(g.min(d, axis=1))) + g.mean(g.sqrt(g.min(d, axis=0)))


def chamfer(A, B) -> float:
    out, _ = run_graph(chamfer_graph, {"a": np.asarray(A, float), "b": np.asarray(B, float)})
    return float(out)


def smooth_l1(g: Graph, x, beta: float = SMOOTH_L1_BETA):
    """Elementwise Huber-style loss: 0.5 x^2 / beta below beta, |x| - beta/2 above."""
    ax = g.relu(x) + g.relu(-x)
    small = -g.maximum(-ax, -beta)  # min(|x|, beta)
    return small * small * (0.5 / beta) + (ax - small)


def nocs_target(g: Graph, pts, R, t, s):
    """u = R (p - t) / |s|, row-wise for pts (n, 3)."""
    rel = pts - g.reshape(t, (1, 3))
    return g.matmul(rel, g.transpose(R)) / g.sqrt(_dot3(g, s, s))


def build_losses(g: Graph, pred: dict, kpts, cloud, gt: dict, weights: LossWeights,
                 th: float = DIV_THRESHOLD):
    """Every loss term plus the weighted total, as graph nodes.

    ``pred`` holds metric-frame nodes R, t, s, nocs, offsets, recon;
    ``gt`` holds R, t, s. kpts and cloud are in metres.
    """
    dR = pred["R"] - gt["R"]
    dt = pred["t"] - gt["t"]
    ds = pred["s"] - gt["s"]
    terms = {
        "pose": g.sqrt(g.sum(dR * dR)) + g.sqrt(g.sum(dt * dt)) + g.sqrt(g.sum(ds * ds)),
        "nocs": g.mean(smooth_l1(g, pred["nocs"] - nocs_target(g, kpts, gt["R"], gt["t"], gt["s"]))),
        "cd": surface_loss(g, kpts, cloud),
        "div": diversity_loss(g, kpts, th),
        "recon": chamfer_graph(g, pred["recon"], cloud),
        "delta": g.mean(g.sqrt(g.sum(pred["offsets"] * pred["offsets"], axis=-1))),
    }
    total = None
    for name, w in weights.items():
        term = terms[name] * w
        total = term if total is None else total + term
    terms["total"] = total
    return terms


def compute_losses(pred: Prediction, kpts, gt_pose: Pose, gt_cloud, weights: LossWeights | None = None) -> dict:
    """Loss breakdown for numpy predictions (the training path builds the
    same terms inside the model graph)."""
    weights = weights or LossWeights()
    coords = kpts.coords if hasattr(kpts, "coords") else np.asarray(kpts, float)
    arrays = {
        "R": pred.pose.rotation, "t": pred.pose.translation, "s": pred.pose.size,
        "nocs": pred.nocs, "offsets": pred.recon_offsets, "recon": pred.recon_cloud,
        "kpts": coords, "cloud": np.asarray(gt_cloud, float),
        "gR": gt_pose.rotation, "gt": gt_pose.translation, "gs": gt_pose.size,
    }

    def build(g, R, t, s, nocs, offsets, recon, kpts, cloud, gR, gt, gs):
        p = {"R": R, "t": t, "s": s, "nocs": nocs, "offsets": offsets, "recon": recon}
        return build_losses(g, p, kpts, cloud, {"R": gR, "t": gt, "s": gs}, weights)

    out, _ = run_graph(build, arrays)
    return {k: float(v) for k, v in out.items()}


def weighted_total(breakdown: dict, weights: LossWeights) -> float:
    total = None
    for name, w in weights.items():
        term = breakdown[name] * w
        total = term if total is None else total + term
    return total
