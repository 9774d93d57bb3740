"""End-to-end model: point encoder + topology fusion -> keypoints -> local and
global aggregation -> heads, and a small deterministic training loop."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .aggregation import BACKWARD_KINDS, BLOCK_KINDS, build_lgfa, build_mgsa, one_hot
from .errors import DataError
from .geometry import (
    CATEGORY_KINDS, PointCloud, Pose, ShapeSpec, add_noise, downsample, knn, normalize, synth,
)
from .heads import (
    LOSS_TERMS, LossWeights, Prediction, _checked_rotation,
    build_losses, build_nocs_head, build_pose_head, build_recon_head,
)
from .keypoints import KeypointSet, build_detector
from .metrics import MetricReport, evaluate_set, symmetry_for
from .nn import linear
from .serialization import METHODS
from .tensor import Adam, Graph, evaluate, value_and_grad
from .topology import FEATURE_DIM, topo_feature


@dataclass
class ModelConfig:
    N: int = 1024
    N_k: int = 96
    K: int = 16
    d: int = 256
    d_p: int = 128
    d_r: int = 128
    d_t: int = FEATURE_DIM
    d_state: int = 16
    n_blocks: int = 6
    expand: int = 2
    serialization: str = "hilbert"
    bits: int = 10
    block_kind: str = "twinmamba"
    backward_kind: str = "CF"
    tau: float = 0.1
    m_off: int = 12
    k_encoder: int = 16
    slope: float = 0.2
    use_topology: bool = True

    def __post_init__(self):
        if self.d != self.d_r + self.d_p:
            raise ValueError(f"d must equal d_r + d_p ({self.d} != {self.d_r} + {self.d_p})")
        if self.d_t != FEATURE_DIM:
            raise ValueError(f"d_t is fixed at {FEATURE_DIM} by the topology feature layout")
        ints = ("N", "N_k", "K", "d", "d_p", "d_r", "d_state", "expand", "bits", "m_off", "k_encoder")
        if any(getattr(self, k) <= 0 for k in ints) or self.n_blocks < 0 or not self.tau > 0:
            raise ValueError("model dimensions must be positive")
        if self.N_k <= self.K:
            raise ValueError("N_k must exceed K")
        if self.N <= self.k_encoder:
            raise ValueError("N must exceed k_encoder")
        if self.serialization not in METHODS:
            raise ValueError(f"unknown serialization {self.serialization!r}")
        if self.block_kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.block_kind!r}")
        if self.backward_kind not in BACKWARD_KINDS:
            raise ValueError(f"unknown backward branch {self.backward_kind!r}")

    @property
    def d_inner(self) -> int:
        return self.expand * self.d

    @classmethod
    def micro(cls, **kw) -> "ModelConfig":
        base = dict(N=128, N_k=16, K=8, d=48, d_p=24, d_r=24, d_state=4, n_blocks=2, k_encoder=8)
        base.update(kw)
        return cls(**base)


@dataclass
class TrainConfig:
    steps: int = 500
    lr_low: float = 2e-5
    lr_high: float = 5e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 8
    seed: int = 0
    noise: float = 0.0  # point jitter augmentation (metres), off by default

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if not 0 <= self.lr_low <= self.lr_high:
            raise ValueError("need 0 <= lr_low <= lr_high")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")


def cyclic_lr(step: int, total: int, low: float, high: float) -> float:
    """Triangular wave starting at ``low`` with period total/4 steps."""
    period = max(total / 4.0, 1.0)
    phase = (step % period) / period
    return low + (high - low) * (1.0 - abs(2.0 * phase - 1.0))


def load_config(path):
    """JSON config with ModelConfig and/or TrainConfig fields (flat or under
    "model"/"train" keys). Unknown keys are rejected."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: config must be a JSON object")
    preset = raw.pop("preset", None)
    m_keys = {f.name for f in fields(ModelConfig)}
    t_keys = {f.name for f in fields(TrainConfig)}
    model_kw = dict(raw.pop("model", {}))
    train_kw = dict(raw.pop("train", {}))
    for k, v in raw.items():
        if k in m_keys:
            model_kw[k] = v
        elif k in t_keys:
            train_kw[k] = v
        else:
            raise DataError(f"{path}: unknown config key {k!r}")
    try:
        model = ModelConfig.micro(**model_kw) if preset == "micro" else ModelConfig(**model_kw)
        train = TrainConfig(**train_kw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
    return model, train


# --------------------------------------------------------------------------
# instances


@dataclass
class Instance:
    """A cloud prepared for the network: downsampled, normalized, topology cached."""

    points: np.ndarray        # (N, 3) metres
    normalized: np.ndarray    # (N, 3)
    centroid: np.ndarray
    scale: float
    topo: np.ndarray          # (d_t,)
    category: int
    appearance: np.ndarray | None = None
    pose: Pose | None = None
    symmetry: str = "none"


def prepare(cloud: PointCloud, category: int, config: ModelConfig, pose: Pose | None = None,
            appearance=None, seed: int = 0, symmetry: str = "none") -> Instance:
    one_hot(category)
    if len(cloud) > config.N:
        idx_cloud = downsample(cloud, config.N, seed)
    elif len(cloud) == config.N:
        idx_cloud = cloud
    else:
        raise DataError(f"cloud has {len(cloud)} points, model expects {config.N}")
    norm, centroid, scale = normalize(idx_cloud)
    if config.use_topology:
        topo = topo_feature(norm.points, seed=seed).vector
    else:
        topo = np.zeros(config.d_t)
    if appearance is not None:
        appearance = np.asarray(appearance, dtype=np.float64)
        if appearance.shape != (config.N, config.d_r):
            raise DataError(f"appearance must be {config.N} x {config.d_r}, got {appearance.shape}")
    return Instance(idx_cloud.points, norm.points, centroid, scale, topo, int(category),
                    appearance, pose, symmetry)


# --------------------------------------------------------------------------
# model graph


class Model:
    """The whole network as one static graph for a given config."""

    def __init__(self, config: ModelConfig, weights: LossWeights | None = None):
        self.config = config
        self.weights = weights or LossWeights()
        self.graph = self._build()

    def _build(self) -> Graph:
        c = self.config
        g = Graph()
        pts = g.input("points", (c.N, 3))
        app = g.input("appearance", (c.N, c.d_r))
        topo = g.input("topo", (c.d_t,))
        onehot = g.input("category", (6,))
        centroid = g.input("centroid", (3,))
        scale = g.input("scale", (1,))

        # stand-in point encoder: per-point perceptron + one knn max-pool round
        h = g.relu(linear(g, pts, "enc.point", 3, c.d_p))
        nbr = g.indices(lambda p: knn(p, c.k_encoder), [pts], (c.N, c.k_encoder), label="enc.knn")
        pooled = g.max(g.gather(h, nbr), axis=1)
        f_p = g.relu(linear(g, g.concat([h, pooled]), "enc.mix", 2 * c.d_p, c.d_p))
        # topology vector broadcast to every point and fused with F_p
        f_t = g.const(np.ones((c.N, 1))) * g.reshape(topo, (1, c.d_t))
        f_f = g.relu(linear(g, g.concat([f_p, f_t]), "fuse", c.d_p + c.d_t, c.d_p))
        f_o = g.output("F_o", g.concat([app, f_f]))

        kp = build_detector(g, f_o, pts, c.N_k, c.tau)
        local = build_lgfa(g, kp["features"], kp["coords"], c.K, c.slope)
        glob = build_mgsa(
            g, local, kp["coords"], onehot, c.n_blocks, c.d_inner, c.d_state,
            c.serialization, c.bits, c.block_kind, c.backward_kind,
        )

        # heads work in the normalized frame; map back to metres here
        pose = build_pose_head(g, glob)
        R = g.output("R", pose["R"])
        g.output("r6", pose["r6"])
        t = g.output("t", centroid + scale * pose["t"])
        s = g.output("s", scale * g.exp(pose["log_s"]))
        nocs = g.output("nocs", build_nocs_head(g, glob))
        offsets = g.output("offsets", build_recon_head(g, glob, c.m_off) * scale)
        kp_m = g.output("kpts", kp["coords"] * scale + g.reshape(centroid, (1, 3)))
        g.output("kpt_features", kp["features"])
        g.output("heatmap", kp["heatmap"])
        recon = g.output("recon", g.reshape(
            g.reshape(kp_m, (c.N_k, 1, 3)) + offsets, (c.N_k * c.m_off, 3)))

        cloud = g.input("cloud", (c.N, 3))
        gt = {"R": g.input("gt_R", (3, 3)), "t": g.input("gt_t", (3,)), "s": g.input("gt_s", (3,))}
        terms = build_losses(
            g, {"R": R, "t": t, "s": s, "nocs": nocs, "offsets": offsets, "recon": recon},
            kp_m, cloud, gt, self.weights,
        )
        for name, node in terms.items():
            g.output(f"loss.{name}", node)
        return g

    def init_params(self, seed: int = 0) -> dict:
        return self.graph.init_params(seed)

    def bindings(self, inst: Instance, params: dict) -> dict:
        c = self.config
        b = dict(params)
        b.update(
            points=inst.normalized,
            appearance=inst.appearance if inst.appearance is not None else np.zeros((c.N, c.d_r)),
            # log1p keeps Betti counts (up to N) on the scale of the entropies
            topo=np.log1p(inst.topo),
            category=one_hot(inst.category),
            centroid=inst.centroid,
            scale=np.array([inst.scale]),
            cloud=inst.points,
        )
        if inst.pose is not None:
            b.update(gt_R=inst.pose.rotation, gt_t=inst.pose.translation, gt_s=inst.pose.size)
        return b

    def predict(self, inst: Instance, params: dict) -> tuple[Prediction, KeypointSet]:
        keys = ["R", "r6", "t", "s", "nocs", "offsets", "recon", "kpts", "kpt_features", "heatmap"]
        v = evaluate(self.graph, self.bindings(inst, params), keys)
        pose = Pose(_checked_rotation(v["r6"], v["R"]), v["t"], v["s"])
        pred = Prediction(pose, v["nocs"], v["offsets"], v["recon"])
        return pred, KeypointSet(v["kpts"], v["kpt_features"], v["heatmap"])

    def losses(self, inst: Instance, params: dict) -> dict:
        if inst.pose is None:
            raise DataError("loss evaluation needs a ground-truth pose")
        keys = [f"loss.{k}" for k in (*LOSS_TERMS, "total")]
        v = evaluate(self.graph, self.bindings(inst, params), keys)
        return {k[5:]: float(v[k]) for k in keys}

    def loss_and_grad(self, inst: Instance, params: dict):
        vals, grads = value_and_grad(self.graph, "loss.total", self.bindings(inst, params))
        return float(vals["__output__"]), {k: grads[k] for k in params}


def extract_features(inst: Instance, params: dict, config: ModelConfig) -> np.ndarray:
    model = Model(config)
    return evaluate(model.graph, model.bindings(inst, params), ["F_o"])["F_o"]


def forward(cloud: PointCloud, appearance, category: int, params: dict, config: ModelConfig,
            seed: int = 0) -> tuple[Prediction, KeypointSet]:
    inst = prepare(cloud, category, config, appearance=appearance, seed=seed)
    return Model(config).predict(inst, params)


# --------------------------------------------------------------------------
# training


def micro_dataset(n: int = 8, config: ModelConfig | None = None, seed: int = 0,
                  radius: float = 0.1, jitter: float = 0.001) -> list[Instance]:
    """Synthetic tabletop-scale instances cycling through the six categories."""
    config = config or ModelConfig.micro()
    out = []
    for i in range(n):
        cat = i % len(CATEGORY_KINDS)
        kind = CATEGORY_KINDS[cat]
        spec = ShapeSpec(kind, radius=radius, minor_radius=0.3 * radius, height=radius,
                         jitter=jitter, n_points=config.N, seed=seed * 1000 + i)
        cloud, pose, _ = synth(spec)
        out.append(prepare(cloud, cat, config, pose=pose, seed=seed, symmetry=symmetry_for(kind)))
    return out


@dataclass
class TrainResult:
    params: dict
    losses: list = field(default_factory=list)
    lrs: list = field(default_factory=list)


def train_micro(dataset: list[Instance], train: TrainConfig, config: ModelConfig,
                params: dict | None = None, log=None) -> TrainResult:
    """Adam on the mean total loss over mini-batches drawn in a fixed order."""
    if not dataset:
        raise DataError("empty training set")
    model = Model(config)
    params = {k: v.copy() for k, v in (params or model.init_params(train.seed)).items()}
    opt = Adam(params, lr=train.lr_high, betas=train.betas, eps=train.eps)
    rng = np.random.default_rng([train.seed, 0x7EA1])
    result = TrainResult(params)
    n = len(dataset)
    for step in range(train.steps):
        if train.batch_size >= n:
            batch = range(n)
        else:
            batch = rng.choice(n, size=train.batch_size, replace=False).tolist()
        total = 0.0
        grads = {k: np.zeros_like(v) for k, v in params.items()}
        for i in batch:
            inst = dataset[i]
            if train.noise > 0:
                inst = _jittered(inst, train.noise, seed=step * 7919 + i)
            loss, g = model.loss_and_grad(inst, params)
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at step {step} (instance {i})")
            total += loss
            for k in grads:
                grads[k] += g[k]
        m = len(batch)
        for k in grads:
            grads[k] /= m
        lr = cyclic_lr(step, train.steps, train.lr_low, train.lr_high)
        result.losses.append(total / m)
        result.lrs.append(lr)
        opt.step(grads, lr=lr)
        if log is not None:
            log(step, total / m, lr)
    return result


def _jittered(inst: Instance, std: float, seed: int) -> Instance:
    noisy = add_noise(PointCloud(inst.normalized), std / inst.scale, seed).points
    return Instance(inst.points, noisy, inst.centroid, inst.scale, inst.topo, inst.category,
                    inst.appearance, inst.pose, inst.symmetry)


def evaluate_instances(model: Model, params: dict, dataset: list[Instance]) -> MetricReport:
    preds = [model.predict(inst, params)[0].pose for inst in dataset]
    return evaluate_set(preds, [(inst.pose, inst.symmetry) for inst in dataset])
