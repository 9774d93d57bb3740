import json

import numpy as np
import pytest

from topopose.errors import DataError
from topopose.geometry import PointCloud, ShapeSpec, rot_x, rot_z, synth
from topopose.pipeline import (
    Model, ModelConfig, TrainConfig, cyclic_lr, extract_features, forward, load_config,
    micro_dataset, prepare, train_micro,
)
from topopose.tensor import evaluate


@pytest.fixture(scope="module")
def micro():
    cfg = ModelConfig.micro()
    model = Model(cfg)
    return cfg, model, model.init_params(0), micro_dataset(2, cfg, seed=0)


def test_config_validation():
    assert ModelConfig().d == 256
    with pytest.raises(ValueError):
        ModelConfig(d=100)
    with pytest.raises(ValueError):
        ModelConfig.micro(N_k=8)
    with pytest.raises(ValueError):
        ModelConfig.micro(d_t=64)


def test_default_config_width():
    model = Model(ModelConfig())
    assert model.graph.outputs["F_o"].shape == (1024, 256)


def test_shape_audit(micro):
    cfg, model, params, data = micro
    keys = ["F_o", "kpts", "kpt_features", "heatmap", "R", "t", "s", "nocs", "offsets", "recon"]
    v = evaluate(model.graph, model.bindings(data[0], params), keys)
    expected = {
        "F_o": (cfg.N, cfg.d), "kpts": (cfg.N_k, 3), "kpt_features": (cfg.N_k, cfg.d),
        "heatmap": (cfg.N_k, cfg.N), "R": (3, 3), "t": (3,), "s": (3,), "nocs": (cfg.N_k, 3),
        "offsets": (cfg.N_k, cfg.m_off, 3), "recon": (cfg.N_k * cfg.m_off, 3),
    }
    for k, shape in expected.items():
        assert v[k].shape == shape, k
    np.testing.assert_allclose(v["heatmap"].sum(axis=1), 1.0, atol=1e-12)


def test_feature_layout(micro):
    cfg, model, params, data = micro
    zeroed = {k: (np.zeros_like(v) if k.startswith(("enc.", "fuse")) else v) for k, v in params.items()}
    F = extract_features(data[0], zeroed, cfg)
    assert np.all(F[:, : cfg.d_r] == 0)
    app = np.random.default_rng(0).normal(size=(cfg.N, cfg.d_r))
    inst = prepare(PointCloud(data[0].points), 0, cfg, appearance=app)
    assert np.array_equal(extract_features(inst, params, cfg)[:, : cfg.d_r], app)


def test_topology_input_rigid_invariant():
    cfg = ModelConfig.micro()
    cloud, _, _ = synth(ShapeSpec("torus", n_points=cfg.N, seed=1))
    moved = PointCloud(cloud.points @ (rot_x(50) @ rot_z(20)).T + 0.7)
    a, b = prepare(cloud, 2, cfg), prepare(moved, 2, cfg)
    np.testing.assert_allclose(a.topo, b.topo, atol=1e-7)


def test_forward_deterministic_and_valid(micro):
    cfg, _, params, data = micro
    cloud = PointCloud(data[1].points)
    p1, k1 = forward(cloud, None, 1, params, cfg)
    p2, k2 = forward(cloud, None, 1, params, cfg)
    assert np.array_equal(p1.pose.rotation, p2.pose.rotation)
    assert np.array_equal(p1.recon_cloud, p2.recon_cloud) and np.array_equal(k1.coords, k2.coords)
    p1.pose.check(1e-9)
    rng = np.random.default_rng(3)
    wild = {k: rng.normal(size=v.shape) for k, v in params.items()}
    with np.errstate(over="ignore", under="ignore"):
        R = forward(cloud, None, 1, wild, cfg)[0].pose.rotation
    # the rotation is orthonormal by construction; exp(log s) may leave float range here
    assert np.max(np.abs(R.T @ R - np.eye(3))) <= 1e-9 and abs(np.linalg.det(R) - 1) <= 1e-9


def test_prepare_rejects_small_cloud():
    with pytest.raises(DataError):
        prepare(PointCloud(np.zeros((10, 3)) + np.arange(10)[:, None]), 0, ModelConfig.micro())
    with pytest.raises(DataError):
        prepare(PointCloud(np.random.default_rng(0).normal(size=(200, 3))), 7, ModelConfig.micro())


def test_end_to_end_gradient(micro):
    """Analytic gradient of the total loss against central differences on 20
    randomly chosen parameter entries."""
    cfg, model, params, data = micro
    inst = data[0]
    _, grads = model.loss_and_grad(inst, params)
    rng = np.random.default_rng(11)
    names = sorted(params)
    sizes = np.array([params[k].size for k in names], dtype=float)
    picks = [(names[i], int(rng.integers(params[names[i]].size)))
             for i in rng.choice(len(names), size=20, p=sizes / sizes.sum())]
    h = 1e-5
    a, n = [], []
    for name, j in picks:
        trial = {k: v.copy() for k, v in params.items()}
        trial[name].flat[j] += h
        fp = model.losses(inst, trial)["total"]
        trial[name].flat[j] -= 2 * h
        fm = model.losses(inst, trial)["total"]
        n.append((fp - fm) / (2 * h))
        a.append(grads[name].flat[j])
    a, n = np.array(a), np.array(n)
    assert np.max(np.abs(a - n)) / max(np.abs(a).max(), np.abs(n).max(), 1e-8) <= 1e-3


def test_cyclic_lr_shape():
    lrs = [cyclic_lr(s, 400, 1.0, 3.0) for s in range(400)]
    assert lrs[0] == 1.0 and lrs[50] == 3.0 and lrs[100] == 1.0
    assert min(lrs) >= 1.0 and max(lrs) <= 3.0


def test_zero_lr_constant_curve(micro):
    cfg, _, params, data = micro
    res = train_micro(data, TrainConfig(steps=4, lr_low=0.0, lr_high=0.0), cfg, params=params)
    assert max(res.losses) - min(res.losses) <= 1e-12


def test_training_deterministic(micro):
    cfg, _, _, data = micro
    a = train_micro(data, TrainConfig(steps=5), cfg)
    b = train_micro(data, TrainConfig(steps=5), cfg)
    assert a.losses == b.losses
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"preset": "micro", "n_blocks": 1, "train": {"steps": 7}}))
    model, train = load_config(p)
    assert model.n_blocks == 1 and model.d == 48 and train.steps == 7
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(DataError):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(DataError):
        load_config(p)
