import numpy as np
import pytest

from conftest import gradcheck_builder
from topopose.errors import DegenerateWarning
from topopose.geometry import Pose, rot_x, rot_z
from topopose.heads import (
    LOSS_TERMS, LossWeights, Prediction, build_losses, build_nocs_head, build_pose_head,
    build_recon_head, chamfer, compute_losses, gram_schmidt, nocs_target,
    pose_head, rotation_from_6d, smooth_l1, weighted_total,
)
from topopose.nn import run_graph
from topopose.tensor import Graph, evaluate


def test_pose_invariants_random_params(rng):
    g = Graph()
    F = g.input("F", (10, 8))
    out = build_pose_head(g, F)
    g.output("R", out["R"])
    names = g.init_params(0)
    feats = rng.normal(size=(10, 8))
    for _ in range(1000):
        params = {k: rng.normal(size=v.shape) for k, v in names.items()}
        R = evaluate(g, {"F": feats, **params})["R"]
        assert np.max(np.abs(R.T @ R - np.eye(3))) <= 1e-9
        assert abs(np.linalg.det(R) - 1) <= 1e-9


def test_gram_schmidt_fixed_point():
    R, _ = run_graph(gram_schmidt, {"r6": np.array([1.0, 0, 0, 0, 1, 0])})
    assert np.array_equal(R, np.eye(3))
    np.testing.assert_allclose(rotation_from_6d([1.0, 0, 0, 0, 1, 0]), np.eye(3))


def test_gram_schmidt_recovers_rotation(rng):
    R0 = rot_x(20) @ rot_z(-65)
    r6 = np.concatenate([R0[:, 0] * 3.0, R0[:, 1] + 0.7 * R0[:, 0]])
    R, _ = run_graph(gram_schmidt, {"r6": r6})
    np.testing.assert_allclose(R, R0, atol=1e-12)


def test_parallel_6d_falls_back():
    with pytest.warns(DegenerateWarning):
        R = rotation_from_6d([1.0, 0, 0, 2.0, 0, 0])
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1) < 1e-12


def test_pose_head_permutation_invariant(rng):
    F = rng.normal(size=(16, 8))
    a = pose_head(F, seed=2)
    b = pose_head(F[rng.permutation(16)], seed=2)
    for x, y in ((a.rotation, b.rotation), (a.translation, b.translation), (a.size, b.size)):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


def test_head_shapes(rng):
    out, _ = run_graph(
        lambda g, F: {"nocs": build_nocs_head(g, F), "recon": build_recon_head(g, F, 12)},
        {"F": rng.normal(size=(9, 8))},
    )
    assert out["nocs"].shape == (9, 3) and out["recon"].shape == (9, 12, 3)


def test_chamfer_examples(rng):
    A = rng.normal(size=(10, 3))
    assert chamfer(A, A) == 0.0
    assert chamfer(np.zeros((1, 3)), np.array([[1.0, 0, 0]])) == 2.0


def test_chamfer_oracle(rng):
    for _ in range(100):
        A, B = rng.normal(size=(int(rng.integers(1, 12)), 3)), rng.normal(size=(int(rng.integers(1, 12)), 3))
        D = np.linalg.norm(A[:, None] - B[None], axis=-1)
        assert abs(chamfer(A, B) - (D.min(axis=1).mean() + D.min(axis=0).mean())) < 1e-12


def test_smooth_l1_values():
    x = np.array([-3.0, -1.0, -0.5, 0.0, 0.25, 1.0, 2.0])
    out, _ = run_graph(lambda g, x: smooth_l1(g, x), {"x": x})
    ref = np.where(np.abs(x) < 1, 0.5 * x ** 2, np.abs(x) - 0.5)
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-15)


def test_nocs_target_formula(rng):
    p, R, t, s = rng.normal(size=(5, 3)), rot_z(33), rng.normal(size=3), np.array([0.3, 0.4, 1.2])
    out, _ = run_graph(nocs_target, {"pts": p, "R": R, "t": t, "s": s})
    np.testing.assert_allclose(out, (p - t) @ R.T / np.linalg.norm(s), atol=1e-14)


def perfect_fixture():
    # eight keypoints on a 5 cm lattice: on the surface and th-separated
    cloud = np.array([[x, y, z] for x in (0, 0.05) for y in (0, 0.05) for z in (0, 0.05)]) + 0.2
    gt = Pose(rot_x(30) @ rot_z(10), np.array([0.1, -0.2, 0.5]), np.array([0.05, 0.05, 0.05]))
    nocs = (cloud - gt.translation) @ gt.rotation.T / np.linalg.norm(gt.size)
    offsets = np.zeros((8, 12, 3))
    pred = Prediction(gt, nocs, offsets, np.repeat(cloud, 12, axis=0))
    return pred, cloud, gt


def test_perfect_prediction_zero_loss():
    pred, cloud, gt = perfect_fixture()
    out = compute_losses(pred, cloud, gt, cloud)
    for k in (*LOSS_TERMS, "total"):
        assert abs(out[k]) <= 1e-10, k


def test_rotation_term_frobenius():
    pred, cloud, gt = perfect_fixture()
    gt = Pose(rot_z(180), pred.pose.translation, pred.pose.size)
    pred.pose = Pose(np.eye(3), gt.translation, gt.size)
    out = compute_losses(pred, cloud, gt, cloud)
    assert abs(out["pose"] - 2 * np.sqrt(2)) < 1e-12


def test_breakdown_reweights_exactly(rng):
    pred, cloud, gt = perfect_fixture()
    pred.nocs = pred.nocs + rng.normal(size=pred.nocs.shape)
    pred.recon_offsets = rng.normal(size=pred.recon_offsets.shape) * 0.01
    pred.recon_cloud = (cloud[:, None] + pred.recon_offsets).reshape(-1, 3)
    w = LossWeights()
    out = compute_losses(pred, cloud + 0.003, gt, cloud, w)
    assert weighted_total(out, w) == out["total"]
    assert out["total"] > 0


def test_loss_weights_defaults():
    assert dict(LossWeights().items()) == {"pose": 0.3, "nocs": 2.0, "cd": 2.0, "div": 10.0, "recon": 15.0, "delta": 1.0}
    with pytest.raises(ValueError):
        LossWeights(pose=-1.0)


def test_head_gradients(rng):
    def build(g, F):
        p = build_pose_head(g, F)
        return g.concat([g.reshape(p["R"], (9,)), p["t"], p["log_s"],
                         g.reshape(build_nocs_head(g, F), (21,)),
                         g.reshape(build_recon_head(g, F, 4), (84,))])
    rep = gradcheck_builder(build, {"F": rng.normal(size=(7, 6))})
    assert rep.ok, str(rep)


@pytest.mark.parametrize("term", LOSS_TERMS)
def test_loss_term_gradients(term, rng):
    n, m = 6, 3

    def build(g, R6, t, ls, nocs, off, kp, cloud, gR, gt, gs):
        R = gram_schmidt(g, R6)
        s = g.exp(ls)
        recon = g.reshape(g.reshape(kp, (n, 1, 3)) + off, (n * m, 3))
        pred = {"R": R, "t": t, "s": s, "nocs": nocs, "offsets": off, "recon": recon}
        return build_losses(g, pred, kp, cloud, {"R": gR, "t": gt, "s": gs}, LossWeights(), th=0.5)[term]

    arrays = {
        "R6": rng.normal(size=6), "t": rng.normal(size=3), "ls": rng.normal(size=3) * 0.1,
        "nocs": rng.normal(size=(n, 3)), "off": rng.normal(size=(n, m, 3)) * 0.1,
        "kp": rng.normal(size=(n, 3)) * 0.4, "cloud": rng.normal(size=(15, 3)),
        "gR": rot_x(40), "gt": rng.normal(size=3), "gs": np.array([0.5, 0.7, 0.3]),
    }
    rep = gradcheck_builder(build, arrays)
    assert rep.ok, str(rep)
