import numpy as np
import pytest

from topopose import kernels
from topopose.errors import GraphError, ShapeError
from topopose.tensor import (
    Adam, Graph, backward, check_gradients, evaluate, register_op, value_and_grad, weights,
)


def test_doubling():
    g = Graph()
    x = g.input("x", (2,))
    g.output("y", x + x)
    assert evaluate(g, {"x": np.array([1.0, 2.0])})["y"].tolist() == [2.0, 4.0]


def test_softmax_uniform():
    g = Graph()
    x = g.input("x", (3,))
    g.output("y", g.softmax(x))
    np.testing.assert_allclose(evaluate(g, {"x": np.zeros(3)})["y"], np.full(3, 1 / 3), rtol=0, atol=1e-15)


def test_identity_matmul():
    g = Graph()
    v = g.input("v", (3,))
    g.output("y", g.matmul(g.const(np.eye(3)), v))
    assert evaluate(g, {"v": np.array([1.0, 2.0, 3.0])})["y"].tolist() == [1.0, 2.0, 3.0]


def test_power_rule():
    g = Graph()
    x = g.input("x", (1,))
    g.output("y", x * x)
    assert backward(g, "y", {"x": np.array([3.0])})["x"].tolist() == [6.0]


def test_bilinear_grad():
    g = Graph()
    a, b = g.input("a", (2,)), g.input("b", (2,))
    g.output("y", g.sum(a * b))
    grads = backward(g, "y", {"a": np.array([1.0, 2.0]), "b": np.array([3.0, 4.0])})
    assert grads["a"].tolist() == [3.0, 4.0]


def test_scan_gradient_matches_fd():
    g = Graph()
    x = g.input("x", (2,))
    g.output("y", g.sum(g.scan(g.const(np.array([0.5, 0.5])), x)))
    rep = check_gradients(g, "y", {"x": np.array([0.3, -1.2])}, rtol=1e-6)
    assert rep.ok, str(rep)


def test_constant_graph_zero_gradients():
    g = Graph()
    p = g.param("p", (3,))
    g.output("y", g.sum(g.const(np.ones(3)) * 2.0) + g.sum(p * 0.0))
    grads = backward(g, "y", g.init_params(0))
    assert np.all(grads["p"] == 0)


def test_corrupted_adjoint_is_flagged():
    register_op("bad_square", lambda v, a: v[0] ** 2, lambda g, v, out, a: [3.0 * v[0] * g])
    g = Graph()
    p = g.param("p", (4,))
    g.output("y", g.sum(g.apply("bad_square", [p])))
    rep = check_gradients(g, "y", g.init_params(3))
    assert rep.flagged == ["p"]


def test_shape_mismatch_raises():
    g = Graph()
    a, b = g.input("a", (2, 3)), g.input("b", (2, 3))
    with pytest.raises(ShapeError):
        g.matmul(a, b)


def test_missing_binding_raises():
    g = Graph()
    g.output("y", g.input("x", (2,)) * 2.0)
    with pytest.raises(GraphError):
        evaluate(g, {})


def test_param_sharing_accumulates():
    g = Graph()
    p1 = g.param("w", (2,))
    p2 = g.param("w", (2,))
    assert p1 is p2
    g.output("y", g.sum(p1 * 2.0) + g.sum(p2 * 3.0))
    assert backward(g, "y", g.init_params(0))["w"].tolist() == [5.0, 5.0]


def test_init_independent_of_declaration_order():
    g1, g2 = Graph(), Graph()
    g1.param("a", (3,)); g1.param("b", (3,))
    g2.param("b", (3,)); g2.param("a", (3,))
    p1, p2 = g1.init_params(5), g2.init_params(5)
    assert all(np.array_equal(p1[k], p2[k]) for k in ("a", "b"))


def test_value_and_grad_matches_evaluate(rng):
    g = Graph()
    x = g.input("x", (4, 3))
    w = g.param("w", (3, 2))
    g.output("y", g.sum(g.softplus(g.matmul(x, w))))
    b = {"x": rng.normal(size=(4, 3)), **g.init_params(0)}
    vals, grads = value_and_grad(g, "y", b)
    assert vals["__output__"] == evaluate(g, b)["y"]
    assert grads["w"].shape == (3, 2)


@pytest.mark.parametrize("op", ["exp", "softplus", "silu", "relu", "sqrt", "log"])
def test_unary_gradients(op, rng):
    g = Graph()
    x = g.input("x", (5,))
    g.output("y", g.sum(getattr(g, op)(x) * g.const(rng.normal(size=5))))
    rep = check_gradients(g, "y", {"x": rng.uniform(0.2, 2.0, 5)})
    assert rep.ok, str(rep)


@pytest.mark.parametrize("reduce", ["sum", "mean", "max", "min"])
def test_reduction_gradients(reduce, rng):
    g = Graph()
    x = g.input("x", (4, 5))
    g.output("y", g.sum(getattr(g, reduce)(x, axis=1) * g.const(rng.normal(size=4))))
    assert check_gradients(g, "y", {"x": rng.normal(size=(4, 5))}).ok


def test_structural_gradients(rng):
    g = Graph()
    x = g.input("x", (4, 6))
    idx = g.indices(lambda v: np.argsort(v[:, 0])[::-1].copy(), [x], (4,))
    y = g.concat([g.slice(x, 0, 2), g.reverse(x)], axis=-1)
    y = g.transpose(g.reshape(y, (2, 4, 4)), (1, 0, 2))
    z = g.gather(g.softmax(g.leaky_relu(x, 0.1), axis=0), idx)
    g.output("y", g.sum(y * g.const(rng.normal(size=y.shape))) + g.sum(z * g.const(rng.normal(size=z.shape))))
    assert check_gradients(g, "y", {"x": rng.normal(size=(4, 6))}).ok


def test_maximum_gradient(rng):
    g = Graph()
    x = g.input("x", (6,))
    g.output("y", g.sum(g.maximum(x, 0.1) * g.const(rng.normal(size=6))))
    assert check_gradients(g, "y", {"x": np.array([-1.0, 0.5, 2.0, -0.3, 0.9, 0.05])}).ok


def test_scan_kernels_agree(rng):
    a = rng.uniform(0, 1, (9, 7))
    b = rng.normal(size=(9, 7))
    g = rng.normal(size=(9, 7))
    h = kernels.scan_forward(a, b, "python")
    ref = np.zeros_like(b)
    acc = np.zeros(7)
    for t in range(9):
        acc = a[t] * acc + b[t]
        ref[t] = acc
    np.testing.assert_allclose(h, ref, rtol=1e-14)
    if kernels.BACKEND == "compiled":
        np.testing.assert_allclose(kernels.scan_forward(a, b, "compiled"), h, rtol=1e-14)
        for x, y in zip(kernels.scan_backward(a, h, g, "compiled"), kernels.scan_backward(a, h, g, "python")):
            np.testing.assert_allclose(x, y, rtol=1e-13)


def test_adam_zero_lr_is_noop(rng):
    p = {"w": rng.normal(size=3)}
    before = p["w"].copy()
    opt = Adam(p, lr=0.0)
    opt.step({"w": np.ones(3)})
    assert np.array_equal(p["w"], before)


def test_adam_minimises_quadratic():
    p = {"w": np.array([3.0, -2.0])}
    opt = Adam(p, lr=0.1)
    for _ in range(500):
        opt.step({"w": 2 * p["w"]})
    assert np.all(np.abs(p["w"]) < 1e-2)


def test_weights_roundtrip(tmp_path, rng):
    params = {"a.w": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
    path = tmp_path / "w.bin"
    weights.save(path, params)
    back = weights.load(path)
    assert set(back) == set(params)
    # stored as 32-bit floats, upcast on load
    assert all(np.array_equal(back[k], params[k].astype(np.float32)) for k in params)
    assert weights.dumps(params) == weights.dumps(back)


def test_weights_reject_garbage():
    from topopose.errors import DataError

    with pytest.raises(DataError):
        weights.loads(b"NOPE" + bytes(8))
    good = weights.dumps({"w": np.ones(3)})
    with pytest.raises(DataError):
        weights.loads(good[:-2])
