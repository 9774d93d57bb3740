"""Layer helpers that add parameterised sub-graphs to a :class:`Graph`."""
from __future__ import annotations

import numpy as np

from .tensor import Graph, evaluate


def zeros(rng, shape):
    return np.zeros(shape)


def ones(rng, shape):
    return np.ones(shape)


def constant(value):
    def init(rng, shape):
        return np.broadcast_to(np.asarray(value, dtype=np.float64), shape).copy()
    return init


def linear(g: Graph, x, name: str, d_in: int, d_out: int, bias: bool = True, init=None, bias_init=None):
    """x @ W + b over the last axis. Parameters ``{name}.w`` and ``{name}.b``."""
    y = g.matmul(x, g.param(f"{name}.w", (d_in, d_out), init))
    if bias:
        y = y + g.param(f"{name}.b", (d_out,), bias_init or zeros)
    return y


def mlp(g: Graph, x, name: str, dims, act="relu", final_act=False, last_init=None, last_bias_init=None):
    """Stack of linear layers ``dims[0] -> dims[1] -> ...`` with ``act`` between."""
    n = len(dims) - 1
    for i in range(n):
        last = i == n - 1
        x = linear(
            g, x, f"{name}.{i}", dims[i], dims[i + 1],
            init=last_init if last else None,
            bias_init=last_bias_init if last else None,
        )
        if not last or final_act:
            x = getattr(g, act)(x)
    return x


def layer_norm(g: Graph, x, name: str, d: int, eps: float = 1e-5):
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    mu = g.mean(x, axis=-1, keepdims=True)
    xc = x - mu
    var = g.mean(xc * xc, axis=-1, keepdims=True)
    y = xc / g.sqrt(var + eps)
    return y * g.param(f"{name}.gain", (d,), ones) + g.param(f"{name}.bias", (d,), zeros)


def row_norm(g: Graph, x, eps: float = 0.0):
    """Euclidean norm of every row (last axis kept, size 1)."""
    s = g.sum(x * x, axis=-1, keepdims=True)
    return g.sqrt(s + eps) if eps else g.sqrt(s)


def pairwise_sqdist(g: Graph, a, b):
    """Squared distances between rows of a (n, 3) and b (m, 3), shape (n, m)."""
    n, m = a.shape[0], b.shape[0]
    diff = g.reshape(a, (n, 1, a.shape[1])) - g.reshape(b, (1, m, b.shape[1]))
    return g.sum(diff * diff, axis=-1)


def run_graph(build, arrays: dict, params: dict | None = None, seed: int = 0):
    """Build a one-off graph over ``arrays`` and evaluate it.

    ``build(g, **input_nodes)`` returns a node or a dict of nodes. Parameters
    missing from ``params`` are drawn with ``init_params(seed)``. Returns
    ``(outputs, params)``.
    """
    g = Graph()
    nodes = {k: g.input(k, np.shape(v)) for k, v in arrays.items()}
    out = build(g, **nodes)
    single = not isinstance(out, dict)
    outs = {"out": out} if single else out
    for k, n in outs.items():
        g.output(k, n)
    full = g.init_params(seed)
    if params:
        full.update({k: v for k, v in params.items() if k in full})
    vals = evaluate(g, {**arrays, **full})
    return (vals["out"] if single else vals), full
