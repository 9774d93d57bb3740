"""Quick oracle suites behind ``topopose selftest``. Each returns (ok, detail)."""
from __future__ import annotations

import itertools
import warnings

import numpy as np

from .aggregation import build_block, build_lgfa
from .metrics import OrientedBox, box_iou
from .serialization import hilbert_index, zorder_index
from .tensor import Graph, check_gradients
from .topology import alpha_filtration, cech_bruteforce, delaunay3, persistence, topo_entropy


def _same_bars(a, b, tol=1e-9):
    return a.shape == b.shape and bool(np.all(np.isclose(a, b, rtol=0.0, atol=tol)))


def suite_cech(seed):
    rng = np.random.default_rng(seed)
    for trial in range(10):
        pts = rng.normal(size=(int(rng.integers(6, 17)), 3))
        alpha = persistence(alpha_filtration(delaunay3(pts), pts))
        cech = cech_bruteforce(pts)
        for k in (0, 1):
            if not _same_bars(alpha[k], cech[k]):
                return False, f"cloud {trial}: H{k} differs"
    return True, "10 clouds, H0/H1 equal"


def suite_curves(seed):
    for b in (1, 2, 3):
        cells = np.array(list(itertools.product(range(2 ** b), repeat=3)))
        h = hilbert_index(cells, b)
        if len(np.unique(h)) != len(cells) or len(np.unique(zorder_index(cells, b))) != len(cells):
            return False, f"not bijective at bits={b}"
        walk = cells[np.argsort(h)]
        if not np.all(np.abs(np.diff(walk, axis=0)).sum(axis=1) == 1):
            return False, f"adjacency broken at bits={b}"
    return True, "bits 1-3 bijective and adjacent"


def suite_entropy(seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ok = topo_entropy([2.0]) <= 1e-11
        ok &= all(abs(topo_entropy(np.ones(n)) - np.log(n)) <= 1e-9 for n in (2, 4, 8))
        ok &= abs(topo_entropy([1.0, 3.0]) - 0.5623351446188083) <= 1e-4
    return bool(ok), "single bar, uniform bars, (1,3)"


def suite_iou(seed):
    a = OrientedBox(np.zeros(3), np.eye(3), np.ones(3))
    b = OrientedBox(np.array([0.5, 0, 0]), np.eye(3), np.ones(3))
    v = box_iou(a, b)
    return abs(v - 1 / 3) <= 1e-9, f"half-offset cubes {v:.12f}"


def _gradcheck(build, shapes, seed):
    rng = np.random.default_rng(seed)
    g = Graph()
    nodes = [g.input(f"x{i}", s) for i, s in enumerate(shapes)]
    y = build(g, *nodes)
    g.output("loss", g.sum(y * g.const(rng.normal(size=y.shape))))
    bind = {f"x{i}": rng.normal(size=s) for i, s in enumerate(shapes)}
    bind.update(g.init_params(seed))
    return check_gradients(g, "loss", bind, rtol=1e-5)


def suite_gradients(seed):
    reports = {
        "scan": _gradcheck(lambda g, a, b: g.scan(g.exp(-g.softplus(a)), b), [(6, 3), (6, 3)], seed),
        "twinmamba": _gradcheck(lambda g, x: build_block(g, x, "blk", 16, 4), [(9, 8)], seed),
        "lgfa": _gradcheck(lambda g, f, c: build_lgfa(g, f, c, K=4), [(12, 8), (12, 3)], seed),
    }
    bad = [k for k, r in reports.items() if not r.ok]
    worst = max(r.max_error for r in reports.values())
    return not bad, f"max rel. error {worst:.2e}" + (f"; failed: {', '.join(bad)}" if bad else "")


SUITES = {
    "cech-equality": suite_cech,
    "curve-bijectivity": suite_curves,
    "entropy-identities": suite_entropy,
    "box-iou": suite_iou,
    "gradient-checks": suite_gradients,
}


def run_all(seed: int = 0) -> dict:
    out = {}
    for name, fn in SUITES.items():
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out[name] = {"ok": bool(ok), "detail": detail}
    return out
