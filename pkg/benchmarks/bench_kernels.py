"""Compiled vs pure-Python kernels: boundary reduction and selective scan.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from topopose import kernels
from topopose.geometry import ShapeSpec, synth
from topopose.topology import alpha_filtration, delaunay3
from topopose.topology.persistence import boundary_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def reduction_case(n_points):
    cloud, _, _ = synth(ShapeSpec("torus", n_points=n_points, seed=0))
    pts = cloud.points
    dims, _, offsets, rows = boundary_matrix(alpha_filtration(delaunay3(pts), pts), 1)
    idx = np.arange(len(dims))
    order = np.concatenate([idx[dims == 2], idx[dims == 1]])
    return offsets, rows, order


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "compiled":
        print("compiled extension not built; only the python backend is available")
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])

    rows = []
    for n in (256, 1024):
        offsets, rows_, order = reduction_case(n)
        res = {b: best_of(lambda: kernels.reduce_boundary(offsets, rows_, order, b), args.repeat) for b in backends}
        rows.append((f"reduce_boundary N={n}", res))

    rng = np.random.default_rng(0)
    for L, M in ((32, 512), (128, 2048)):
        a = rng.uniform(0.5, 1.0, (L, M))
        b = rng.normal(size=(L, M))
        g = rng.normal(size=(L, M))
        res = {}
        for be in backends:
            t_f, h = best_of(lambda: kernels.scan_forward(a, b, be), args.repeat)
            t_b, _ = best_of(lambda: kernels.scan_backward(a, h, g, be), args.repeat)
            res[be] = (t_f + t_b, h)
        rows.append((f"scan fwd+bwd L={L} M={M}", res))

    print(f"{'kernel':32s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for name, res in rows:
        tp = res["python"][0] * 1e3
        if "compiled" in res:
            tc = res["compiled"][0] * 1e3
            print(f"{name:32s} {tp:10.2f} {tc:12.2f} {tp / tc:7.1f}x")
        else:
            print(f"{name:32s} {tp:10.2f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
