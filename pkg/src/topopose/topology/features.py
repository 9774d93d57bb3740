"""Persistence entropy, Betti curves and the packed 96-dim topology vector."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateWarning
from .complexes import alpha_filtration, delaunay3
from .persistence import PersistenceDiagram, persistence

N_SAMPLES = 47
FEATURE_DIM = 2 + 2 * N_SAMPLES


def topo_entropy(lifetimes, eps: float = 1e-12) -> float:
    """Shannon entropy of the normalized bar lifetimes.

    ``lifetimes`` must already be finite (essential bars capped). An empty
    diagram has entropy 0 by convention and raises a ``DegenerateWarning``.
    """
    ell = np.asarray(lifetimes, dtype=np.float64).ravel()
    if not np.all(np.isfinite(ell)):
        raise ValueError("cap infinite deaths before computing entropy")
    total = ell.sum()
    if not len(ell) or total <= 0:
        warnings.warn("empty diagram; entropy set to 0", DegenerateWarning, stacklevel=2)
        return 0.0
    p = ell / total
    return float(-np.sum(p * np.log(p + eps)))


def betti_curve(diagram: PersistenceDiagram, M: int = N_SAMPLES, dims=(0, 1)) -> np.ndarray:
    """Betti numbers at M evenly spaced normalized scales, one row per dim.

    Births and deaths of all dims share one min-max normalization over their
    finite values. Essential bars get death 1 + ulp so they count at t = 1.
    """
    finite = np.concatenate(
        [diagram[k].ravel() for k in dims] + [np.zeros(0)]
    )
    finite = finite[np.isfinite(finite)]
    lo = finite.min() if len(finite) else 0.0
    hi = finite.max() if len(finite) else 0.0
    t = np.linspace(0.0, 1.0, M)
    out = np.zeros((len(dims), M))
    if not hi > lo:
        warnings.warn("all diagram endpoints equal; Betti curves set to 0", DegenerateWarning, stacklevel=2)
        return out
    past_one = np.nextafter(1.0, 2.0)
    for row, k in enumerate(dims):
        bars = diagram[k]
        if not len(bars):
            continue
        b = (bars[:, 0] - lo) / (hi - lo)
        d = np.where(np.isfinite(bars[:, 1]), (bars[:, 1] - lo) / (hi - lo), past_one)
        alive = (b[None, :] <= t[:, None]) & (t[:, None] < d[None, :])
        out[row] = alive.sum(axis=1)
    return out


@dataclass
class TopoFeature:
    diagram: PersistenceDiagram
    entropy: np.ndarray   # (2,)
    betti: np.ndarray     # (2, 47)
    flags: tuple = ()

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.entropy, self.betti.ravel()])

    def to_json(self) -> dict:
        return {
            "diagrams": self.diagram.to_json(),
            "entropy": self.entropy.tolist(),
            "betti": {f"H{k}": self.betti[k].tolist() for k in range(len(self.betti))},
            "feature": self.vector.tolist(),
        }


def topo_feature(points, seed: int = 0) -> TopoFeature:
    """Alpha filtration -> H0/H1 persistence -> entropies and Betti curves."""
    pts = np.asarray(points, dtype=np.float64)
    fc = alpha_filtration(delaunay3(pts, seed=seed), pts)
    dgm = persistence(fc, max_dim=1)
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateWarning)
        ent = np.array([topo_entropy(dgm.lifetimes(k)) for k in (0, 1)])
        if caught:
            flags.append("empty-diagram")
        n = len(caught)
        betti = betti_curve(dgm)
        if len(caught) > n:
            flags.append("flat-diagram")
    return TopoFeature(dgm, ent, betti, tuple(flags))
