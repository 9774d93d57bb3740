from .complexes import (
    CECH_MAX_POINTS,
    FilteredComplex,
    SimplicialComplex,
    alpha_filtration,
    cech_filtration,
    delaunay3,
)
from .features import FEATURE_DIM, TopoFeature, betti_curve, topo_entropy, topo_feature
from .meb import edge_balls, tetra_balls, triangle_balls
from .persistence import PersistenceDiagram, persistence


def cech_bruteforce(points, max_dim: int = 2, r_max: float = float("inf")) -> PersistenceDiagram:
    """Reference H0/H1 persistence from the full Cech complex.

    ``max_dim`` is the largest simplex dimension built; H1 needs 2.
    """
    fc = cech_filtration(points, max_dim=max_dim, r_max=r_max)
    return persistence(fc, max_dim=min(1, max_dim))


__all__ = [
    "CECH_MAX_POINTS", "FEATURE_DIM", "FilteredComplex", "PersistenceDiagram",
    "SimplicialComplex", "TopoFeature", "alpha_filtration", "betti_curve",
    "cech_bruteforce", "cech_filtration", "delaunay3", "edge_balls", "persistence",
    "tetra_balls", "topo_entropy", "topo_feature", "triangle_balls",
]
