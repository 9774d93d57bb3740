class GraphError(ValueError):
    """Malformed graph or bindings (unbound input, non-scalar output, ...)."""


class ShapeError(GraphError):
    """Raised when a graph node receives inputs of incompatible shape."""


class DataError(ValueError):
    """Invalid or unreadable input data (bad files, out-of-range values)."""


class TopologyError(RuntimeError):
    """Geometric degeneracy that the topology pipeline could not resolve."""


class DegenerateWarning(UserWarning):
    """Emitted when an input is degenerate and a documented fallback is used."""
