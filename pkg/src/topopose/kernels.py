"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
versions are. ``TOPOPOSE_PURE_PYTHON=1`` forces the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("TOPOPOSE_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels


def reduce_boundary(offsets, rows, order, backend=None):
    impl = _select(backend)
    return impl.reduce_boundary(
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(order, dtype=np.int64),
    )


def scan_forward(a, b, backend=None):
    """h[t] = a[t] * h[t-1] + b[t] along axis 0, h[-1] = 0. Inputs are (L, M)."""
    impl = _select(backend)
    return impl.scan_forward(np.ascontiguousarray(a), np.ascontiguousarray(b))


def scan_backward(a, h, g, backend=None):
    """Adjoint of ``scan_forward``: returns (dL/da, dL/db) given dL/dh = g."""
    impl = _select(backend)
    return impl.scan_backward(
        np.ascontiguousarray(a), np.ascontiguousarray(h), np.ascontiguousarray(g)
    )


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "compiled":
        if _impl is _pykernels:
            raise RuntimeError("compiled kernels are not available in this build")
        return _impl
    raise ValueError(f"unknown kernel backend {backend!r}")
