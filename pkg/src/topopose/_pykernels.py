"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same floating-point operation order, so results agree
bitwise with the extension.
"""
import numpy as np


def reduce_boundary(offsets, rows, order):
    """Z/2 column reduction with clearing.

    Columns are given in CSR form (``offsets``, ``rows``) with row indices in
    filtration order. ``order`` lists the columns to reduce; callers pass
    higher-dimensional columns first so pivots can clear lower ones.
    Returns the pivot (lowest nonzero row) of every reduced column, or -1.
    """
    n = len(offsets) - 1
    low = np.full(n, -1, dtype=np.int64)
    owner = {}
    cleared = set()
    reduced = {}
    for j in order.tolist():
        if j in cleared:
            continue
        col = 0
        for r in rows[offsets[j]:offsets[j + 1]].tolist():
            col ^= 1 << r
        while col:
            piv = col.bit_length() - 1
            o = owner.get(piv)
            if o is None:
                break
            col ^= reduced[o]
        if col:
            piv = col.bit_length() - 1
            low[j] = piv
            owner[piv] = j
            cleared.add(piv)
            reduced[j] = col
    return low


def scan_forward(a, b):
    h = np.empty_like(b)
    h[0] = b[0]
    for t in range(1, a.shape[0]):
        h[t] = a[t] * h[t - 1] + b[t]
    return h


def scan_backward(a, h, g):
    L = a.shape[0]
    ga = np.empty_like(a)
    gb = np.empty_like(a)
    lam = g[L - 1].copy()
    gb[L - 1] = lam
    for t in range(L - 1, -1, -1):
        if t + 1 < L:
            lam = g[t] + a[t + 1] * lam
            gb[t] = lam
        ga[t] = lam * h[t - 1] if t > 0 else 0.0
    return ga, gb
