# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Z/2 column reduction and the linear recurrence scan.

Both functions mirror ``_pykernels`` exactly; the Python side picks whichever
is importable (see ``topopose.kernels``).
"""
from libcpp.vector cimport vector

import numpy as np

ctypedef long long i64

ctypedef fused real:
    float
    double


cdef void _symdiff(vector[i64]& a, const vector[i64]& b, vector[i64]& out) noexcept nogil:
    # both inputs sorted ascending; out = a xor b, sorted
    cdef size_t i = 0, j = 0
    cdef size_t na = a.size(), nb = b.size()
    out.clear()
    while i < na and j < nb:
        if a[i] < b[j]:
            out.push_back(a[i])
            i += 1
        elif b[j] < a[i]:
            out.push_back(b[j])
            j += 1
        else:
            i += 1
            j += 1
    while i < na:
        out.push_back(a[i])
        i += 1
    while j < nb:
        out.push_back(b[j])
        j += 1


def reduce_boundary(const i64[:] offsets, const i64[:] rows, const i64[:] order):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t m = order.shape[0]
    low = np.full(n, -1, dtype=np.int64)
    cdef i64[:] low_v = low
    cdef i64[:] owner = np.full(n, -1, dtype=np.int64)
    cdef unsigned char[:] cleared = np.zeros(n, dtype=np.uint8)
    cdef vector[vector[i64]] cols
    cdef vector[i64] col, tmp
    cdef Py_ssize_t k
    cdef i64 j, r, piv, o
    cols.resize(n)
    with nogil:
        for k in range(m):
            j = order[k]
            if cleared[j]:
                continue
            col.clear()
            for r in range(offsets[j], offsets[j + 1]):
                col.push_back(rows[r])
            while not col.empty():
                piv = col.back()
                o = owner[piv]
                if o < 0:
                    break
                _symdiff(col, cols[o], tmp)
                col.swap(tmp)
            if not col.empty():
                piv = col.back()
                low_v[j] = piv
                owner[piv] = j
                cleared[piv] = 1
                cols[j].swap(col)
    return low


def scan_forward(const real[:, ::1] a, const real[:, ::1] b):
    cdef Py_ssize_t L = a.shape[0], M = a.shape[1]
    dtype = np.float32 if real is float else np.float64
    h = np.empty((L, M), dtype=dtype)
    cdef real[:, ::1] hv = h
    cdef Py_ssize_t t, c
    with nogil:
        for c in range(M):
            hv[0, c] = b[0, c]
        for t in range(1, L):
            for c in range(M):
                hv[t, c] = a[t, c] * hv[t - 1, c] + b[t, c]
    return h


def scan_backward(const real[:, ::1] a, const real[:, ::1] h, const real[:, ::1] g):
    cdef Py_ssize_t L = a.shape[0], M = a.shape[1]
    dtype = np.float32 if real is float else np.float64
    ga = np.empty((L, M), dtype=dtype)
    gb = np.empty((L, M), dtype=dtype)
    cdef real[:, ::1] gav = ga
    cdef real[:, ::1] gbv = gb
    cdef Py_ssize_t t, c
    cdef real lam
    with nogil:
        for c in range(M):
            lam = 0
            for t in range(L - 1, -1, -1):
                if t + 1 < L:
                    lam = g[t, c] + a[t + 1, c] * lam
                else:
                    lam = g[t, c]
                gbv[t, c] = lam
                if t > 0:
                    gav[t, c] = lam * h[t - 1, c]
                else:
                    gav[t, c] = 0
    return ga, gb
