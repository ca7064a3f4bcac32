# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled screening kernels; same semantics as ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef double NEG_TOL = 1e-12
cdef double RELAX_EPS = 1e-14


cdef bint _prices(const double[:, ::1] g, const long long[::1] a, double[::1] d,
                  double[::1] own, double[::1] nxt) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, it
    cdef double best, v
    cdef bint changed = True
    for i in range(n):
        own[i] = g[i, a[i]]
        d[i] = own[i]
    for it in range(n + 1):
        changed = False
        for i in range(n):
            best = d[i]
            for j in range(n):
                v = d[j] + (own[i] - g[i, a[j]])
                if v < best:
                    best = v
            nxt[i] = best
        for i in range(n):
            if nxt[i] < d[i] - RELAX_EPS:
                changed = True
            d[i] = nxt[i]
        if not changed:
            break
    if not changed:
        for i in range(n):
            if d[i] < -NEG_TOL:
                changed = True
                break
    if changed:
        # infeasible assignments report zero prices
        for i in range(n):
            d[i] = 0.0
        return False
    for i in range(n):
        if d[i] < 0.0:
            d[i] = 0.0
    return True


def assignment_prices(gains, assign):
    cdef double[:, ::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef long long[::1] a = np.ascontiguousarray(assign, dtype=np.int64)
    n = a.shape[0]
    d = np.empty(n)
    own = np.empty(n)
    nxt = np.empty(n)
    ok = _prices(g, a, d, own, nxt)
    return d, bool(ok)


def move_revenues(gains, weights, assign, Py_ssize_t i):
    cdef double[:, ::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long long[::1] a = np.array(assign, dtype=np.int64)
    cdef Py_ssize_t n = a.shape[0], K = g.shape[1], k, t
    out_arr = np.empty(K)
    cdef double[::1] out = out_arr
    cdef double[::1] d = np.empty(n)
    cdef double[::1] own = np.empty(n)
    cdef double[::1] nxt = np.empty(n)
    cdef double r
    with nogil:
        for k in range(K):
            a[i] = k
            if _prices(g, a, d, own, nxt):
                r = 0.0
                for t in range(n):
                    r = r + d[t] * w[t]
                out[k] = r
            else:
                out[k] = -INFINITY
    return out_arr


def enumerate_best(gains, weights):
    cdef double[:, ::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = g.shape[0], K = g.shape[1], t
    cdef long long[::1] a = np.zeros(n, dtype=np.int64)
    best_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] best = best_arr
    cdef double[::1] d = np.empty(n)
    cdef double[::1] own = np.empty(n)
    cdef double[::1] nxt = np.empty(n)
    cdef double r, best_rev = -INFINITY
    cdef bint done = False
    with nogil:
        while not done:
            if _prices(g, a, d, own, nxt):
                r = 0.0
                for t in range(n):
                    r = r + d[t] * w[t]
                if r > best_rev + NEG_TOL:
                    best_rev = r
                    for t in range(n):
                        best[t] = a[t]
            # next assignment in lexicographic order (last type varies fastest)
            t = n - 1
            while t >= 0:
                a[t] += 1
                if a[t] < K:
                    break
                a[t] = 0
                t -= 1
            if t < 0:
                done = True
    return best_arr, best_rev
