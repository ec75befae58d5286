# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Semantics match :mod:`bmac._kernels_py` exactly; see that module for
parameter documentation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs

cnp.import_array()


def power_iteration(A, x0, double tol=1e-13, int max_iter=10000):
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ya = np.empty(n, dtype=np.float64)
    cdef double[::1] x = xa
    cdef double[::1] y = ya
    cdef Py_ssize_t i, j
    cdef int it
    cdef double s, lam = 0.0, diff
    s = 0.0
    for i in range(n):
        s += x[i]
    for i in range(n):
        x[i] /= s
    for it in range(1, max_iter + 1):
        lam = 0.0
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += a[i, j] * x[j]
            y[i] = s
            lam += s
        if lam <= 0.0:
            return xa, 0.0, it, True
        diff = 0.0
        for i in range(n):
            y[i] /= lam
            diff += fabs(y[i] - x[i])
        for i in range(n):
            x[i] = y[i]
        if diff < tol:
            return xa, lam, it, True
    return xa, lam, max_iter, False


def waterfill_rate(delta, double target):
    cdef double[::1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef Py_ssize_t n = dl.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.zeros(n, dtype=np.float64)
    cdef double[::1] d = da
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] act_a = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] act = act_a
    cdef Py_ssize_t j, k, top
    cdef double nu, s, mx
    cdef bint dropped
    if n == 0:
        return da, 0.0
    mx = dl[0]
    top = 0
    for j in range(n):
        if dl[j] > mx:
            mx = dl[j]
            top = j
    if target <= 0.0:
        return da, 1.0 / mx
    while True:
        k = 0
        s = 0.0
        for j in range(n):
            if act[j]:
                k += 1
                s += log(dl[j])
        nu = exp((target - s) / k)
        dropped = False
        for j in range(n):
            if act[j] and j != top and nu - 1.0 / dl[j] < 0.0:
                act[j] = 0
                dropped = True
        if not dropped:
            for j in range(n):
                if act[j]:
                    d[j] = max(nu - 1.0 / dl[j], 0.0)
            return da, nu


def waterfill_budget(delta, double budget):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef Py_ssize_t n = dl.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.zeros(n, dtype=np.float64)
    if n == 0:
        return da, 0.0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(-dl, kind="stable").astype(np.int64)
    cdef double[::1] inv = 1.0 / dl[order]
    cdef double[::1] d = da
    cdef Py_ssize_t k, j
    cdef double csum, nu
    if budget <= 0.0:
        return da, inv[0]
    for k in range(n, 0, -1):
        csum = 0.0
        for j in range(k):
            csum += inv[j]
        nu = (budget + csum) / k
        if nu >= inv[k - 1]:
            for j in range(k):
                d[order[j]] = nu - inv[j]
            return da, nu
    d[order[0]] = budget
    return da, budget + inv[0]


def waterfill_weighted(delta, weight, double cap):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wt = np.ascontiguousarray(weight, dtype=np.float64)
    cdef Py_ssize_t n = dl.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.zeros(n, dtype=np.float64)
    if n == 0:
        return da, 0.0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(-dl, kind="stable").astype(np.int64)
    cdef double[::1] inv = 1.0 / dl[order]
    cdef double[::1] w = wt[order]
    cdef double[::1] d = da
    cdef Py_ssize_t k, j
    cdef double sw = 0.0, swi = 0.0, nu, v
    if cap <= 0.0:
        return da, inv[0]
    for k in range(n):
        sw += w[k]
        swi += w[k] * inv[k]
        nu = (cap + swi) / sw
        if k == n - 1 or nu <= inv[k + 1]:
            for j in range(k + 1):
                v = nu - inv[j]
                d[order[j]] = v if v > 0.0 else 0.0
            return da, nu
    return da, inv[0]
