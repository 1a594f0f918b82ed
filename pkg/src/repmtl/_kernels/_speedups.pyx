# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in pure.py (same contracts)."""

from libc.math cimport fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def power_method_sym(cnp.ndarray[cnp.float64_t, ndim=2] S,
                     double tol=1e-12, int max_iter=5000):
    cdef int p = S.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.full(p, 1.0 / sqrt(p))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(p)
    cdef double[:, :] Sm = S
    cdef double[:] vm = v
    cdef double[:] wm = w
    cdef double lam = 0.0, lam_new, norm, acc
    cdef int it, i, j
    for it in range(max_iter):
        for i in range(p):
            acc = 0.0
            for j in range(p):
                acc += Sm[i, j] * vm[j]
            wm[i] = acc
        norm = 0.0
        for i in range(p):
            norm += wm[i] * wm[i]
        norm = sqrt(norm)
        if norm == 0.0:
            return 0.0
        for i in range(p):
            vm[i] = wm[i] / norm
        lam_new = 0.0
        for i in range(p):
            acc = 0.0
            for j in range(p):
                acc += Sm[i, j] * vm[j]
            lam_new += vm[i] * acc
        if fabs(lam_new - lam) <= tol * max(1.0, fabs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def apg_l2_linear(cnp.ndarray[cnp.float64_t, ndim=2] G,
                  cnp.ndarray[cnp.float64_t, ndim=1] g0,
                  double tau, double L,
                  double tol=1e-9, int max_iter=5000):
    cdef int p = g0.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.zeros(p)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.zeros(p)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.empty(p)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_new = np.empty(p)
    cdef double[:, :] Gm = G
    cdef double[:] g0m = g0
    cdef double[:] wm = w
    cdef double[:] zm = z
    cdef double[:] um = u
    cdef double[:] wn = w_new
    cdef double t_k = 1.0, t_next, shrink = tau / L
    cdef double nu, scale, dot_restart, delta, acc, dwi
    cdef int it, i, j
    for it in range(max_iter):
        for i in range(p):
            acc = 0.0
            for j in range(p):
                acc += Gm[i, j] * zm[j]
            um[i] = zm[i] - (acc + g0m[i]) / L
        nu = 0.0
        for i in range(p):
            nu += um[i] * um[i]
        nu = sqrt(nu)
        if nu <= shrink:
            for i in range(p):
                wn[i] = 0.0
        else:
            scale = 1.0 - shrink / nu
            for i in range(p):
                wn[i] = scale * um[i]
        dot_restart = 0.0
        delta = 0.0
        for i in range(p):
            dwi = wn[i] - wm[i]
            dot_restart += (zm[i] - wn[i]) * dwi
            delta += dwi * dwi
        delta = sqrt(delta)
        if dot_restart > 0.0:
            t_k = 1.0
            for i in range(p):
                zm[i] = wn[i]
        else:
            t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_k * t_k))
            scale = (t_k - 1.0) / t_next
            for i in range(p):
                zm[i] = wn[i] + scale * (wn[i] - wm[i])
            t_k = t_next
        for i in range(p):
            wm[i] = wn[i]
        if delta <= tol:
            return w, it + 1, True
    return w, max_iter, False
