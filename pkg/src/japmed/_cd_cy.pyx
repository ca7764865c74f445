# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic coordinate descent for weighted-l1 least squares.

Works on the Gram formulation: given G = Z'Z and c = Z'y, minimizes
    b'Gb - 2c'b + 2 * sum_j thresh[j] * G[j,j] * |b[j]|
which matches the unnormalized quadratic loss ||y - Zb||^2 plus a
per-coordinate l1 penalty with soft-threshold level thresh[j].
"""

import numpy as np

cimport numpy as cnp


def cd_gram(double[:, ::1] G, double[::1] c, double[::1] thresh,
            double[::1] beta, double tol, int max_sweeps):
    """Run cyclic CD sweeps in place on ``beta``; return sweeps used.

    Converged when the maximum absolute coefficient change within a sweep
    drops below ``tol``.
    """
    cdef Py_ssize_t p = beta.shape[0]
    cdef Py_ssize_t j, k, sweep
    cdef double z, bj, new_bj, delta, max_delta, t
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_arr = np.empty(p)
    cdef double[::1] g = g_arr

    # g = c - G @ beta
    for j in range(p):
        z = 0.0
        for k in range(p):
            z += G[j, k] * beta[k]
        g[j] = c[j] - z

    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            bj = beta[j]
            z = (g[j] + G[j, j] * bj) / G[j, j]
            t = thresh[j]
            if z > t:
                new_bj = z - t
            elif z < -t:
                new_bj = z + t
            else:
                new_bj = 0.0
            if new_bj != bj:
                delta = new_bj - bj
                beta[j] = new_bj
                for k in range(p):
                    g[k] -= G[k, j] * delta
                if delta < 0.0:
                    delta = -delta
                if delta > max_delta:
                    max_delta = delta
        if max_delta < tol:
            return sweep + 1
    return max_sweeps
