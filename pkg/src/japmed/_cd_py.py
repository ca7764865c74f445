"""Pure-NumPy fallback for the coordinate-descent kernel.

Same contract as the compiled version in ``_cd_cy.pyx``; used when the
extension is unavailable or when JAPMED_PURE_PYTHON=1 is set.
"""

import numpy as np


def cd_gram(G, c, thresh, beta, tol, max_sweeps):
    """Run cyclic CD sweeps in place on ``beta``; return sweeps used."""
    p = beta.shape[0]
    g = c - G @ beta
    diag = np.einsum("ii->i", G)
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            bj = beta[j]
            z = (g[j] + diag[j] * bj) / diag[j]
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
                g -= G[:, j] * delta
                max_delta = max(max_delta, abs(delta))
        if max_delta < tol:
            return sweep + 1
    return max_sweeps
