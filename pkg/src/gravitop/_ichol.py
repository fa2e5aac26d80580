"""Numba kernels for incomplete-Cholesky preconditioned CG.

Kept in a separate module so the 2D (direct solver) path never pays the
numba import and JIT cost. All kernels operate on the CSR arrays of the
lower triangle L (diagonal stored last in each row, indices sorted).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def ic0_factor(n, indptr, indices, data, shift):
    """Zero-fill incomplete Cholesky of an SPD matrix.

    ``indptr/indices/data`` describe the lower triangle (diagonal
    included, last in each sorted row). The diagonal is scaled by
    (1 + shift) before factorization. Returns (L data, failed row) with
    failed row = -1 on success; a nonnegative value flags a nonpositive
    pivot, in which case the caller should retry with a larger shift.
    """
    lx = data.copy()
    for i in range(n):
        for idx in range(indptr[i], indptr[i + 1]):
            j = indices[idx]
            s = 0.0
            pi = indptr[i]
            pj = indptr[j]
            end_i = indptr[i + 1]
            end_j = indptr[j + 1]
            while pi < end_i and pj < end_j:
                ci = indices[pi]
                cj = indices[pj]
                if ci >= j or cj >= j:
                    break
                if ci == cj:
                    s += lx[pi] * lx[pj]
                    pi += 1
                    pj += 1
                elif ci < cj:
                    pi += 1
                else:
                    pj += 1
            if j < i:
                lx[idx] = (data[idx] - s) / lx[indptr[j + 1] - 1]
            else:
                t = data[idx] * (1.0 + shift) - s
                if t <= 0.0:
                    return lx, i
                lx[idx] = np.sqrt(t)
    return lx, -1


@njit(cache=True)
def solve_lower(n, indptr, indices, lx, b):
    """Forward substitution L y = b."""
    y = b.copy()
    for i in range(n):
        s = y[i]
        for idx in range(indptr[i], indptr[i + 1] - 1):
            s -= lx[idx] * y[indices[idx]]
        y[i] = s / lx[indptr[i + 1] - 1]
    return y


@njit(cache=True)
def solve_lower_transpose(n, indptr, indices, lx, y):
    """Backward substitution L^T z = y, sweeping columns of L."""
    z = y.copy()
    for i in range(n - 1, -1, -1):
        zi = z[i] / lx[indptr[i + 1] - 1]
        z[i] = zi
        for idx in range(indptr[i], indptr[i + 1] - 1):
            z[indices[idx]] -= lx[idx] * zi
    return z
