"""Compiled inner loops for the control-lattice minimization.

Both kernels return, per node, the minimum over the lattice of
``(avg_feet U - U(x)) / h + a2 |alpha|^2 / 2`` and the position (in the
caller's sorted control order) of the first control attaining it.  The
state part of the running cost does not depend on alpha and is added by
the caller.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _axis_locate(p, lo, hi, dx, n):
    if p < lo:
        p = lo
    elif p > hi:
        p = hi
    pos = (p - lo) / dx
    i0 = int(np.floor(pos))
    if i0 > n - 2:
        i0 = n - 2
    if i0 < 0:
        i0 = 0
    return i0, pos - i0


@njit(cache=True)
def bellman_min_1d(U, x, lo, hi, dx, h, s, alphas, a2):
    n = U.shape[0]
    nc = alphas.shape[0]
    best_val = np.empty(n)
    best_idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        ui = U[i]
        best = np.inf
        bi = -1
        for c in range(nc):
            a = alphas[c]
            base = x[i] + a * h
            i0, w = _axis_locate(base + s, lo, hi, dx, n)
            acc = (1.0 - w) * U[i0] + w * U[i0 + 1]
            i0, w = _axis_locate(base - s, lo, hi, dx, n)
            acc += (1.0 - w) * U[i0] + w * U[i0 + 1]
            val = (0.5 * acc - ui) / h + 0.5 * a2 * a * a
            if val < best:
                best = val
                bi = c
        best_val[i] = best
        best_idx[i] = bi
    return best_val, best_idx


@njit(cache=True)
def _axis_tables(x, lo, hi, dx, h, s, levels):
    # offsets per lattice level k: m=0 -> c_k h, m=1 -> c_k h + s, m=2 -> c_k h - s
    n = x.shape[0]
    K = levels.shape[0]
    idx = np.empty((K, 3, n), dtype=np.int64)
    wts = np.empty((K, 3, n))
    for k in range(K):
        for m in range(3):
            for i in range(n):
                p = x[i] + levels[k] * h
                if m == 1:
                    p = p + s
                elif m == 2:
                    p = p - s
                i0, w = _axis_locate(p, lo, hi, dx, n)
                idx[k, m, i] = i0
                wts[k, m, i] = w
    return idx, wts


@njit(cache=True)
def bellman_min_2d(U, x1, x2, lo1, hi1, lo2, hi2, dx, h, s, levels, k1s, k2s, a2):
    n1, n2 = U.shape
    K = levels.shape[0]
    nc = k1s.shape[0]
    ia, wa = _axis_tables(x1, lo1, hi1, dx, h, s, levels)
    ib, wb = _axis_tables(x2, lo2, hi2, dx, h, s, levels)
    # V[k, m, j, :] = U interpolated along axis 2 at x2_j + offset(k, m), contiguous in axis 1
    V = np.empty((K, 3, n2, n1))
    for k in range(K):
        for m in range(3):
            for j in range(n2):
                j0 = ib[k, m, j]
                w = wb[k, m, j]
                for i in range(n1):
                    V[k, m, j, i] = (1.0 - w) * U[i, j0] + w * U[i, j0 + 1]
    quad = np.empty(nc)
    for c in range(nc):
        a = levels[k1s[c]]
        b = levels[k2s[c]]
        quad[c] = 0.5 * a2 * (a * a + b * b)

    best_val = np.empty((n1, n2))
    best_idx = np.empty((n1, n2), dtype=np.int64)
    for i in range(n1):
        for j in range(n2):
            uij = U[i, j]
            best = np.inf
            bi = -1
            for c in range(nc):
                k1 = k1s[c]
                k2 = k2s[c]
                # feet along axis 1: shifted by +-s in x1, plain alpha shift in x2
                row = V[k2, 0, j]
                i0 = ia[k1, 1, i]
                w = wa[k1, 1, i]
                acc = (1.0 - w) * row[i0] + w * row[i0 + 1]
                i0 = ia[k1, 2, i]
                w = wa[k1, 2, i]
                acc += (1.0 - w) * row[i0] + w * row[i0 + 1]
                # feet along axis 2
                i0 = ia[k1, 0, i]
                w = wa[k1, 0, i]
                row = V[k2, 1, j]
                acc += (1.0 - w) * row[i0] + w * row[i0 + 1]
                row = V[k2, 2, j]
                acc += (1.0 - w) * row[i0] + w * row[i0 + 1]
                val = (0.25 * acc - uij) / h + quad[c]
                if val < best:
                    best = val
                    bi = c
            best_val[i, j] = best
            best_idx[i, j] = bi
    return best_val, best_idx
