"""Slow, straight-line reference implementations used as test oracles.

Nothing here calls the package's kernels; each routine recomputes its
quantity from the defining formula with plain loops.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog


def nodes_1d(lo, dx, n):
    return [lo + i * dx for i in range(n)]


def lin_interp_1d(xs, vals, p):
    """Clamp then interpolate linearly on a uniform node list."""
    lo, hi = xs[0], xs[-1]
    p = min(max(p, lo), hi)
    dx = xs[1] - xs[0]
    i = int(math.floor((p - lo) / dx))
    i = min(max(i, 0), len(xs) - 2)
    w = (p - xs[i]) / dx
    return (1 - w) * vals[i] + w * vals[i + 1], {i: 1 - w, i + 1: w}


def lin_interp_2d(x1s, x2s, vals, p):
    """Clamped bilinear interpolation; ``vals[i][j]`` at ``(x1s[i], x2s[j])``."""
    a, wa = lin_interp_1d(x1s, list(range(len(x1s))), p[0])
    b, wb = lin_interp_1d(x2s, list(range(len(x2s))), p[1])
    value = 0.0
    stencil = {}
    for i, u in wa.items():
        for j, v in wb.items():
            value += u * v * vals[i][j]
            stencil[(i, j)] = stencil.get((i, j), 0.0) + u * v
    return value, stencil


def local_average_1d(xs, m, width):
    out = []
    for x in xs:
        num = den = 0.0
        for y, my in zip(xs, m):
            g = math.exp(-((y - x) ** 2) / width) / math.sqrt(width * math.pi)
            num += y * my * g
            den += my * g
        out.append(num / den)
    return out


def local_average_2d(x1s, x2s, m, width):
    """Quadruple loop over node pairs; returns two component arrays."""
    n1, n2 = len(x1s), len(x2s)
    c1 = np.zeros((n1, n2))
    c2 = np.zeros((n1, n2))
    for i in range(n1):
        for j in range(n2):
            num1 = num2 = den = 0.0
            for k in range(n1):
                for q in range(n2):
                    r2 = (x1s[k] - x1s[i]) ** 2 + (x2s[q] - x2s[j]) ** 2
                    g = math.exp(-r2 / width) / math.sqrt(width * math.pi)
                    den += m[k][q] * g
                    num1 += x1s[k] * m[k][q] * g
                    num2 += x2s[q] * m[k][q] * g
            c1[i, j] = num1 / den
            c2[i, j] = num2 / den
    return c1, c2


def lattice(alpha_max, n_alpha):
    c = n_alpha // 2
    return [(k - c) * alpha_max / c for k in range(n_alpha)]


def bellman_1d(xs, U, node, h, eps, a2, a3, poles, alpha_max, n_alpha):
    """Exhaustive lattice minimum at one node; returns ``(value, alpha, stencil)``.

    ``poles`` is a list of ``(position, strength)`` with scalar positions.
    """
    x = xs[node]
    s = math.sqrt(2 * eps * h)
    state = min(k * (p - x) ** 2 for p, k in poles) if a3 else 0.0
    best = None
    cands = sorted(lattice(alpha_max, n_alpha), key=lambda a: (a * a, a))
    for a in cands:
        v1, s1 = lin_interp_1d(xs, U, x + a * h + s)
        v2, s2 = lin_interp_1d(xs, U, x + a * h - s)
        val = ((v1 + v2) / 2 - U[node]) / h + 0.5 * a2 * a * a
        if best is None or val < best[0]:
            st = {}
            for d in (s1, s2):
                for j, w in d.items():
                    st[j] = st.get(j, 0.0) + w / 2
            best = (val, a, st)
    val, a, st = best
    return val + 0.5 * a3 * state, a, sorted((j, w) for j, w in st.items() if w > 0)


def bellman_2d(x1s, x2s, U, node, h, eps, a2, a3, poles, alpha_max, n_alpha):
    i, j = node
    x = (x1s[i], x2s[j])
    s = math.sqrt(4 * eps * h)
    state = min(k * ((p[0] - x[0]) ** 2 + (p[1] - x[1]) ** 2) for p, k in poles) if a3 else 0.0
    lv = lattice(alpha_max, n_alpha)
    cands = sorted(((a, b) for a in lv for b in lv), key=lambda c: (c[0] ** 2 + c[1] ** 2, c[0], c[1]))
    best = None
    for a, b in cands:
        bx, by = x[0] + a * h, x[1] + b * h
        acc = 0.0
        for p in ((bx + s, by), (bx - s, by), (bx, by + s), (bx, by - s)):
            acc += lin_interp_2d(x1s, x2s, U, p)[0]
        val = (acc / 4 - U[i][j]) / h + 0.5 * a2 * (a * a + b * b)
        if best is None or val < best[0]:
            best = (val, (a, b))
    return best[0] + 0.5 * a3 * state, best[1]


def hj_step_1d(xs, U, M, h, dt, eps, lam, a1, a2, a3, width, poles, alpha_max, n_alpha):
    """One full explicit step from the defining formulas."""
    mbar = local_average_1d(xs, M, width)
    out = []
    for i, x in enumerate(xs):
        F = a1 * abs(mbar[i] - x)
        B = bellman_1d(xs, U, i, h, eps, a2, a3, poles, alpha_max, n_alpha)[0]
        out.append(U[i] + dt * (F + B - lam * U[i]))
    return out


def dense_propagation(index, weight, size):
    P = np.zeros((size, size))
    for i in range(index.shape[0]):
        for k in range(index.shape[1]):
            P[i, index[i, k]] += weight[i, k]
    return P


def greedy_transport_1d(xs, m1, m2, dx):
    """North-west-corner transport of nodal atoms; optimal in 1D for |x - y|."""
    a = [v * dx for v in m1]
    b = [v * dx for v in m2]
    i = j = 0
    cost = 0.0
    while i < len(a) and j < len(b):
        q = min(a[i], b[j])
        cost += q * abs(xs[i] - xs[j])
        a[i] -= q
        b[j] -= q
        if a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return cost


def lp_transport_1d(xs, m1, m2, dx):
    """Optimal transport cost by linear programming on the node support."""
    n = len(xs)
    C = np.abs(np.subtract.outer(xs, xs)).ravel()
    A = []
    for i in range(n):
        row = np.zeros((n, n))
        row[i, :] = 1
        A.append(row.ravel())
    for j in range(n):
        col = np.zeros((n, n))
        col[:, j] = 1
        A.append(col.ravel())
    b = np.concatenate([np.asarray(m1) * dx, np.asarray(m2) * dx])
    res = linprog(C, A_eq=np.array(A), b_eq=b, bounds=(0, None), method="highs")
    return res.fun
