"""Semi-Lagrangian step for the forward Hamilton-Jacobi equation and its exact
discrete adjoint for the density.

The potential ``u`` is a cost.  One explicit step reads::

    U_next = U + dt * (F + B[U] - lam * U)
    B[U](x) = min_alpha (I[U](x, alpha) - U(x)) / h + l(x, alpha)

where ``I[U](x, alpha)`` averages the interpolated ``U`` over the ``2 * dim``
feet ``x + alpha h +- e_i sqrt(2 dim eps h)`` and the minimum runs over a
finite symmetric control lattice.  ``B[U]`` is consistent with
``eps * Lap U - |grad U|^2 / (2 a2) + a3/2 * min_i k_i |xbar_i - x|^2``.

Freezing the optimal controls, the step is affine in ``U`` through the
row-stochastic matrix ``P`` of interpolation weights, and the density is
advanced with the transpose of that linear map::

    M_next = (1 - dt/h) M + (dt/h) P^T M

which moves mass with velocity ``alpha* ~ -grad U / a2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import CFLViolated, DimensionMismatch, InvalidParameter, NonFiniteUpdate
from .grid import Grid, axis_weights, interpolate, project_to_domain
from .model import ModelParams, advert_cost, coupling_field, poles_at


@dataclass(frozen=True)
class SchemeParams:
    dt: float
    h: float
    eps: float
    lam: float = 0.0
    alpha_max: float = 4.0
    n_alpha: int = 33

    def __post_init__(self):
        if not (self.dt > 0 and self.h > 0):
            raise InvalidParameter("dt and h must be positive")
        if self.dt > self.h:
            raise CFLViolated(f"dt = {self.dt} > h = {self.h}: the density update needs dt <= h")
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise InvalidParameter(f"eps must be finite and >= 0, got {self.eps}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidParameter(f"lam must be finite and >= 0, got {self.lam}")
        if not self.alpha_max > 0:
            raise InvalidParameter("alpha_max must be positive")
        if self.n_alpha < 3 or self.n_alpha % 2 == 0:
            raise InvalidParameter(f"n_alpha must be an odd integer >= 3, got {self.n_alpha}")

    @property
    def ratio(self) -> float:
        return self.dt / self.h

    def foot_offset(self, dim: int) -> float:
        return math.sqrt(2.0 * dim * self.eps * self.h)


def lattice_levels(scheme: SchemeParams) -> np.ndarray:
    """The per-axis control values, symmetric with an exact zero in the middle."""
    c = scheme.n_alpha // 2
    return (np.arange(scheme.n_alpha) - c) * (scheme.alpha_max / c)


@lru_cache(maxsize=16)
def _lattice(alpha_max: float, n_alpha: int, dim: int):
    c = n_alpha // 2
    levels = (np.arange(n_alpha) - c) * (alpha_max / c)
    if dim == 1:
        order = np.lexsort((levels, levels * levels))
        return levels, order[:, None], levels[order][:, None]
    k1, k2 = np.meshgrid(np.arange(n_alpha), np.arange(n_alpha), indexing="ij")
    k1, k2 = k1.ravel(), k2.ravel()
    a, b = levels[k1], levels[k2]
    # smallest |alpha| first, then lexicographic in (alpha_1, alpha_2)
    order = np.lexsort((b, a, a * a + b * b))
    ks = np.stack([k1[order], k2[order]], axis=1)
    return levels, ks, np.stack([a[order], b[order]], axis=1)


def control_lattice(scheme: SchemeParams, dim: int) -> np.ndarray:
    """All lattice controls, shape ``(n_alpha**dim, dim)``, in tie-breaking order."""
    return _lattice(scheme.alpha_max, scheme.n_alpha, dim)[2]


def feet_points(x, alpha, eps: float, h: float) -> np.ndarray:
    """The ``2 * dim`` characteristic feet, before projection onto the domain.

    Order: ``+e_1, -e_1, +e_2, -e_2``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    dim = x.shape[-1]
    if alpha.shape != x.shape:
        raise DimensionMismatch("x and alpha must have the same shape")
    s = math.sqrt(2.0 * dim * eps * h)
    base = x + alpha * h
    feet = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = s
        feet.append(base + e)
        feet.append(base - e)
    return np.array(feet)


@dataclass(frozen=True)
class PropagationStencil:
    """Frozen-control propagation: per node the optimal control and the weights
    of the source nodes that its feet interpolate from.

    ``index[i, k]`` / ``weight[i, k]`` may repeat a node; the row of ``P`` is
    their sum.  Rows sum to one.
    """

    controls: np.ndarray  # (size, dim)
    index: np.ndarray  # (size, K) int64, flat node indices
    weight: np.ndarray  # (size, K)

    @property
    def size(self) -> int:
        return self.index.shape[0]

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """``P @ phi`` on flat values."""
        phi = np.asarray(phi, dtype=float).ravel()
        return np.sum(self.weight * phi[self.index], axis=1)

    def apply_transpose(self, m: np.ndarray) -> np.ndarray:
        """``P.T @ m``: every node scatters its value along its own weights.

        ``bincount`` accumulates in flat order, so the result is fixed by the
        node order alone.
        """
        m = np.asarray(m, dtype=float).ravel()
        return np.bincount(self.index.ravel(), weights=(self.weight * m[:, None]).ravel(), minlength=self.size)

    def matrix(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.size), self.index.shape[1])
        P = sp.coo_matrix((self.weight.ravel(), (rows, self.index.ravel())), shape=(self.size, self.size))
        return P.tocsr()

    def merged(self, node: int) -> list[tuple[int, float]]:
        acc: dict[int, float] = {}
        for j, w in zip(self.index[node], self.weight[node]):
            if w > 0.0:
                acc[int(j)] = acc.get(int(j), 0.0) + float(w)
        return sorted(acc.items())


def build_stencil(grid: Grid, controls: np.ndarray, scheme: SchemeParams) -> PropagationStencil:
    """Interpolation weights of the feet at the given per-node controls."""
    dim = grid.dim
    controls = np.asarray(controls, dtype=float).reshape(grid.size, dim)
    s = scheme.foot_offset(dim)
    base = grid.points + controls * scheme.h
    per_foot_idx = []
    per_foot_w = []
    for i in range(dim):
        for sign in (1.0, -1.0):
            foot = base.copy()
            foot[:, i] += sign * s
            foot = project_to_domain(grid, foot)
            locs = [axis_weights(grid, a, foot[:, a]) for a in range(dim)]
            if dim == 1:
                i0, w = locs[0]
                per_foot_idx += [i0, i0 + 1]
                per_foot_w += [1.0 - w, w]
            else:
                (i0, wa), (j0, wb) = locs
                n2 = grid.n[1]
                for di, fa in ((0, 1.0 - wa), (1, wa)):
                    for dj, fb in ((0, 1.0 - wb), (1, wb)):
                        per_foot_idx.append((i0 + di) * n2 + (j0 + dj))
                        per_foot_w.append(fa * fb)
    index = np.stack(per_foot_idx, axis=1).astype(np.int64)
    weight = np.stack(per_foot_w, axis=1) / (2 * dim)
    return PropagationStencil(controls=controls, index=index, weight=weight)


def sl_bellman_operator(grid: Grid, U: np.ndarray, node: int, t: float, model: ModelParams, scheme: SchemeParams):
    """Straight-line evaluation of the lattice minimum at one node.

    Returns ``(value, alpha_star, stencil)``.  Ties go to the smallest
    ``|alpha|`` and then to the lexicographically smallest control.  This is
    the readable counterpart of :func:`bellman_field`.
    """
    dim = grid.dim
    x = grid.points[node]
    poles = poles_at(model.schedule, t)
    U = np.asarray(U, dtype=float)
    u_x = U.ravel()[node]
    state = 0.5 * model.a3 * advert_cost(x, poles, dim) if model.a3 != 0.0 else 0.0
    best = (math.inf, None, None)
    for alpha in control_lattice(scheme, dim):
        acc = 0.0
        stencil: dict[int, float] = {}
        feet = project_to_domain(grid, feet_points(x, alpha, scheme.eps, scheme.h))
        for foot in feet:
            v, st = interpolate(grid, U, foot)
            acc += v
            for j, w in st:
                stencil[j] = stencil.get(j, 0.0) + w / (2 * dim)
        val = (acc / (2 * dim) - u_x) / scheme.h + 0.5 * model.a2 * float(np.dot(alpha, alpha))
        if val < best[0]:
            best = (val, alpha.copy(), stencil)
    val, alpha, stencil = best
    return val + state, alpha, sorted(stencil.items())


def bellman_field(grid: Grid, U: np.ndarray, t: float, model: ModelParams, scheme: SchemeParams):
    """Lattice minimum at every node; returns ``(values, controls)``.

    ``controls`` has shape ``(size, dim)``.
    """
    U = np.ascontiguousarray(U, dtype=float)
    if U.shape != grid.shape:
        raise DimensionMismatch(f"U shape {U.shape} != grid shape {grid.shape}")
    levels, ks, alphas = _lattice(scheme.alpha_max, scheme.n_alpha, grid.dim)
    s = scheme.foot_offset(grid.dim)
    if grid.dim == 1:
        vals, best = _kernels.bellman_min_1d(
            U, grid.axes[0], grid.lo[0], grid.hi[0], grid.dx, scheme.h, s, np.ascontiguousarray(alphas[:, 0]), model.a2
        )
    else:
        vals, best = _kernels.bellman_min_2d(
            U,
            grid.axes[0],
            grid.axes[1],
            grid.lo[0],
            grid.hi[0],
            grid.lo[1],
            grid.hi[1],
            grid.dx,
            scheme.h,
            s,
            levels,
            np.ascontiguousarray(ks[:, 0]),
            np.ascontiguousarray(ks[:, 1]),
            model.a2,
        )
    if model.a3 != 0.0:
        poles = poles_at(model.schedule, t)
        vals = vals + 0.5 * model.a3 * advert_cost(grid.points, poles, grid.dim).reshape(grid.shape)
    return vals, alphas[best.ravel()]


def hj_step(grid: Grid, U: np.ndarray, M: np.ndarray, t: float, model: ModelParams, scheme: SchemeParams, F=None):
    """One explicit step of the potential; returns ``(U_next, stencil)``.

    ``F`` (the coupling field for ``M``) is computed unless supplied.
    """
    if F is None:
        F = coupling_field(grid, M, model)
    B, controls = bellman_field(grid, U, t, model, scheme)
    U_next = U + scheme.dt * (F + B - scheme.lam * U)
    if not np.all(np.isfinite(U_next)):
        raise NonFiniteUpdate(f"non-finite potential after step at t = {t}")
    return U_next, build_stencil(grid, controls, scheme)


def adjoint_fp_step(M: np.ndarray, stencil: PropagationStencil, scheme: SchemeParams) -> np.ndarray:
    """Advance the density with the transpose of the frozen-control propagation.

    Each node keeps ``1 - dt/h`` of its mass and scatters ``dt/h`` along its
    stencil weights, so positivity and total mass are preserved.
    """
    if scheme.dt > scheme.h:
        raise CFLViolated(f"dt = {scheme.dt} > h = {scheme.h}")
    M = np.asarray(M, dtype=float)
    r = scheme.dt / scheme.h
    flat = M.ravel()
    out = (1.0 - r) * flat + stencil.apply_transpose(r * flat)
    return out.reshape(M.shape)
