"""Uniform node lattices in one or two dimensions and the field operations on them.

Fields are plain ``numpy`` arrays of shape ``grid.shape``; axis 0 is x1 and
axis 1 (if present) is x2.  Flattening is C order, so the flat node index is
``i1 * n2 + i2``.  That order is also the row order of every CSV written by
:mod:`ffmfg.io`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BoundsMismatch,
    DimensionMismatch,
    InvalidDensity,
    NonPositiveSpacing,
    PointOutsideDomain,
)

#: tolerance used when snapping (hi - lo) / dx to an integer
SNAP_TOL = 1e-9
MASS_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Axis-aligned uniform lattice with the same spacing on every axis."""

    dim: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    dx: float
    n: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DimensionMismatch(f"dim must be 1 or 2, got {self.dim}")
        if not (len(self.lo) == len(self.hi) == len(self.n) == self.dim):
            raise DimensionMismatch("lo, hi and n must have one entry per axis")
        if not self.dx > 0:
            raise NonPositiveSpacing(f"dx must be positive, got {self.dx}")
        for a, b, k in zip(self.lo, self.hi, self.n):
            if not b > a:
                raise BoundsMismatch(f"hi must exceed lo on every axis ({a} >= {b})")
            if k < 3:
                raise BoundsMismatch(f"need at least 3 nodes per axis, got {k}")
            if abs((b - a) / self.dx - (k - 1)) > 1e-12 * (k - 1):
                raise BoundsMismatch(f"(hi - lo)/dx = {(b - a) / self.dx} does not match n - 1 = {k - 1}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """1D node coordinates per axis, ``lo + i * dx``."""
        return tuple(lo + self.dx * np.arange(k) for lo, k in zip(self.lo, self.n))

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape``, one per axis."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """All nodes as an ``(size, dim)`` array in flat (C) order."""
        return np.stack([m.ravel() for m in self.mesh], axis=1)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def __repr__(self) -> str:
        return f"Grid(dim={self.dim}, lo={self.lo}, hi={self.hi}, dx={self.dx}, n={self.n})"


def _per_axis(value, dim: int) -> tuple[float, ...]:
    if np.ndim(value) == 0:
        return (float(value),) * dim
    value = tuple(float(v) for v in value)
    if len(value) != dim:
        raise DimensionMismatch(f"expected {dim} bounds, got {len(value)}")
    return value


def build_grid(dim: int, lo, hi, dx: float) -> Grid:
    """Build a uniform grid; ``lo``/``hi`` may be scalars (same on every axis).

    ``(hi - lo) / dx`` has to be an integer up to ``SNAP_TOL``; ``hi`` is then
    recomputed as ``lo + (n - 1) * dx`` so node coordinates are exactly
    ``lo + i * dx``.
    """
    if dim not in (1, 2):
        raise DimensionMismatch(f"dim must be 1 or 2, got {dim}")
    dx = float(dx)
    if not dx > 0:
        raise NonPositiveSpacing(f"dx must be positive, got {dx}")
    lo_t, hi_t = _per_axis(lo, dim), _per_axis(hi, dim)
    n = []
    for a, b in zip(lo_t, hi_t):
        if not b > a:
            raise BoundsMismatch(f"hi must exceed lo on every axis ({a} >= {b})")
        cells = (b - a) / dx
        k = round(cells)
        if abs(cells - k) > SNAP_TOL:
            raise BoundsMismatch(f"(hi - lo)/dx = {cells} is not an integer")
        n.append(k + 1)
    hi_t = tuple(a + (k - 1) * dx for a, k in zip(lo_t, n))
    return Grid(dim=dim, lo=lo_t, hi=hi_t, dx=dx, n=tuple(n))


def project_to_domain(grid: Grid, point) -> np.ndarray:
    """Componentwise clamp of ``point`` (shape ``(..., dim)``) into the closed box."""
    point = np.asarray(point, dtype=float)
    return np.clip(point, grid.lo, grid.hi) if grid.dim > 1 else np.clip(point, grid.lo[0], grid.hi[0])


def axis_weights(grid: Grid, axis: int, coord) -> tuple[np.ndarray, np.ndarray]:
    """Left node index and right-node weight for linear interpolation along one axis.

    ``coord`` must already lie in ``[lo, hi]`` on that axis.  Returns ``(i0, w)``
    with the value ``(1 - w) * f[i0] + w * f[i0 + 1]``.
    """
    pos = (np.asarray(coord, dtype=float) - grid.lo[axis]) / grid.dx
    i0 = np.minimum(np.floor(pos).astype(np.int64), grid.n[axis] - 2)
    i0 = np.maximum(i0, 0)
    w = pos - i0
    return i0, w


def interpolate(grid: Grid, values: np.ndarray, point) -> tuple[float, list[tuple[int, float]]]:
    """Multilinear interpolation at a single in-domain point.

    Returns the interpolated value and the stencil as ``(flat node index, weight)``
    pairs.  Weights are nonnegative and sum to one; zero weights are dropped.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.shape != (grid.dim,):
        raise DimensionMismatch(f"point must have {grid.dim} components")
    if not np.all(np.isfinite(point)):
        raise PointOutsideDomain(f"non-finite point {point}")
    for a in range(grid.dim):
        slack = 1e-12 * max(1.0, abs(grid.lo[a]), abs(grid.hi[a]))
        if point[a] < grid.lo[a] - slack or point[a] > grid.hi[a] + slack:
            raise PointOutsideDomain(f"point {point} outside [{grid.lo}, {grid.hi}]; project it first")
    point = project_to_domain(grid, point)

    per_axis = []
    for a in range(grid.dim):
        i0, w = axis_weights(grid, a, point[a])
        per_axis.append(((int(i0), 1.0 - float(w)), (int(i0) + 1, float(w))))

    flat = np.asarray(values, dtype=float).ravel()
    stencil: list[tuple[int, float]] = []
    if grid.dim == 1:
        for i, w in per_axis[0]:
            if w > 0.0:
                stencil.append((i, w))
    else:
        n2 = grid.n[1]
        for i, wi in per_axis[0]:
            for j, wj in per_axis[1]:
                w = wi * wj
                if w > 0.0:
                    stencil.append((i * n2 + j, w))
    value = float(sum(w * flat[k] for k, w in stencil))
    return value, stencil


def gradient_central(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Central differences inside, first-order one-sided at the boundary.

    Returns an array of shape ``(dim, *grid.shape)``.
    """
    values = np.asarray(values, dtype=float)
    grads = np.gradient(values, grid.dx, edge_order=1)
    if grid.dim == 1:
        grads = [grads]
    return np.stack(grads, axis=0)


def discrete_mass(grid: Grid, values: np.ndarray) -> float:
    return float(np.sum(values) * grid.cell_volume)


def check_density(grid: Grid, values: np.ndarray, tol: float = MASS_TOL) -> np.ndarray:
    """Validate a density field (shape, finiteness, positivity, unit mass)."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise DimensionMismatch(f"density shape {values.shape} != grid shape {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidDensity("density has non-finite entries")
    if values.min() < 0:
        raise InvalidDensity(f"density has negative entries (min {values.min()})")
    mass = discrete_mass(grid, values)
    if abs(mass - 1.0) > tol:
        raise InvalidDensity(f"density mass {mass} differs from 1")
    return values


def normalize_density(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Rescale a nonnegative field to unit discrete mass."""
    values = np.asarray(values, dtype=float)
    mass = discrete_mass(grid, values)
    if not mass > 0:
        raise InvalidDensity("cannot normalize a field with zero mass")
    return values / mass


def indicator_density(grid: Grid, lo, hi) -> np.ndarray:
    """Indicator of the box ``[lo, hi]`` sampled at nodes, renormalized to mass one."""
    lo_t, hi_t = _per_axis(lo, grid.dim), _per_axis(hi, grid.dim)
    tol = 1e-9 * grid.dx
    inside = np.ones(grid.shape, dtype=bool)
    for m, a, b in zip(grid.mesh, lo_t, hi_t):
        inside &= (m >= a - tol) & (m <= b + tol)
    return normalize_density(grid, inside.astype(float))


def sample(grid: Grid, func) -> np.ndarray:
    """Evaluate ``func`` on the ``(size, dim)`` node array and reshape to the grid."""
    out = np.asarray(func(grid.points), dtype=float)
    return out.reshape(grid.shape)

