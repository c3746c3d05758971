"""Opinion-model ingredients: the Gaussian influence kernel, the nonlocal
local-average coupling, advertised poles and the quadratic running cost."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalizer, DimensionMismatch, InvalidParameter, TimeOutsideSchedule
from .grid import Grid

NORMALIZER_FLOOR = 1e-300


@dataclass(frozen=True)
class Pole:
    """An advertised opinion and the strength of its pull."""

    position: tuple[float, ...]
    strength: float

    def __post_init__(self):
        if not (math.isfinite(self.strength) and self.strength >= 0):
            raise InvalidParameter(f"pole strength must be finite and >= 0, got {self.strength}")


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    poles: tuple[Pole, ...]


@dataclass(frozen=True)
class PoleSchedule:
    """Piecewise-constant pole configuration over ``[0, T]``.

    Segments are half-open ``[t_start, t_end)`` so a switching time belongs
    to the later segment; the last segment also contains ``T``.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise InvalidParameter("schedule needs at least one segment")
        if self.segments[0].t_start != 0.0:
            raise InvalidParameter("schedule must start at t = 0")
        dims = set()
        for prev, seg in zip(self.segments, self.segments[1:]):
            if seg.t_start != prev.t_end:
                raise InvalidParameter(f"segments must be contiguous ({prev.t_end} != {seg.t_start})")
        for seg in self.segments:
            if not seg.t_end > seg.t_start:
                raise InvalidParameter("segment must have positive length")
            if not seg.poles:
                raise InvalidParameter("each segment needs at least one pole")
            dims.update(len(p.position) for p in seg.poles)
        if len(dims) != 1:
            raise DimensionMismatch("all poles must live in the same dimension")

    @property
    def horizon(self) -> float:
        return self.segments[-1].t_end

    @property
    def dim(self) -> int:
        return len(self.segments[0].poles[0].position)

    @classmethod
    def constant(cls, poles: Iterable[tuple], T: float) -> PoleSchedule:
        """Single segment; ``poles`` is an iterable of ``(position, strength)``."""
        return cls.piecewise([(0.0, T, poles)])

    @classmethod
    def piecewise(cls, segments: Iterable[tuple]) -> PoleSchedule:
        """From ``(t_start, t_end, [(position, strength), ...])`` triples."""
        segs = []
        for t0, t1, poles in segments:
            segs.append(
                Segment(
                    float(t0),
                    float(t1),
                    tuple(Pole(tuple(float(c) for c in np.atleast_1d(pos)), float(k)) for pos, k in poles),
                )
            )
        return cls(tuple(segs))


@dataclass(frozen=True)
class ModelParams:
    a1: float
    a2: float
    a3: float
    kernel_width: float
    schedule: PoleSchedule

    def __post_init__(self):
        for name in ("a1", "a3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameter(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.a2) and self.a2 > 0):
            raise InvalidParameter(f"a2 must be > 0, got {self.a2}")
        if not (math.isfinite(self.kernel_width) and self.kernel_width > 0):
            raise InvalidParameter(f"kernel_width must be > 0, got {self.kernel_width}")


def _points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to shape ``(..., dim)``; 1D scalars/vectors get a trailing axis."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"expected points with {dim} components, got shape {x.shape}")
    return x


def kernel_eval(width: float, x, dim: int = 1):
    """Influence kernel ``exp(-|x|^2 / width) / sqrt(width * pi)``."""
    x = _points(x, dim)
    r2 = np.sum(x * x, axis=-1)
    out = np.exp(-r2 / width) / math.sqrt(width * math.pi)
    return float(out) if out.ndim == 0 else out


def _axis_kernel(coords: np.ndarray, width: float) -> np.ndarray:
    d = coords[None, :] - coords[:, None]
    return np.exp(-(d * d) / width)


def local_average(grid: Grid, density: np.ndarray, width: float) -> np.ndarray:
    """Kernel-weighted mean opinion around every node.

    Both integrals use the same Riemann sum, so a point mass at node ``y``
    gives ``y`` everywhere.  The Gaussian factorizes over axes, which keeps
    the 2D double sum at two small matrix products per component.

    Returns an array of shape ``(dim, *grid.shape)``.
    """
    density = np.asarray(density, dtype=float)
    if density.shape != grid.shape:
        raise DimensionMismatch(f"density shape {density.shape} != grid shape {grid.shape}")
    scale = grid.cell_volume / math.sqrt(width * math.pi)
    mats = [_axis_kernel(ax, width) for ax in grid.axes]

    def convolve(f):
        if grid.dim == 1:
            return mats[0] @ f
        return mats[0] @ f @ mats[1].T

    denom = scale * convolve(density)
    if denom.min() < NORMALIZER_FLOOR:
        raise DegenerateNormalizer(
            f"kernel mass {denom.min():.3e} below {NORMALIZER_FLOOR:g}; kernel too narrow for this grid/density"
        )
    return np.stack([scale * convolve(density * coord) / denom for coord in grid.mesh], axis=0)


def coupling_F(x, mbar, a1: float, dim: int = 1):
    """Conformism cost ``a1 * |mbar - x|`` (Euclidean norm in 2D)."""
    x = _points(x, dim)
    mbar = _points(mbar, dim)
    out = a1 * np.sqrt(np.sum((mbar - x) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def coupling_field(grid: Grid, density: np.ndarray, params: ModelParams) -> np.ndarray:
    """``F`` at every node for the given density snapshot."""
    if params.a1 == 0.0:
        return grid.zeros()
    mbar = local_average(grid, density, params.kernel_width)
    diff = mbar - np.stack(grid.mesh, axis=0)
    return params.a1 * np.sqrt(np.sum(diff * diff, axis=0))


def poles_at(schedule: PoleSchedule, t: float) -> tuple[Pole, ...]:
    T = schedule.horizon
    if not (0.0 <= t <= T):
        raise TimeOutsideSchedule(f"t = {t} outside [0, {T}]")
    for seg in schedule.segments:
        if seg.t_start <= t < seg.t_end:
            return seg.poles
    return schedule.segments[-1].poles


def advert_cost(x, poles: Sequence[Pole], dim: int | None = None):
    """``min_i k_i |xbar_i - x|^2`` over the active poles."""
    if not poles:
        raise InvalidParameter("advert_cost needs at least one pole")
    dim = dim or len(poles[0].position)
    x = _points(x, dim)
    costs = [p.strength * np.sum((np.asarray(p.position) - x) ** 2, axis=-1) for p in poles]
    out = np.min(np.stack(costs, axis=0), axis=0)
    return float(out) if out.ndim == 0 else out


def running_cost_ell(x, alpha, poles: Sequence[Pole], params: ModelParams):
    """``0.5 * (a2 |alpha|^2 + a3 * min_i k_i |xbar_i - x|^2)``."""
    dim = len(poles[0].position)
    alpha = _points(alpha, dim)
    state = advert_cost(x, poles, dim) if params.a3 != 0.0 else 0.0
    out = 0.5 * (params.a2 * np.sum(alpha * alpha, axis=-1) + params.a3 * state)
    return float(out) if np.ndim(out) == 0 else out


def hamiltonian_closed_form(p, a2: float):
    """``|p|^2 / (2 a2)``, the Legendre transform of ``a2 |alpha|^2 / 2``."""
    if not a2 > 0:
        raise InvalidParameter("a2 must be positive")
    # scalar p is a 1D gradient; otherwise the last axis holds components
    p = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.sum(p * p, axis=-1) / (2.0 * a2)
    return float(out) if np.ndim(out) == 0 else out


def legendre_maximizer(p, a2: float):
    """Maximizer ``p / a2`` of ``alpha . p - a2 |alpha|^2 / 2``.

    The density drift is the negative of this evaluated at ``grad u``.
    """
    return np.asarray(p, dtype=float) / a2
