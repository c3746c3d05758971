"""Time marching for the forward-forward system, the damped fixed-point
solver for the classical forward-backward system, and run diagnostics."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    ConservationError,
    DimensionMismatch,
    FixedPointDiverged,
    InvalidParameter,
    NonFiniteState,
    NonFiniteUpdate,
)
from .grid import Grid, check_density, discrete_mass, gradient_central
from .model import ModelParams, coupling_field
from .scheme import SchemeParams, adjoint_fp_step, bellman_field, build_stencil, hj_step

logger = logging.getLogger(__name__)

MASS_DRIFT_TOL = 1e-9
CLUSTER_THRESHOLD = 0.1


@dataclass(frozen=True)
class Observables:
    t: float
    mean_opinion: tuple[float, ...]
    mass: float
    sup_U: float
    fp_residual: float  # NaN at t = 0
    cluster_count: int


@dataclass(frozen=True)
class FBParams:
    damping: float = 0.5
    tol: float = 1e-4
    max_iters: int = 200

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise InvalidParameter(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0:
            raise InvalidParameter("tol must be positive")
        if self.max_iters < 1:
            raise InvalidParameter("max_iters must be >= 1")


@dataclass
class Trajectory:
    """Result of a run.

    ``times`` holds every step time; snapshots are stored only at
    ``sample_times`` (snapped to the nearest step).  Control maps are
    ``-grad U / a2`` with shape ``(dim, *grid.shape)``.
    """

    grid: Grid
    times: np.ndarray
    sample_times: list[float] = field(default_factory=list)
    U_snapshots: list[np.ndarray] = field(default_factory=list)
    M_snapshots: list[np.ndarray] = field(default_factory=list)
    control_maps: list[np.ndarray] = field(default_factory=list)
    observables: list[Observables] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    #: full ``(U_path, M_path)`` arrays, kept by the forward-backward solver only
    paths: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def final(self) -> Observables:
        return self.observables[-1]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(o, name) for o in self.observables])

    def snapshot(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        k = int(np.argmin(np.abs(np.asarray(self.sample_times) - t)))
        return self.U_snapshots[k], self.M_snapshots[k]


def mean_opinion(grid: Grid, M: np.ndarray) -> tuple[float, ...]:
    return tuple(float(np.sum(c * M) * grid.cell_volume) for c in grid.mesh)


def steady_state_residual(grid: Grid, M_t: np.ndarray, M_prev: np.ndarray, dt: float) -> float:
    return float(np.sum(np.abs(M_t - M_prev)) * grid.cell_volume / dt)


def wasserstein_1d(grid: Grid, m1: np.ndarray, m2: np.ndarray) -> float:
    """``W1`` between two nodal densities from their left Riemann CDFs."""
    if grid.dim != 1 or np.ndim(m1) != 1 or np.ndim(m2) != 1:
        raise DimensionMismatch("wasserstein_1d needs 1D densities")
    c1 = np.cumsum(m1) * grid.dx
    c2 = np.cumsum(m2) * grid.dx
    return float(grid.dx * np.sum(np.abs(c1 - c2)))


def l1_distance(grid: Grid, m1: np.ndarray, m2: np.ndarray) -> float:
    return float(np.sum(np.abs(m1 - m2)) * grid.cell_volume)


def density_metric(grid: Grid, m1: np.ndarray, m2: np.ndarray) -> float:
    """``W1`` in 1D, ``L1`` in 2D; the fixed-point stopping metric."""
    return wasserstein_1d(grid, m1, m2) if grid.dim == 1 else l1_distance(grid, m1, m2)


def cluster_count(M: np.ndarray, threshold: float = CLUSTER_THRESHOLD) -> int:
    """Strict local maxima above ``threshold * max(M)``; equal-valued plateaus count once.

    A plateau is a connected set of equal nodes (8-connected in 2D) and counts
    if every node touching it from outside is strictly lower.
    """
    M = np.asarray(M, dtype=float)
    peak = M.max()
    if not peak > 0:
        return 0
    footprint = np.ones((3,) * M.ndim, dtype=bool)
    cand = (M == ndimage.maximum_filter(M, footprint=footprint, mode="nearest")) & (M > threshold * peak)
    labels, n = ndimage.label(cand, structure=footprint)
    count = 0
    for lab in range(1, n + 1):
        comp = labels == lab
        value = M[comp][0]
        ring = ndimage.binary_dilation(comp, structure=footprint) & ~comp
        if not ring.any() or M[ring].max() < value:
            count += 1
    return count


def _check_state(grid: Grid, M: np.ndarray, U: np.ndarray | None, step: int) -> float:
    if not np.all(np.isfinite(M)) or (U is not None and not np.all(np.isfinite(U))):
        raise NonFiniteState(step)
    mass = discrete_mass(grid, M)
    lo = float(M.min())
    if abs(mass - 1.0) > MASS_DRIFT_TOL or lo < 0.0:
        raise ConservationError(step, mass, lo)
    return mass


def _snap_indices(sample_times: Sequence[float], dt: float, n_steps: int) -> dict[int, float]:
    out = {}
    for t in sample_times:
        k = int(round(t / dt))
        if not 0 <= k <= n_steps:
            raise InvalidParameter(f"sample time {t} outside [0, {n_steps * dt}]")
        out[k] = k * dt
    return out


def _n_steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise InvalidParameter(f"horizon {T} is not a positive multiple of dt = {dt}")
    return n


def _control_map(grid: Grid, U: np.ndarray, a2: float) -> np.ndarray:
    return -gradient_central(grid, U) / a2


class _Recorder:
    def __init__(self, grid: Grid, model: ModelParams, dt: float, n_steps: int, sample_times):
        self.grid = grid
        self.a2 = model.a2
        self.dt = dt
        self.snaps = _snap_indices(sample_times, dt, n_steps)
        self.traj = Trajectory(grid=grid, times=dt * np.arange(n_steps + 1))

    def record(self, k: int, U: np.ndarray, M: np.ndarray, M_prev: np.ndarray | None):
        grid = self.grid
        mass = _check_state(grid, M, U, k)
        resid = float("nan") if M_prev is None else steady_state_residual(grid, M, M_prev, self.dt)
        self.traj.observables.append(
            Observables(
                t=float(self.traj.times[k]),
                mean_opinion=mean_opinion(grid, M),
                mass=mass,
                sup_U=float(np.max(np.abs(U))),
                fp_residual=resid,
                cluster_count=cluster_count(M),
            )
        )
        if k in self.snaps:
            self.traj.sample_times.append(self.snaps[k])
            self.traj.U_snapshots.append(U.copy())
            self.traj.M_snapshots.append(M.copy())
            self.traj.control_maps.append(_control_map(grid, U, self.a2))


def run_forward_forward(
    grid: Grid,
    model: ModelParams,
    scheme: SchemeParams,
    u0: np.ndarray,
    m0: np.ndarray,
    T: float,
    sample_times: Sequence[float] = (),
) -> Trajectory:
    """March potential and density forward together.

    Each step computes the coupling from the current density, advances the
    potential, then advances the density with the stencil of that same step.
    """
    n_steps = _n_steps(T, scheme.dt)
    U = np.array(u0, dtype=float).reshape(grid.shape)
    M = check_density(grid, np.array(m0, dtype=float)).copy()
    rec = _Recorder(grid, model, scheme.dt, n_steps, sample_times)
    rec.record(0, U, M, None)
    for k in range(n_steps):
        t = k * scheme.dt
        try:
            U, stencil = hj_step(grid, U, M, t, model, scheme)
        except NonFiniteUpdate as exc:
            raise NonFiniteState(k + 1, str(exc)) from exc
        M_next = adjoint_fp_step(M, stencil, scheme)
        rec.record(k + 1, U, M_next, M)
        M = M_next
    rec.traj.meta.update(mode="FF", steps=n_steps)
    return rec.traj


def _backward_sweep(grid, model, scheme, u_terminal, M_path, n_steps):
    """Potential backward from ``u(T)`` against a frozen density path.

    Under ``t -> T - t`` the backward equation is the forward one, so each
    step reuses :func:`hj_step` with the density and poles of the later time.
    Returns the potential path and, per step ``k``, the controls used to move
    mass from ``t_k`` to ``t_{k+1}``.
    """
    U_path = np.empty((n_steps + 1, *grid.shape))
    controls = np.empty((n_steps, grid.size, grid.dim))
    U = np.array(u_terminal, dtype=float).reshape(grid.shape)
    U_path[n_steps] = U
    for k in range(n_steps - 1, -1, -1):
        t_next = (k + 1) * scheme.dt
        F = coupling_field(grid, M_path[k + 1], model)
        B, ctrl = bellman_field(grid, U, t_next, model, scheme)
        U = U + scheme.dt * (F + B - scheme.lam * U)
        if not np.all(np.isfinite(U)):
            raise NonFiniteState(k, "backward potential")
        U_path[k] = U
        controls[k] = ctrl
    return U_path, controls


def _forward_density(grid, scheme, m0, controls, n_steps):
    M_path = np.empty((n_steps + 1, *grid.shape))
    M = np.array(m0, dtype=float)
    M_path[0] = M
    for k in range(n_steps):
        M = adjoint_fp_step(M, build_stencil(grid, controls[k], scheme), scheme)
        _check_state(grid, M, None, k + 1)
        M_path[k + 1] = M
    return M_path


def fb_sweep(grid, model, scheme, u_terminal, m0, M_path):
    """One undamped fixed-point sweep: ``(U_path, M_new)`` for a given density path."""
    n_steps = M_path.shape[0] - 1
    U_path, controls = _backward_sweep(grid, model, scheme, u_terminal, M_path, n_steps)
    return U_path, _forward_density(grid, scheme, m0, controls, n_steps)


def run_forward_backward(
    grid: Grid,
    model: ModelParams,
    scheme: SchemeParams,
    u_terminal: np.ndarray,
    m0: np.ndarray,
    T: float,
    fb: FBParams = FBParams(),
    sample_times: Sequence[float] = (),
) -> Trajectory:
    """Damped fixed point for the terminal-initial system.

    Starting from the frozen path ``M(t) = m0``, every sweep solves the
    potential backward against the current path, pushes ``m0`` forward with
    the resulting controls and relaxes ``M <- (1 - theta) M + theta M_new``.
    The sweep whose update moves the path by less than ``tol`` (sup over time
    of :func:`density_metric`) only confirms convergence, so ``meta['iterations']``
    counts the sweeps before it.
    """
    n_steps = _n_steps(T, scheme.dt)
    m0 = check_density(grid, np.array(m0, dtype=float))
    M_path = np.broadcast_to(m0, (n_steps + 1, *grid.shape)).copy()
    residuals: list[float] = []
    theta = fb.damping
    for sweep in range(1, fb.max_iters + 1):
        U_path, M_new = fb_sweep(grid, model, scheme, u_terminal, m0, M_path)
        M_next = (1.0 - theta) * M_path + theta * M_new
        resid = max(density_metric(grid, a, b) for a, b in zip(M_next, M_path))
        residuals.append(resid)
        logger.debug("fixed-point sweep %d: residual %.3e", sweep, resid)
        M_path = M_next
        if resid < fb.tol:
            break
    converged = residuals[-1] < fb.tol

    rec = _Recorder(grid, model, scheme.dt, n_steps, sample_times)
    for k in range(n_steps + 1):
        rec.record(k, U_path[k], M_path[k], M_path[k - 1] if k else None)
    rec.traj.meta.update(
        mode="FB",
        steps=n_steps,
        iterations=len(residuals) - 1 if converged else len(residuals),
        sweeps=len(residuals),
        residuals=residuals,
        final_residual=residuals[-1],
        converged=converged,
    )
    rec.traj.paths = (U_path, M_path)
    if not converged:
        raise FixedPointDiverged(fb.max_iters, residuals[-1], rec.traj)
    return rec.traj
