"""Preset experiments (opinion formation in 1D, two- and three-candidate
voting in 2D) and the voting observables.

Every numeric parameter of a preset carries a provenance tag: ``paper``
values come with a short anchor of the formula they were read from,
``non_paper`` values with a note on why they were chosen.  Constructing an
:class:`Preset` with an untagged parameter fails.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, UnknownPreset, ValidationError
from .grid import Grid, build_grid, indicator_density
from .model import ModelParams, PoleSchedule, advert_cost, poles_at
from .scheme import SchemeParams
from .solver import FBParams, Trajectory, run_forward_backward, run_forward_forward

PAPER = "paper"
NON_PAPER = "non_paper"
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Tag:
    provenance: str  # PAPER or NON_PAPER
    quote: str = ""

    def __post_init__(self):
        if self.provenance not in (PAPER, NON_PAPER):
            raise ValueError(f"provenance must be {PAPER!r} or {NON_PAPER!r}")


def paper(quote: str) -> Tag:
    return Tag(PAPER, quote)


def non_paper(note: str) -> Tag:
    return Tag(NON_PAPER, note)


@dataclass(frozen=True)
class InitialData:
    """Declarative initial condition.

    ``zero``      identically 0
    ``advert``    ``min_i k_i |xbar_i - x|^2`` with the poles active at t = 0
    ``indicator`` indicator of the box ``[lo, hi]`` renormalized to unit mass
    """

    kind: str
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "advert", "indicator"):
            raise InvalidParameter(f"unknown initial-data kind {self.kind!r}")
        if self.kind == "indicator" and (self.lo is None or self.hi is None):
            raise InvalidParameter("indicator initial data needs lo and hi")

    def evaluate(self, grid: Grid, model: ModelParams) -> np.ndarray:
        if self.kind == "zero":
            return grid.zeros()
        if self.kind == "advert":
            poles = poles_at(model.schedule, 0.0)
            return advert_cost(grid.points, poles, grid.dim).reshape(grid.shape)
        return indicator_density(grid, self.lo, self.hi)


def parameter_table(grid, model, scheme, T, sample_times, u0, m0, fb) -> dict[str, object]:
    """Every numeric parameter of a run, keyed by a dotted path."""
    g, m, s = grid, model, scheme
    out: dict[str, object] = {
        "grid.dim": g.dim,
        "grid.lo": list(g.lo),
        "grid.hi": list(g.hi),
        "grid.dx": g.dx,
        "scheme.dt": s.dt,
        "scheme.h": s.h,
        "scheme.eps": s.eps,
        "scheme.lam": s.lam,
        "scheme.alpha_max": s.alpha_max,
        "scheme.n_alpha": s.n_alpha,
        "model.a1": m.a1,
        "model.a2": m.a2,
        "model.a3": m.a3,
        "model.kernel_width": m.kernel_width,
        "T": T,
        "sample_times": list(sample_times),
    }
    for i, seg in enumerate(m.schedule.segments):
        out[f"model.schedule[{i}].t_start"] = seg.t_start
        out[f"model.schedule[{i}].t_end"] = seg.t_end
        for j, pole in enumerate(seg.poles):
            out[f"model.schedule[{i}].poles[{j}].position"] = list(pole.position)
            out[f"model.schedule[{i}].poles[{j}].strength"] = pole.strength
    for name, data in (("u0", u0), ("m0", m0)):
        if data.kind == "indicator":
            out[f"{name}.lo"] = list(data.lo)
            out[f"{name}.hi"] = list(data.hi)
    if fb is not None:
        out["fb.damping"] = fb.damping
        out["fb.tol"] = fb.tol
        out["fb.max_iters"] = fb.max_iters
    return out


@dataclass(frozen=True)
class Preset:
    """A fully specified run: grid, model, scheme, data, horizon and mode."""

    id: str
    grid: Grid
    model: ModelParams
    scheme: SchemeParams
    T: float
    u0: InitialData
    m0: InitialData
    sample_times: tuple[float, ...]
    mode: str = "FF"
    fb: FBParams | None = None
    tags: dict[str, Tag] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("FF", "FB"):
            raise ValidationError("mode", f"mode must be FF or FB, got {self.mode!r}")
        if self.mode == "FB" and self.fb is None:
            raise ValidationError("fb", "forward-backward mode needs fixed-point parameters")
        if self.model.schedule.dim != self.grid.dim:
            raise ValidationError("model.schedule", "pole dimension differs from grid dimension")
        if abs(self.model.schedule.horizon - self.T) > 1e-12:
            raise ValidationError("T", f"schedule covers [0, {self.model.schedule.horizon}], horizon is {self.T}")
        if list(self.sample_times) != sorted(self.sample_times) or any(
            not (0.0 <= t <= self.T) for t in self.sample_times
        ):
            raise ValidationError("sample_times", "sample times must be sorted and inside [0, T]")
        missing = [k for k in self.parameters() if k not in self.tags]
        if missing:
            raise ValidationError("provenance", f"untagged parameters: {', '.join(missing)}")

    def parameters(self) -> dict[str, object]:
        """Every numeric parameter, keyed by a dotted path."""
        return parameter_table(self.grid, self.model, self.scheme, self.T, self.sample_times, self.u0, self.m0, self.fb)

    def manifest(self) -> list[dict]:
        """Rows ``{parameter, value, provenance, quote}`` for every parameter."""
        rows = []
        for key, value in self.parameters().items():
            tag = self.tags[key]
            rows.append({"parameter": key, "value": value, "provenance": tag.provenance, "quote": tag.quote})
        return rows

    def initial_fields(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u0.evaluate(self.grid, self.model), self.m0.evaluate(self.grid, self.model)

    def run(self, sample_times=None) -> Trajectory:
        times = self.sample_times if sample_times is None else sample_times
        u0, m0 = self.initial_fields()
        if self.mode == "FF":
            traj = run_forward_forward(self.grid, self.model, self.scheme, u0, m0, self.T, times)
        else:
            traj = run_forward_backward(self.grid, self.model, self.scheme, u0, m0, self.T, self.fb, times)
        traj.meta["experiment"] = self.id
        return traj


# --------------------------------------------------------------------------- presets

DX = 0.04
DT = 0.02
EPS = 0.01
ALPHA_MAX = 4.0
# lattice points per axis; 2D evaluates n_alpha**2 controls per node, hence the coarser value
N_ALPHA = {1: 257, 2: 65}
TEST2_LAMBDAS = (0.0, 1.0, 3.0, 7.0, 10.0)

_H_NOTE = non_paper("h = dx balances the O(h) and O(dx^2/h) consistency errors")
_ALPHA_MAX_NOTE = non_paper("control bound; the unconstrained optimum stays inside")
_N_ALPHA_NOTE = non_paper("lattice resolution; a coarse lattice has a zero-control band that pins clusters")


def _common_tags(dim: int) -> dict[str, Tag]:
    if dim == 1:
        grid_tag = paper(r"\Omega\approx [-4,4]")
        kernel = paper(r"g(x)=\frac {1}{\sqrt {0.2\pi } }e^{-{\frac {x^{2}}{0.2} } }")
    else:
        grid_tag = paper(r"[-3/2,3/2]^2")
        kernel = paper(r"$\mu$ ... is set to 0.2")
    return {
        "grid.dim": paper("A 1D opinion formation model" if dim == 1 else "A dynamic 2D vote model"),
        "grid.lo": grid_tag,
        "grid.hi": grid_tag,
        "grid.dx": paper(r"\Delta x=0.04"),
        "scheme.dt": paper(r"\Delta t=0.02"),
        "scheme.h": _H_NOTE,
        "scheme.eps": paper(r"A(x)\equiv 0.01"),
        "scheme.alpha_max": _ALPHA_MAX_NOTE,
        "scheme.n_alpha": _N_ALPHA_NOTE,
        "model.kernel_width": kernel,
    }


def _schedule_tags(schedule: PoleSchedule, segment_tags, quotes) -> dict[str, Tag]:
    """``segment_tags[i]`` tags the start/end of segment i; ``quotes[i][j]`` tags pole j."""
    tags = {}
    for i, seg in enumerate(schedule.segments):
        tags[f"model.schedule[{i}].t_start"] = segment_tags[i][0]
        tags[f"model.schedule[{i}].t_end"] = segment_tags[i][1]
        for j, _ in enumerate(seg.poles):
            tags[f"model.schedule[{i}].poles[{j}].position"] = quotes[i][j]
            tags[f"model.schedule[{i}].poles[{j}].strength"] = quotes[i][j]
    return tags


def _grid(dim: int) -> Grid:
    return build_grid(1, -4.0, 4.0, DX) if dim == 1 else build_grid(2, -1.5, 1.5, DX)


def _scheme(dim: int, lam: float = 0.0) -> SchemeParams:
    return SchemeParams(dt=DT, h=DX, eps=EPS, lam=lam, alpha_max=ALPHA_MAX, n_alpha=N_ALPHA[dim])


_T1_POLES = [paper(r"(\bar x_1,k_1)=(0.8, 1)"), paper(r"(\bar x_2,k_2)=(0.2, 3)")]
_U0_ADVERT = paper(r"u_0(x)=\min_{i=1,2}k_i\left(\left(\bar x_i-x\right)^2\right)")
_M0_UNIT = paper(r"1 & \text{if }x\in[0,1]")


def _test1(mode: str, lam: float | None = None, id_: str | None = None) -> Preset:
    T = 30.0 if lam is None else 10.0
    schedule = PoleSchedule.constant([((0.8,), 1.0), ((0.2,), 3.0)], T)
    model = ModelParams(a1=1.0, a2=1.0, a3=2.0, kernel_width=0.2, schedule=schedule)
    if lam is None:
        times = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0)
        horizon = non_paper("horizon not stated; events narrated up to t=10 and a later final phase")
        lam_tag = paper(r"\lambda=0")
    else:
        times = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)
        horizon = non_paper("horizon not stated for the discount sweep")
        lam_tag = non_paper("discount sweep value bracketing lambda >= 7")
    tags = _common_tags(1) | {
        "scheme.lam": lam_tag,
        "model.a1": paper(r"tuned by $a_1=1$"),
        "model.a2": paper(r"is set to $a_2=1$"),
        "model.a3": paper(r"the weight $a_3=2$"),
        "T": horizon,
        "sample_times": non_paper("early-transient and late-time sampling"),
        "m0.lo": _M0_UNIT,
        "m0.hi": _M0_UNIT,
    } | _schedule_tags(schedule, [(paper(r"(\bar x_1,k_1)=(0.8, 1)"), horizon)], [_T1_POLES])
    fb = None
    if mode == "FB":
        fb = FBParams(damping=0.5, tol=1e-4, max_iters=200)
        tags |= {
            "fb.damping": non_paper("fixed-point damping"),
            "fb.tol": non_paper("fixed-point tolerance"),
            "fb.max_iters": non_paper("fixed-point iteration cap"),
        }
    return Preset(
        id=id_ or ("test1_ff" if mode == "FF" else "test1_fb"),
        grid=_grid(1),
        model=model,
        scheme=_scheme(1, 0.0 if lam is None else lam),
        T=T,
        u0=InitialData("advert"),
        m0=InitialData("indicator", (0.0,), (1.0,)),
        sample_times=times,
        mode=mode,
        fb=fb,
        tags=tags,
    )


def _test3(switch: bool) -> Preset:
    T = 10.0
    horizon = paper(r"t\in(0.5,10]")
    if switch:
        schedule = PoleSchedule.piecewise(
            [
                (0.0, 0.5, [((0.8,), 3.0), ((0.2,), 1.0)]),
                (0.5, T, [((0.8,), 1.0), ((0.2,), 3.0)]),
            ]
        )
        seg_tags = [
            (paper(r"t\in[0,0.5]"), paper(r"t\in[0,0.5]")),
            (paper(r"t\in(0.5,10]"), horizon),
        ]
        pole_tags = [
            [paper(r"(\bar x_1,k_1)=(0.8, 3)"), paper(r"(\bar x_2,k_2)=(0.2, 1)")],
            [paper(r"(\bar x_1,k_1)=(0.8, 1)"), paper(r"(\bar x_2,k_2)=(0.2, 3)")],
        ]
    else:
        schedule = PoleSchedule.constant([((0.8,), 1.0), ((0.2,), 1.0)], T)
        seg_tags = [(paper(r"(\bar x_1,k_1)=(0.8, 1)"), horizon)]
        pole_tags = [[paper(r"(\bar x_1,k_1)=(0.8, 1)"), paper(r"(\bar x_2,k_2)=(0.2, 1)")]]
    model = ModelParams(a1=1.0, a2=4.0, a3=1.0, kernel_width=0.2, schedule=schedule)
    tags = _common_tags(1) | {
        "scheme.lam": paper(r"restrict the remaining tests to the case $\lambda=0$"),
        "model.a1": paper(r"$a_1=1$, $a_2=4$, and $a_3=1$"),
        "model.a2": paper(r"$a_1=1$, $a_2=4$, and $a_3=1$"),
        "model.a3": paper(r"$a_1=1$, $a_2=4$, and $a_3=1$"),
        "T": horizon,
        "sample_times": non_paper("early-transient and late-time sampling"),
        "m0.lo": _M0_UNIT,
        "m0.hi": _M0_UNIT,
    } | _schedule_tags(schedule, seg_tags, pole_tags)
    return Preset(
        id="test3_advert_switch" if switch else "test3_clusters",
        grid=_grid(1),
        model=model,
        scheme=_scheme(1),
        T=T,
        u0=InitialData("advert"),
        m0=InitialData("indicator", (0.0,), (1.0,)),
        sample_times=(0.0, 0.5, 1.0, 2.0, 5.0, 10.0),
        tags=tags,
    )


_C1 = paper(r"$C1$ and $C2$, positioned at $(0.8,0.8)$ ... setting $k_1=k_2=1$")
_C2 = paper(r"$(-0.8,-0.8)$, respectively ... setting $k_1=k_2=1$")
_C3 = paper(r"$C3$, positioned at $(0.6,-0.2)$ ... $k_3=0.2$")


def _vote(id_: str) -> Preset:
    c2 = ((-0.8, -0.8), 1.0)
    if id_ == "test4_two_candidates":
        T = 10.0
        schedule = PoleSchedule.constant([((0.8, 0.8), 1.0), c2], T)
        horizon = paper(r"$t=0, 0.38, 0.78, 1.18, 1.66, 10$")
        seg_tags = [(paper("campaign with constant strength"), horizon)]
        pole_tags = [[_C1, _C2]]
        times = (0.0, 0.38, 0.78, 1.18, 1.66, 10.0)
        times_tag = paper(r"$t=0, 0.38, 0.78, 1.18, 1.66, 10$")
    elif id_ == "test5a_ally":
        T = 20.0
        schedule = PoleSchedule.constant([((0.8, 0.8), 1.0), c2, ((0.6, -0.2), 0.2)], T)
        horizon = paper(r"$t=0, 0.38, 0.78, 1.18, 10, 20$")
        seg_tags = [(paper("campaign with constant strength"), horizon)]
        pole_tags = [[_C1, _C2, _C3]]
        times = (0.0, 0.38, 0.78, 1.18, 10.0, 20.0)
        times_tag = paper(r"$t=0, 0.38, 0.78, 1.18, 10, 20$")
    else:
        T = 10.0
        path = [(0.0, 2.0, (0.2, 0.2)), (2.0, 4.0, (0.4, 0.4)), (4.0, 6.0, (0.6, 0.6)), (6.0, T, (0.8, 0.8))]
        schedule = PoleSchedule.piecewise([(a, b, [(pos, 1.0), c2]) for a, b, pos in path])
        horizon = paper(r"$t=0, 0.38, 0.78, 1.18, 1.66, 10$")
        switch = [
            paper(r"initially lies at the point $(0.2,0.2)$"),
            paper(r"switches to $(0.4,0.4)$ at $t=2$"),
            paper(r"to $(0.6,0.6)$ at $t=4$"),
            paper(r"$(0.8,0.8)$ ... at $t=6$"),
        ]
        seg_tags = [(switch[i], switch[i + 1] if i < 3 else horizon) for i in range(4)]
        pole_tags = [[switch[i], _C2] for i in range(4)]
        times = (0.0, 0.38, 0.78, 1.18, 1.66, 10.0)
        times_tag = paper(r"$t=0, 0.38, 0.78, 1.18, 1.66, 10$")
    model = ModelParams(a1=1.0, a2=1.0, a3=1.0, kernel_width=0.2, schedule=schedule)
    a_tag = paper(r"$a_1$, $a_2$, and $a_3$ are all set to one")
    tags = _common_tags(2) | {
        "scheme.lam": paper(r"restrict the remaining tests to the case $\lambda=0$"),
        "model.a1": a_tag,
        "model.a2": a_tag,
        "model.a3": a_tag,
        "T": horizon,
        "sample_times": times_tag,
        "m0.lo": paper(r"m_0(x)=\frac{1}{4}\chi_{[-1,1]^2}(x)"),
        "m0.hi": paper(r"m_0(x)=\frac{1}{4}\chi_{[-1,1]^2}(x)"),
    } | _schedule_tags(schedule, seg_tags, pole_tags)
    return Preset(
        id=id_,
        grid=_grid(2),
        model=model,
        scheme=_scheme(2),
        T=T,
        u0=InitialData("zero"),
        m0=InitialData("indicator", (-1.0, -1.0), (1.0, 1.0)),
        sample_times=times,
        tags=tags,
    )


PRESET_IDS = (
    "test1_ff",
    "test1_fb",
    *(f"test2_lambda({lam:g})" for lam in TEST2_LAMBDAS),
    "test3_clusters",
    "test3_advert_switch",
    "test4_two_candidates",
    "test5a_ally",
    "test5b_moving",
)

_LAMBDA_ID = re.compile(r"^test2_lambda(?:\(([0-9.]+)\)|_([0-9.]+))$")


def preset(id_: str) -> Preset:
    """Build a preset by its public id (see :data:`PRESET_IDS`).

    ``test2_lambda(<value>)`` (or ``test2_lambda_<value>``) accepts any
    nonnegative discount; the listed ids are the sweep used in the figures.
    """
    if id_ == "test1_ff":
        return _test1("FF")
    if id_ == "test1_fb":
        return _test1("FB")
    match = _LAMBDA_ID.match(id_)
    if match:
        lam = float(match.group(1) or match.group(2))
        return _test1("FF", lam=lam, id_=f"test2_lambda({lam:g})")
    if id_ in ("test3_clusters", "test3_advert_switch"):
        return _test3(id_ == "test3_advert_switch")
    if id_ in ("test4_two_candidates", "test5a_ally", "test5b_moving"):
        return _vote(id_)
    raise UnknownPreset(id_)


# --------------------------------------------------------------------------- voting observables


class Region(str, Enum):
    OMEGA1 = "Omega1"
    OMEGA2 = "Omega2"
    BOUNDARY = "Boundary"


def mean_opinion(grid: Grid, M: np.ndarray) -> np.ndarray:
    """First moment of the density, one component per axis."""
    return np.array([np.sum(c * M) * grid.cell_volume for c in grid.mesh])


def median_voter(grid: Grid, M: np.ndarray) -> np.ndarray:
    """Position whose side decides the vote; taken as the mean voter position."""
    if grid.dim != 2:
        raise DimensionMismatch("median_voter is defined for 2D densities")
    return mean_opinion(grid, M)


def victory_region(point) -> Region:
    """``Omega1`` above the anti-diagonal ``x2 = -x1``, ``Omega2`` below."""
    x1, x2 = (float(v) for v in point)
    s = x1 + x2
    if abs(s) <= BOUNDARY_TOL:
        return Region.BOUNDARY
    return Region.OMEGA1 if s > 0 else Region.OMEGA2
