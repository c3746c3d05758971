"""Run configuration, CSV field files and the on-disk output bundle.

A configuration is one JSON object.  It names either a preset::

    {"preset": "test1_ff", "output_dir": "out"}

or spells the run out inline (the layout produced by :func:`preset_to_dict`)::

    {"grid": {"dim": 1, "lo": [-4], "hi": [4], "dx": 0.04},
     "scheme": {"dt": 0.02, "h": 0.04, "eps": 0.01, "lam": 0},
     "model": {"a1": 1, "a2": 1, "a3": 2, "kernel_width": 0.2,
               "schedule": [{"t_start": 0, "t_end": 30,
                             "poles": [{"position": [0.8], "strength": 1}]}]},
     "T": 30, "u0": {"kind": "advert"},
     "m0": {"kind": "indicator", "lo": [0], "hi": [1]},
     "output_dir": "out"}

Optional keys: ``snapshot_times`` (list or ``"auto"``), ``mode`` (``FF`` or
``FB``), ``fb`` and ``provenance`` (``{parameter: {provenance, quote}}``).
Inline parameters without a provenance entry are tagged ``non_paper``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FFMFGError, ParseError, UnknownPreset, ValidationError
from .experiments import NON_PAPER, InitialData, Preset, Tag, parameter_table, preset, victory_region
from .grid import Grid, build_grid
from .model import ModelParams, PoleSchedule
from .scheme import SchemeParams
from .solver import FBParams, Trajectory

_INLINE_KEYS = ("grid", "model", "scheme", "T", "u0", "m0")
_KNOWN_KEYS = {"preset", "output_dir", "snapshot_times", "id", "mode", "fb", "provenance", "sample_times", *_INLINE_KEYS}


@dataclass(frozen=True)
class RunConfig:
    preset: Preset
    output_dir: str
    snapshot_times: tuple[float, ...]
    preset_id: str | None = None


def _fmt(v: float) -> str:
    return "%.17g" % v


# --------------------------------------------------------------------------- config


def preset_to_dict(p: Preset) -> dict:
    """Inline-configuration form of a preset; :func:`parse_config` inverts it."""
    g, m, s = p.grid, p.model, p.scheme
    out = {
        "id": p.id,
        "mode": p.mode,
        "grid": {"dim": g.dim, "lo": list(g.lo), "hi": list(g.hi), "dx": g.dx},
        "scheme": {"dt": s.dt, "h": s.h, "eps": s.eps, "lam": s.lam, "alpha_max": s.alpha_max, "n_alpha": s.n_alpha},
        "model": {
            "a1": m.a1,
            "a2": m.a2,
            "a3": m.a3,
            "kernel_width": m.kernel_width,
            "schedule": [
                {
                    "t_start": seg.t_start,
                    "t_end": seg.t_end,
                    "poles": [{"position": list(q.position), "strength": q.strength} for q in seg.poles],
                }
                for seg in m.schedule.segments
            ],
        },
        "T": p.T,
        "sample_times": list(p.sample_times),
        "provenance": {k: {"provenance": t.provenance, "quote": t.quote} for k, t in p.tags.items()},
    }
    for name in ("u0", "m0"):
        d = getattr(p, name)
        out[name] = {"kind": d.kind} if d.kind != "indicator" else {"kind": d.kind, "lo": list(d.lo), "hi": list(d.hi)}
    if p.fb is not None:
        out["fb"] = {"damping": p.fb.damping, "tol": p.fb.tol, "max_iters": p.fb.max_iters}
    return out


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ValidationError(where, "expected a JSON object")
    if key not in obj:
        raise ValidationError(f"{where}.{key}" if where else key, "missing required key")
    return obj[key]


def _tuple(v, key: str) -> tuple[float, ...]:
    if isinstance(v, (int, float)):
        return (float(v),)
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) for x in v):
        raise ValidationError(key, "expected a number or a list of numbers")
    return tuple(float(x) for x in v)


def _inline_preset(obj: dict) -> Preset:
    key = "grid"
    try:
        gd = _require(obj, "grid", "")
        lo, hi = _tuple(_require(gd, "lo", "grid"), "grid.lo"), _tuple(_require(gd, "hi", "grid"), "grid.hi")
        dim = int(gd.get("dim", len(lo)))
        grid: Grid = build_grid(dim, lo if dim > 1 else lo[0], hi if dim > 1 else hi[0], float(_require(gd, "dx", "grid")))

        key = "scheme"
        sd = _require(obj, "scheme", "")
        scheme = SchemeParams(
            dt=float(_require(sd, "dt", "scheme")),
            h=float(_require(sd, "h", "scheme")),
            eps=float(_require(sd, "eps", "scheme")),
            lam=float(sd.get("lam", 0.0)),
            alpha_max=float(sd.get("alpha_max", 4.0)),
            n_alpha=int(sd.get("n_alpha", 33)),
        )

        key = "model"
        md = _require(obj, "model", "")
        segments = []
        for i, seg in enumerate(_require(md, "schedule", "model")):
            key = f"model.schedule[{i}]"
            poles = [
                (_tuple(_require(q, "position", key), f"{key}.position"), float(_require(q, "strength", key)))
                for q in _require(seg, "poles", key)
            ]
            segments.append((float(_require(seg, "t_start", key)), float(_require(seg, "t_end", key)), poles))
        key = "model"
        model = ModelParams(
            a1=float(_require(md, "a1", "model")),
            a2=float(_require(md, "a2", "model")),
            a3=float(_require(md, "a3", "model")),
            kernel_width=float(_require(md, "kernel_width", "model")),
            schedule=PoleSchedule.piecewise(segments),
        )

        init = {}
        for name in ("u0", "m0"):
            key = name
            d = _require(obj, name, "")
            kind = _require(d, "kind", name)
            lo_ = _tuple(d["lo"], f"{name}.lo") if "lo" in d else None
            hi_ = _tuple(d["hi"], f"{name}.hi") if "hi" in d else None
            init[name] = InitialData(kind, lo_, hi_)

        key = "fb"
        fb = None
        if "fb" in obj:
            fd = obj["fb"]
            fb = FBParams(
                damping=float(fd.get("damping", 0.5)), tol=float(fd.get("tol", 1e-4)), max_iters=int(fd.get("max_iters", 200))
            )
        key = "T"
        T = float(_require(obj, "T", ""))
        times = tuple(float(t) for t in obj.get("sample_times", (0.0, T)))
        mode = obj.get("mode", "FF")
        if mode == "FB" and fb is None:
            fb = FBParams()
    except ValidationError:
        raise
    except (FFMFGError, TypeError, ValueError) as exc:
        raise ValidationError(key, str(exc)) from exc

    draft = dict(id=str(obj.get("id", "inline")), grid=grid, model=model, scheme=scheme, T=T, u0=init["u0"], m0=init["m0"])
    # tag everything the user did not tag explicitly
    names = parameter_table(grid, model, scheme, T, times, init["u0"], init["m0"], fb)
    given = obj.get("provenance", {})
    if not isinstance(given, dict):
        raise ValidationError("provenance", "expected an object")
    tags = {}
    for name in names:
        entry = given.get(name)
        try:
            tags[name] = Tag(entry["provenance"], entry.get("quote", "")) if entry else Tag(NON_PAPER, "inline configuration")
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"provenance.{name}", str(exc)) from exc
    try:
        return Preset(**draft, sample_times=times, mode=mode, fb=fb, tags=tags)
    except ValidationError:
        raise
    except FFMFGError as exc:
        raise ValidationError("sample_times", str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises:
        ParseError: malformed JSON, with line and column.
        ValidationError: well-formed JSON that breaks a parameter contract.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(obj, dict):
        raise ParseError("top level must be a JSON object", 1, 1)
    unknown = sorted(set(obj) - _KNOWN_KEYS)
    if unknown:
        raise ValidationError(unknown[0], "unknown configuration key")
    has_preset = "preset" in obj
    inline = [k for k in _INLINE_KEYS if k in obj]
    if has_preset == bool(inline):
        raise ValidationError("preset", "give exactly one of a preset id or an inline specification")
    output_dir = obj.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ValidationError("output_dir", "expected a string")

    if has_preset:
        try:
            p = preset(str(obj["preset"]))
        except UnknownPreset as exc:
            raise ValidationError("preset", str(exc)) from exc
    else:
        p = _inline_preset(obj)

    snaps = obj.get("snapshot_times", "auto")
    if snaps == "auto":
        times = p.sample_times
    else:
        times = _tuple(snaps, "snapshot_times")
        if list(times) != sorted(times) or any(not 0.0 <= t <= p.T for t in times):
            raise ValidationError("snapshot_times", f"snapshot times must be sorted and inside [0, {p.T:g}]")
    return RunConfig(preset=p, output_dir=output_dir, snapshot_times=tuple(times), preset_id=obj.get("preset"))


# --------------------------------------------------------------------------- CSV


def _header(dim: int, n_values: int) -> str:
    coords = ",".join(f"x{i + 1}" for i in range(dim))
    vals = "value" if n_values == 1 else ",".join(f"value{i + 1}" for i in range(n_values))
    return f"{coords},{vals}"


def write_field_csv(grid: Grid, values: np.ndarray, path) -> None:
    """Write a nodal field as ``x1[,x2],value`` in row-major node order.

    ``values`` may carry a leading component axis (a control map), in which
    case the value columns are ``value1, value2, ...``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape == grid.shape:
        cols = values.reshape(1, -1)
    elif values.shape[1:] == grid.shape:
        cols = values.reshape(values.shape[0], -1)
    else:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    pts = grid.points
    lines = [_header(grid.dim, cols.shape[0])]
    for j in range(grid.size):
        lines.append(",".join([_fmt(v) for v in pts[j]] + [_fmt(v) for v in cols[:, j]]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a file written by :func:`write_field_csv`; returns ``(header, rows)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [[float(v) for v in line.rstrip("\n").split(",")] for line in fh if line.strip()]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


# --------------------------------------------------------------------------- bundle


def time_label(t: float) -> str:
    return "%g" % round(t, 9)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def summary_results(p: Preset, traj: Trajectory) -> dict:
    final = traj.final
    out = {"final_time": final.t, "final_mean_opinion": list(final.mean_opinion), "final_mass": final.mass}
    if p.grid.dim == 2:
        out["final_region"] = victory_region(final.mean_opinion).value
    if p.mode == "FB":
        out["fixed_point_residual"] = traj.meta["final_residual"]
        out["fixed_point_iterations"] = traj.meta["iterations"]
        out["fixed_point_converged"] = traj.meta["converged"]
    else:
        out["final_steady_state_residual"] = final.fp_residual
    return out


def write_bundle(cfg: RunConfig, traj: Trajectory) -> Path:
    """Write ``observables.csv``, ``fields/*.csv`` and ``run.meta`` under ``cfg.output_dir``.

    Nothing time- or host-dependent is written, so identical configurations
    give byte-identical bundles.
    """
    p = cfg.preset
    root = Path(cfg.output_dir)
    fields = root / "fields"
    fields.mkdir(parents=True, exist_ok=True)
    dim = p.grid.dim
    mean_cols = ["mean_opinion"] if dim == 1 else [f"mean_opinion_{i + 1}" for i in range(dim)]
    lines = [",".join(["t", *mean_cols, "mass", "sup_U", "fp_residual", "cluster_count"])]
    for o in traj.observables:
        row = [_fmt(o.t), *(_fmt(v) for v in o.mean_opinion), _fmt(o.mass), _fmt(o.sup_U), _fmt(o.fp_residual), str(o.cluster_count)]
        lines.append(",".join(row))
    with open(root / "observables.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    for t, U, M, C in zip(traj.sample_times, traj.U_snapshots, traj.M_snapshots, traj.control_maps):
        lab = time_label(t)
        write_field_csv(p.grid, U, fields / f"U_t{lab}.csv")
        write_field_csv(p.grid, M, fields / f"M_t{lab}.csv")
        write_field_csv(p.grid, C, fields / f"ctrl_t{lab}.csv")

    meta = {
        "id": p.id,
        "mode": p.mode,
        "snapshot_times": list(traj.sample_times),
        "parameters": [{k: _json_value(v) for k, v in row.items()} for row in p.manifest()],
        "results": {k: _json_value(v) for k, v in summary_results(p, traj).items()},
    }
    with open(root / "run.meta", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return root
