"""Command-line entry point: ``ffmfg --preset test1_ff --out out/``.

Exit codes: 0 on success, 1 on a configuration or validation error, 2 when
the run itself fails.  A forward-backward run that does not converge still
writes its last iterate, then exits with 2.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .errors import FFMFGError, FixedPointDiverged, ParseError, ValidationError
from .io import RunConfig, parse_config, write_bundle
from .experiments import victory_region


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffmfg", description="Run a mean-field opinion or voting experiment.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a JSON run configuration")
    src.add_argument("--preset", help="preset id, e.g. test1_ff or test4_two_candidates")
    ap.add_argument("--out", help="output directory (overrides the configuration)")
    ap.add_argument("--snapshots", default=None, help='comma-separated snapshot times, or "auto"')
    ap.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return ap


def _load(args) -> RunConfig:
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                obj_text = fh.read()
        except OSError as exc:
            raise ValidationError("config", str(exc)) from exc
        try:
            obj = json.loads(obj_text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    else:
        obj = {"preset": args.preset}
    if isinstance(obj, dict):
        if args.out is not None:
            obj["output_dir"] = args.out
        if args.snapshots is not None:
            if args.snapshots.strip() == "auto":
                obj["snapshot_times"] = "auto"
            else:
                try:
                    obj["snapshot_times"] = [float(v) for v in args.snapshots.split(",") if v.strip()]
                except ValueError as exc:
                    raise ValidationError("snapshots", f"bad snapshot list {args.snapshots!r}") from exc
    return parse_config(json.dumps(obj))


def run_command(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = _load(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    start = time.perf_counter()
    code = 0
    try:
        try:
            traj = cfg.preset.run(cfg.snapshot_times)
        except FixedPointDiverged as exc:
            if exc.trajectory is None:
                raise
            # keep the last iterate on disk for diagnosis, but report failure
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            traj, code = exc.trajectory, 2
        write_bundle(cfg, traj)
    except (FFMFGError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - start

    if not args.quiet:
        final = traj.final
        p = cfg.preset
        point = "(" + ", ".join(f"{v:.4f}" for v in final.mean_opinion) + ")"
        if p.grid.dim == 2:
            where = f"median voter {point} [{victory_region(final.mean_opinion).value}]"
        else:
            where = f"mean opinion {point}"
        resid = traj.meta["final_residual"] if p.mode == "FB" else final.fp_residual
        status = "" if code == 0 else " [fixed point NOT converged]"
        print(f"{p.id} ({p.mode}) t={final.t:g}: {where}, residual {resid:.3e}, wall {wall:.1f}s{status}")
    return code


def main() -> None:
    sys.exit(run_command())
