"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Preset runs are shared through a module-level cache so that the physics
criteria, the conservation check and the determinism check reuse them.
During a cached run the solver's per-step state check is wrapped to record
the worst mass drift and the smallest density value actually seen.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

import ffmfg.solver as solver_mod
from ffmfg.cli import run_command
from ffmfg.errors import FixedPointDiverged
from ffmfg.experiments import PRESET_IDS, Region, median_voter, preset, victory_region
from ffmfg.grid import build_grid, discrete_mass, normalize_density
from ffmfg.io import parse_config, write_bundle
from ffmfg.scheme import PropagationStencil, SchemeParams, adjoint_fp_step, build_stencil, hj_step
from ffmfg.solver import wasserstein_1d

from . import oracles
from .conftest import CRITERIA


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[n] = line
    print(line)
    assert ok, line


# --------------------------------------------------------------------------- shared runs


@dataclass
class Run:
    traj: object
    wall: float
    error: Exception | None
    checks: int
    worst_mass_drift: float
    min_density: float


_RUNS: dict[str, Run] = {}


def run(pid: str) -> Run:
    if pid in _RUNS:
        return _RUNS[pid]
    stats = {"checks": 0, "drift": 0.0, "min": np.inf}
    original = solver_mod._check_state

    def watched(grid, M, U, step):
        stats["checks"] += 1
        stats["drift"] = max(stats["drift"], abs(discrete_mass(grid, M) - 1.0))
        stats["min"] = min(stats["min"], float(M.min()))
        return original(grid, M, U, step)

    solver_mod._check_state = watched
    error = None
    start = time.perf_counter()
    try:
        traj = preset(pid).run()
    except FixedPointDiverged as exc:
        traj, error = exc.trajectory, exc
    finally:
        solver_mod._check_state = original
    wall = time.perf_counter() - start
    _RUNS[pid] = Run(traj, wall, error, stats["checks"], stats["drift"], stats["min"])
    return _RUNS[pid]


# --------------------------------------------------------------------------- 1-4, 11: scheme properties


def test_criterion_01_adjoint_duality():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 3))
        n = int(rng.integers(3, 16))
        g = build_grid(dim, 0.0, 1.0, 1.0 / (n - 1))
        size = g.size
        k = 2 * dim * 2**dim
        index = rng.integers(0, size, size=(size, k))
        weight = rng.uniform(size=(size, k))
        weight /= weight.sum(axis=1, keepdims=True)
        st = PropagationStencil(np.zeros((size, dim)), index, weight)
        M = rng.uniform(size=size)
        phi = rng.uniform(-1, 1, size=size)
        lhs = np.dot(st.apply_transpose(M) - M, phi)
        rhs = np.dot(M, st.apply(phi) - phi)
        worst = max(worst, abs(lhs - rhs))
    wall = time.perf_counter() - start
    report(1, worst <= 1e-13 and wall < 1.0, f"max |<(P^T-I)M,phi> - <M,(P-I)phi>| = {worst:.2e} (tol 1e-13), {wall:.2f}s")


def test_criterion_02_conservation_and_positivity():
    worst_drift, worst_min, ok = 0.0, np.inf, True
    for pid in PRESET_IDS:
        r = run(pid)
        p = preset(pid)
        steps = int(round(p.T / p.scheme.dt))
        # every step of the final path, plus every step of every sweep for FB
        ok &= r.checks >= steps + 1
        worst_drift = max(worst_drift, r.worst_mass_drift)
        worst_min = min(worst_min, r.min_density)
    t1, t4 = run("test1_ff").wall, run("test4_two_candidates").wall
    ok &= worst_drift <= 1e-9 and worst_min >= 0.0 and t1 < 30 and t4 < 300
    report(
        2,
        ok,
        f"max |mass-1| = {worst_drift:.1e}, min M = {worst_min:.1e} over {len(PRESET_IDS)} presets; "
        f"Test 1 {t1:.1f}s (<30), Test 4 {t4:.1f}s (<300)",
    )


def test_criterion_03_dense_oracle():
    rng = np.random.default_rng(303)
    g = build_grid(1, 0.0, 0.9, 0.1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        h = float(rng.choice([0.05, 0.1, 0.2]))
        scheme = SchemeParams(dt=h * float(rng.uniform(0.1, 1.0)), h=h, eps=float(rng.uniform(0, 0.05)))
        st = build_stencil(g, rng.uniform(-4, 4, size=(g.size, 1)), scheme)
        M = normalize_density(g, rng.uniform(size=g.shape))
        P = oracles.dense_propagation(st.index, st.weight, g.size)
        r = scheme.dt / scheme.h
        expected = (1 - r) * M + r * (P.T @ M)
        worst = max(worst, float(np.max(np.abs(adjoint_fp_step(M, st, scheme) - expected))))
    wall = time.perf_counter() - start
    report(3, worst <= 1e-14 and wall < 1.0, f"max |adjoint_fp_step - dense| = {worst:.1e} (tol 1e-14), {wall:.2f}s")


def test_criterion_04_monotonicity():
    rng = np.random.default_rng(404)
    p = preset("test1_ff")
    g, model, scheme = p.grid, p.model, p.scheme
    _, m0 = p.initial_fields()
    start = time.perf_counter()
    violations, worst = 0, 0.0
    for _ in range(100):
        U = rng.normal(0, 1, g.shape)
        V = U + rng.uniform(0, 1, g.shape) * (rng.uniform(size=g.shape) < 0.5)
        U1, _ = hj_step(g, U, m0, 0.0, model, scheme)
        V1, _ = hj_step(g, V, m0, 0.0, model, scheme)
        gap = float(np.max(U1 - V1))
        worst = max(worst, gap)
        violations += gap > 0
    wall = time.perf_counter() - start
    report(4, violations == 0 and wall < 10, f"{violations}/100 pairs violate U<=V => N(U)<=N(V) (max excess {worst:.1e}), {wall:.1f}s")


def test_criterion_11_wasserstein_suite():
    rng = np.random.default_rng(111)
    start = time.perf_counter()
    g = build_grid(1, 0.0, 1.9, 0.1)
    sym = tri = oracle = 0.0
    for _ in range(200):
        a, b, c = (normalize_density(g, rng.uniform(size=g.shape) ** 3) for _ in range(3))
        ab = wasserstein_1d(g, a, b)
        sym = max(sym, abs(ab - wasserstein_1d(g, b, a)))
        tri = max(tri, wasserstein_1d(g, a, c) - ab - wasserstein_1d(g, b, c))
    xs = list(g.axes[0])
    for _ in range(20):
        a, b = (normalize_density(g, rng.uniform(size=g.shape)) for _ in range(2))
        oracle = max(oracle, abs(wasserstein_1d(g, a, b) - oracles.greedy_transport_1d(xs, list(a), list(b), g.dx)))
    wall = time.perf_counter() - start
    ok = sym <= 1e-14 and tri <= 1e-10 and oracle <= 1e-10 and wall < 5
    report(11, ok, f"symmetry {sym:.1e}, triangle excess {tri:.1e}, transport-oracle gap {oracle:.1e}, {wall:.2f}s")


# --------------------------------------------------------------------------- 5-10: preset outcomes


def test_criterion_05_test1_consensus():
    r = run("test1_ff")
    final = r.traj.final.mean_opinion[0]
    report(5, abs(final - 0.2) <= 0.05 and r.wall < 60, f"final mean opinion {final:.4f} (target 0.2 +- 0.05), {r.wall:.1f}s")


def test_criterion_06_test3_symmetry():
    r = run("test3_clusters")
    t = r.traj.times
    dev = float(np.max(np.abs(r.traj.series("mean_opinion")[:, 0] - 0.5)))
    cc = r.traj.series("cluster_count")[t >= 2.0 - 1e-12]
    ok = dev <= 0.02 and bool(np.all(cc == 2)) and r.wall < 60
    report(6, ok, f"max |mean - 0.5| = {dev:.4f} (tol 0.02), cluster counts for t>=2: {sorted(set(cc.tolist()))}, {r.wall:.1f}s")


def _sample_counts(traj):
    keep = {round(t, 9) for t in traj.sample_times}
    return [(o.t, o.cluster_count) for o in traj.observables if round(o.t, 9) in keep]


def test_criterion_07_ff_vs_fb():
    ff, fb = run("test1_ff"), run("test1_fb")
    ff_counts = _sample_counts(ff.traj)
    split = [t for t, c in ff_counts if c == 2]
    merged_after = bool(split) and any(c == 1 and t > split[0] for t, c in ff_counts)
    fb_counts = _sample_counts(fb.traj)
    single = all(c <= 1 for _, c in fb_counts)
    meta = fb.traj.meta
    converged = fb.error is None and meta["final_residual"] < 1e-4 and meta["iterations"] <= 200
    wall = ff.wall + fb.wall
    ok = merged_after and single and converged and wall < 600
    report(
        7,
        ok,
        f"FF counts {[c for _, c in ff_counts]}; FB counts {[c for _, c in fb_counts]}; "
        f"FB residual {meta['final_residual']:.2e} after {meta['iterations']} iterations"
        f"{'' if fb.error is None else ' (not converged)'}; {wall:.0f}s",
    )


def test_criterion_08_test4_stalemate():
    r = run("test4_two_candidates")
    p = preset("test4_two_candidates")
    mv = median_voter(p.grid, r.traj.M_snapshots[-1])
    dist = float(np.hypot(*mv))
    ok = r.traj.sample_times[-1] == pytest.approx(10.0) and dist <= 0.05 and r.wall < 300
    report(8, ok, f"median voter at t=10: ({mv[0]:.4f}, {mv[1]:.4f}), |.| = {dist:.4f} (tol 0.05), {r.wall:.1f}s")


def test_criterion_09_test5a_tipping():
    r = run("test5a_ally")
    p = preset("test5a_ally")
    mv = median_voter(p.grid, r.traj.M_snapshots[-1])
    region = victory_region(mv)
    report(9, region is Region.OMEGA1 and r.wall < 600, f"final median voter ({mv[0]:.4f}, {mv[1]:.4f}) -> {region.value}, {r.wall:.1f}s")


def _stabilization_time(traj, level=0.05):
    resid = traj.series("fp_residual")
    hits = np.nonzero(resid < level)[0]  # NaN at t=0 never counts
    return float(traj.times[hits[0]]) if hits.size else float("inf")


def test_criterion_10_lambda_threshold():
    r0, r7 = run("test2_lambda(0)"), run("test2_lambda(7)")
    t0, t7 = _stabilization_time(r0.traj), _stabilization_time(r7.traj)
    wall = r0.wall + r7.wall
    report(10, t7 < t0 and wall < 300, f"time to residual < 0.05: lambda=7 -> {t7:g}, lambda=0 -> {t0:g}; {wall:.1f}s")


# --------------------------------------------------------------------------- 12: determinism


def _digest(root: Path) -> dict[str, str]:
    return {str(f.relative_to(root)): hashlib.sha256(f.read_bytes()).hexdigest() for f in sorted(root.rglob("*")) if f.is_file()}


def test_criterion_12_determinism(tmp_path):
    mismatched = []
    for pid in PRESET_IDS:
        a, b = tmp_path / f"{pid}_a", tmp_path / f"{pid}_b"
        cfg = parse_config(json.dumps({"preset": pid, "output_dir": str(a)}))
        write_bundle(cfg, run(pid).traj)
        code = run_command(["--preset", pid, "--out", str(b), "--quiet"])
        expected_code = 0 if run(pid).error is None else 2
        da, db = _digest(a), _digest(b)
        if code != expected_code or not da or da != db:
            mismatched.append(pid)
    report(12, not mismatched, f"byte-identical bundles for {len(PRESET_IDS) - len(mismatched)}/{len(PRESET_IDS)} presets" + (f"; differing: {mismatched}" if mismatched else ""))
