"""Opinion formation on a line: forward-forward agents versus anticipating agents.

Runs the Test 1 presets in both modes and prints the mean opinion and the
number of opinion clusters at the sample times.  The forward-forward crowd
first splits towards both advertised poles and later merges; the classical
(forward-backward) crowd travels as a single group.

    python3 demos/opinion_1d.py
"""
from __future__ import annotations

from ffmfg import FixedPointDiverged, preset


def table(traj):
    keep = {round(t, 9) for t in traj.sample_times}
    for o in traj.observables:
        if round(o.t, 9) in keep:
            print(f"  t={o.t:6.2f}  mean={o.mean_opinion[0]:.4f}  clusters={o.cluster_count}")


def main():
    print("forward-forward (test1_ff)")
    table(preset("test1_ff").run())

    print("forward-backward fixed point (test1_fb), a few minutes")
    try:
        fb = preset("test1_fb").run()
        print(f"  converged after {fb.meta['iterations']} iterations, residual {fb.meta['final_residual']:.2e}")
    except FixedPointDiverged as exc:
        print(f"  {exc}")
        fb = exc.trajectory
    table(fb)


if __name__ == "__main__":
    main()
