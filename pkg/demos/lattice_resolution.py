"""Why the 1D presets use a fine control lattice.

With lattice step alpha_max / ((n_alpha - 1) / 2) every node whose optimal
drift is smaller than half a step gets control 0.  Inside that band a
cluster feels no restoring drift, so a coarse lattice can hold two Test 3
clusters apart indefinitely.  Refining the lattice lets them merge.

    python3 demos/lattice_resolution.py
"""
from __future__ import annotations

from dataclasses import replace

from ffmfg import preset


def main():
    base = preset("test3_clusters")
    for n_alpha in (33, 65, 129, 257):
        p = replace(base, scheme=replace(base.scheme, n_alpha=n_alpha))
        traj = p.run()
        late = sorted({o.cluster_count for o in traj.observables if o.t >= 2.0})
        step = p.scheme.alpha_max / (n_alpha // 2)
        print(f"n_alpha={n_alpha:3d}  step={step:.4f}  clusters for t>=2: {late}  final mean={traj.final.mean_opinion[0]:.4f}")


if __name__ == "__main__":
    main()
