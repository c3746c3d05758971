"""Two- and three-candidate campaigns in the plane.

Prints the median voter (mean voter position) at the sample times and which
candidate's victory half-plane it lies in.  Each run takes a few minutes.

    python3 demos/vote_2d.py [test4_two_candidates|test5a_ally|test5b_moving ...]
"""
from __future__ import annotations

import sys

from ffmfg import median_voter, preset, victory_region


def main(ids):
    for pid in ids:
        p = preset(pid)
        traj = p.run()
        print(pid)
        for t, M in zip(traj.sample_times, traj.M_snapshots):
            mv = median_voter(p.grid, M)
            print(f"  t={t:6.2f}  median voter=({mv[0]:+.4f}, {mv[1]:+.4f})  {victory_region(mv).value}")


if __name__ == "__main__":
    main(sys.argv[1:] or ["test4_two_candidates", "test5a_ally", "test5b_moving"])
