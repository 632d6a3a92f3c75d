"""Sweep the carry-over pool capacity and report heuristic-policy metrics.

Capacity 0 is the no-pool baseline; the suite is identical episode for episode
to disabling the pool outright, so the sweep isolates how much remembered
candidates help a non-oracle policy.

Example:
    python3 scripts/pool_capacity_sweep.py --capacities 0 5 10 20
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from avgrid.env import generate_city
from avgrid.runner import RunConfig, generate_dataset, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=60)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--capacities", type=int, nargs="+", default=[0, 5, 10, 20])
    ap.add_argument("--parallelism", type=int, default=4)
    args = ap.parse_args()

    base = RunConfig()
    scene = generate_city(seed=args.seed, extent=400.0, building_density=0.15,
                          max_height=30.0)
    episodes = generate_dataset(scene, args.episodes, seed=args.seed,
                                length_range=(10, 40), cfg=base.step)
    scenes = {scene.scene_id: scene}

    print(f"heuristic policy, {args.episodes} episodes on {scene.scene_id}\n")
    header = f"{'capacity':>8} {'NE':>8} {'SR%':>7} {'OSR%':>7} {'nDTW':>7} {'sDTW':>7}"
    print(header)
    print("-" * len(header))
    for cap in args.capacities:
        cfg = replace(base, pool_capacity=cap)
        a = run_suite(episodes, scenes, "heuristic", cfg,
                      parallelism=args.parallelism).aggregate
        print(f"{cap:>8d} {a['ne_mean']:>8.2f} {a['sr_pct']:>7.1f} "
              f"{a['osr_pct']:>7.1f} {a['ndtw_mean']:>7.4f} {a['sdtw_mean']:>7.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
