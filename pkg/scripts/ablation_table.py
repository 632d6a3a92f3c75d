"""Disable each feature flag in turn and tabulate the metric deltas.

Rows: the full configuration, then one row per flag turned off (extra pool
candidates, bird's-eye map memory, up/down observations, predicted vertical
offsets), then the minimal configuration with all four off.

Example:
    python3 scripts/ablation_table.py --policy heuristic --episodes 60
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from avgrid.env import generate_city
from avgrid.runner import RunConfig, generate_dataset, run_suite

FLAGS = ("use_extra_candidates", "use_bev_map", "use_top_down_obs",
         "use_vertical_action")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--policy", choices=("oracle", "heuristic", "random"),
                    default="heuristic")
    ap.add_argument("--episodes", type=int, default=60)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--parallelism", type=int, default=4)
    args = ap.parse_args()

    base = RunConfig()
    scene = generate_city(seed=args.seed, extent=400.0, building_density=0.15,
                          max_height=30.0)
    episodes = generate_dataset(scene, args.episodes, seed=args.seed,
                                length_range=(10, 40), cfg=base.step)
    scenes = {scene.scene_id: scene}

    rows: list[tuple[str, RunConfig]] = [("full", base)]
    rows += [(f"- {flag.removeprefix('use_')}", replace(base, **{flag: False}))
             for flag in FLAGS]
    rows.append(("minimal", replace(base, **{flag: False for flag in FLAGS})))

    print(f"{args.policy} policy, {args.episodes} episodes on {scene.scene_id}\n")
    header = (f"{'configuration':<22} {'NE':>8} {'SR%':>7} {'OSR%':>7} "
              f"{'nDTW':>7} {'sDTW':>7}")
    print(header)
    print("-" * len(header))
    for label, cfg in rows:
        a = run_suite(episodes, scenes, args.policy, cfg,
                      parallelism=args.parallelism).aggregate
        print(f"{label:<22} {a['ne_mean']:>8.2f} {a['sr_pct']:>7.1f} "
              f"{a['osr_pct']:>7.1f} {a['ndtw_mean']:>7.4f} {a['sdtw_mean']:>7.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
