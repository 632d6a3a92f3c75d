"""Run every built-in policy over one generated dataset and print a table.

Example:
    python3 scripts/compare_policies.py --episodes 60 --seed 11 --parallelism 8
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from avgrid.env import generate_city
from avgrid.runner import RunConfig, generate_dataset, run_suite, write_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=60)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--extent", type=float, default=400.0)
    ap.add_argument("--density", type=float, default=0.15)
    ap.add_argument("--min-len", type=int, default=10)
    ap.add_argument("--max-len", type=int, default=40)
    ap.add_argument("--parallelism", type=int, default=4)
    ap.add_argument("--out", type=Path, default=None,
                    help="directory for per-policy report files")
    args = ap.parse_args()

    cfg = RunConfig()
    scene = generate_city(seed=args.seed, extent=args.extent,
                          building_density=args.density, max_height=30.0)
    episodes = generate_dataset(scene, args.episodes, seed=args.seed,
                                length_range=(args.min_len, args.max_len),
                                cfg=cfg.step)
    scenes = {scene.scene_id: scene}

    print(f"scene {scene.scene_id}: {args.episodes} episodes, "
          f"lengths {args.min_len}-{args.max_len}\n")
    header = f"{'policy':<12} {'NE':>8} {'SR%':>7} {'OSR%':>7} {'nDTW':>7} {'sDTW':>7} {'err':>4}"
    print(header)
    print("-" * len(header))
    for name in ("oracle", "heuristic", "random"):
        suite = run_suite(episodes, scenes, name, cfg,
                          parallelism=args.parallelism)
        a = suite.aggregate
        print(f"{name:<12} {a['ne_mean']:>8.2f} {a['sr_pct']:>7.1f} "
              f"{a['osr_pct']:>7.1f} {a['ndtw_mean']:>7.4f} "
              f"{a['sdtw_mean']:>7.4f} {a['errors']:>4d}")
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            write_report(suite, args.out / f"report_{name}.jsonl")
    if args.out is not None:
        print(f"\nreports under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
