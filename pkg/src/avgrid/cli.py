"""Command-line front end: build scenes and datasets, run suites, score, export, plot."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path as FsPath

from . import metrics, runner
from .core import StepConfig
from .env import Scene, generate_city, load_scene, save_scene
from .runner import RunConfig


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=FsPath, default=None,
                   help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--budget", type=int, default=None, help="primitive actions per episode")
    p.add_argument("--pool-capacity", type=int, default=None)
    p.add_argument("--local-map-size", type=int, default=None)
    p.add_argument("--window-steps", type=int, default=None)
    p.add_argument("--policy-seed", type=int, default=None)
    p.add_argument("--gru-seed", type=int, default=None)
    p.add_argument("--no-extra-candidates", action="store_true")
    p.add_argument("--no-bev-map", action="store_true")
    p.add_argument("--no-top-down-obs", action="store_true")
    p.add_argument("--no-vertical-action", action="store_true")


def _build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config is not None:
        raw = json.loads(args.config.read_text())
        step_fields = {f.name for f in fields(StepConfig)}
        step_kwargs = {k: v for k, v in raw.pop("step", {}).items() if k in step_fields}
        known = {f.name for f in fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
        if step_kwargs:
            values["step"] = StepConfig(**step_kwargs)
    for flag, key in (("budget", "budget"), ("pool_capacity", "pool_capacity"),
                      ("local_map_size", "local_map_size"), ("window_steps", "window_steps"),
                      ("policy_seed", "policy_seed"), ("gru_seed", "gru_seed")):
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    if args.no_extra_candidates:
        values["use_extra_candidates"] = False
    if args.no_bev_map:
        values["use_bev_map"] = False
    if args.no_top_down_obs:
        values["use_top_down_obs"] = False
    if args.no_vertical_action:
        values["use_vertical_action"] = False
    return RunConfig(**values)


def _load_scenes(path: FsPath) -> dict[str, Scene]:
    paths = sorted(path.glob("*.avgrid")) if path.is_dir() else [path]
    scenes = {}
    for p in paths:
        scene = load_scene(p)
        scenes[scene.scene_id] = scene
    if not scenes:
        raise SystemExit(f"no scene files under {path}")
    return scenes


def cmd_make_scene(args: argparse.Namespace) -> int:
    scene = generate_city(seed=args.seed, extent=args.extent,
                          building_density=args.density, max_height=args.max_height,
                          voxel_size=args.voxel_size)
    save_scene(scene, args.out)
    print(f"wrote {args.out} ({scene.scene_id}, {scene.occupancy.shape} voxels)")
    return 0


def cmd_make_data(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    cfg = StepConfig()
    episodes = runner.generate_dataset(scene, n_episodes=args.n, seed=args.seed,
                                       length_range=(args.min_len, args.max_len), cfg=cfg)
    runner.save_episodes(episodes, args.out)
    print(f"wrote {args.out} ({len(episodes)} episodes on {scene.scene_id})")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    scenes = _load_scenes(args.scenes)
    episodes = runner.load_episodes(args.data)
    suite = runner.run_suite(episodes, scenes, args.policy, cfg,
                             parallelism=args.parallelism, replay_path=args.replay_file)
    outdir = FsPath(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    runner.write_report(suite, outdir / "report.jsonl")
    tdir = outdir / "trajectories"
    ddir = outdir / "decisions"
    tdir.mkdir(exist_ok=True)
    ddir.mkdir(exist_ok=True)
    for result in suite.results:
        runner.write_trajectory_log(result, tdir / f"{result.episode_id}.jsonl")
        runner.write_decision_log(result, ddir / f"{result.episode_id}.jsonl")
    print(json.dumps(suite.aggregate, sort_keys=True))
    if suite.any_errors:
        errs = [r.episode_id for r in suite.results if r.error]
        print(f"episodes with errors: {errs}", file=sys.stderr)
        return 1
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    episodes = runner.load_episodes(args.data)
    cfg = StepConfig()
    rows = []
    reports = []
    for ep in episodes:
        tpath = FsPath(args.trajectories) / f"{ep.episode_id}.jsonl"
        if not tpath.exists():
            raise SystemExit(f"missing trajectory log {tpath}")
        executed = runner.load_trajectory(tpath)
        rep = metrics.evaluate_episode(executed, ep.gt_path, cfg)
        reports.append(rep)
        rows.append({"episode_id": ep.episode_id, "ne": rep.ne, "success": rep.success,
                     "osr": rep.oracle_success, "ndtw": rep.ndtw, "sdtw": rep.sdtw})
    agg = metrics.aggregate(reports)
    with open(args.out, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.write(json.dumps({"aggregate": agg}, sort_keys=True) + "\n")
    print(json.dumps(agg, sort_keys=True))
    return 0


def cmd_export_teacher(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    scenes = _load_scenes(args.scenes)
    episodes = runner.load_episodes(args.data)
    n = runner.export_teacher(scenes, episodes, cfg, args.out)
    print(f"wrote {args.out} ({n} supervision records)")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    scene = load_scene(args.scene)
    episodes = {ep.episode_id: ep for ep in runner.load_episodes(args.data)}
    log_path = FsPath(args.trajectory)
    episode_id = log_path.stem
    executed = runner.load_trajectory(log_path)
    fig, ax = plt.subplots(figsize=(8, 8))
    footprint = scene.occupancy[:, :, 1:].any(axis=2)
    lo, hi = scene.bounds.lo, scene.bounds.hi
    ax.imshow(footprint.T, origin="lower", cmap="Greys", alpha=0.6,
              extent=(lo.x, hi.x, lo.y, hi.y))
    ex = executed.as_array()
    ax.plot(ex[:, 0], ex[:, 1], "-", color="tab:blue", label="executed")
    if episode_id in episodes:
        gt = episodes[episode_id].gt_path.as_array()
        ax.plot(gt[:, 0], gt[:, 1], "--", color="tab:green", label="reference")
        ax.plot(gt[-1, 0], gt[-1, 1], "*", color="tab:red", markersize=14, label="goal")
    ax.plot(ex[0, 0], ex[0, 1], "o", color="black", label="start")
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    ax.set_title(episode_id)
    fig.savefig(args.out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avgrid",
                                     description="grid-based aerial navigation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-scene", help="generate a synthetic city scene")
    p.add_argument("--out", type=FsPath, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extent", type=float, default=400.0)
    p.add_argument("--density", type=float, default=0.15)
    p.add_argument("--max-height", type=float, default=30.0)
    p.add_argument("--voxel-size", type=float, default=5.0)
    p.set_defaults(func=cmd_make_scene)

    p = sub.add_parser("make-data", help="generate grid-walk episodes on a scene")
    p.add_argument("--scene", type=FsPath, required=True)
    p.add_argument("--out", type=FsPath, required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-len", type=int, default=10)
    p.add_argument("--max-len", type=int, default=40)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("run", help="run a policy over a dataset")
    p.add_argument("--data", type=FsPath, required=True)
    p.add_argument("--scenes", type=FsPath, required=True,
                   help="scene file or directory of *.avgrid files")
    p.add_argument("--policy", choices=runner.POLICY_NAMES, default="oracle")
    p.add_argument("--replay-file", type=FsPath, default=None)
    p.add_argument("--out", type=FsPath, required=True)
    p.add_argument("--parallelism", type=int, default=1)
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="recompute metrics from trajectory logs")
    p.add_argument("--data", type=FsPath, required=True)
    p.add_argument("--trajectories", type=FsPath, required=True)
    p.add_argument("--out", type=FsPath, required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("export-teacher", help="dump per-step teacher supervision")
    p.add_argument("--data", type=FsPath, required=True)
    p.add_argument("--scenes", type=FsPath, required=True)
    p.add_argument("--out", type=FsPath, required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_export_teacher)

    p = sub.add_parser("plot", help="render a trajectory over the scene footprint")
    p.add_argument("--scene", type=FsPath, required=True)
    p.add_argument("--data", type=FsPath, required=True)
    p.add_argument("--trajectory", type=FsPath, required=True,
                   help="one trajectory log from a run directory")
    p.add_argument("--out", type=FsPath, required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
