"""Episode orchestration: rollout loop, suite evaluation, synthetic datasets, file I/O.

One high-level step is: gather the skybox, map views to candidates, fold the
view features into the top-down memory, merge in pooled candidates, ask the
policy, decode the chosen vertical offset, and drive to the resulting
position. Every output is a deterministic function of (scene, dataset seed,
run seed, config), independent of worker parallelism.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .bevmap import BevMap, GruCell
from .candidates import VerticalClass, decode_vertical, make_candidates
from .controller import StuckError, go_to
from .core import Heading, Path, Pose, StepConfig, Vec3
from .env import Scene, SceneBoundsError, ViewDirection, get_skybox
from .pool import CandidatePool
from .policy import (HeuristicPolicy, OraclePolicy, Policy, PolicyContext,
                     RandomPolicy, ReplayPolicy)

EPISODE_SCHEMA = "episode-v1"
TEACHER_SCHEMA = "teacher-v1"
POLICY_NAMES = ("oracle", "random", "heuristic", "replay")


@dataclass(frozen=True)
class Episode:
    episode_id: str
    scene_id: str
    start_pose: Pose
    instruction: tuple[str, ...]
    gt_path: Path

    def __post_init__(self) -> None:
        if self.gt_path[0].distance_to(self.start_pose.position) > 1e-9:
            raise ValueError("reference path must start at the start pose")


@dataclass(frozen=True)
class RunConfig:
    """Knobs for a rollout; defaults match the reference setup."""

    step: StepConfig = field(default_factory=StepConfig)
    local_map_size: int = 11
    pool_capacity: int = 10
    window_steps: int = 5
    feature_dim: int = 64
    gru_seed: int = 7
    policy_seed: int = 0
    budget: int | None = None  # primitive actions per episode; None = step.max_steps
    use_extra_candidates: bool = True
    use_bev_map: bool = True
    use_top_down_obs: bool = True
    use_vertical_action: bool = True

    def __post_init__(self) -> None:
        if self.local_map_size <= 0 or self.local_map_size % 2 == 0:
            raise ValueError("local_map_size must be odd and positive")
        if self.pool_capacity < 0:
            raise ValueError("pool_capacity must be non-negative")
        if self.window_steps < 0:
            raise ValueError("window_steps must be non-negative")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive")

    @property
    def action_budget(self) -> int:
        return self.budget if self.budget is not None else self.step.max_steps


@dataclass(eq=False)
class EpisodeResult:
    episode_id: str
    trajectory: Path
    report: metrics.MetricsReport
    decisions: list[dict]
    actions: list[dict]
    stopped: bool
    error: str | None = None


def _pose_dict(pose: Pose) -> dict:
    return {"position": list(pose.position.as_tuple()), "heading": pose.heading.degrees}


def _pose_from_dict(d: dict) -> Pose:
    x, y, z = d["position"]
    return Pose(Vec3(x, y, z), Heading(d["heading"]))


def run_episode(scene: Scene, episode: Episode, policy: Policy, cfg: RunConfig) -> EpisodeResult:
    """Roll one episode to Stop, budget exhaustion, or a controller error."""
    policy.begin_episode(episode)
    pose = episode.start_pose
    executed: list[Vec3] = [pose.position]
    gru = GruCell(cfg.feature_dim, seed=cfg.gru_seed)
    bev = BevMap(origin=episode.start_pose.position,
                 cell_size=cfg.step.horizontal_step, gru=gru)
    pool = CandidatePool(cfg.pool_capacity if cfg.use_extra_candidates else 0,
                         cfg.step, origin=episode.start_pose.position)
    pool.mark_visited(pool.quantize(pose.position))
    zero_map = np.zeros((cfg.local_map_size, cfg.local_map_size, gru.hidden_dim))

    history: list[np.ndarray] = []
    decision_positions: list[Vec3] = []
    decisions_log: list[dict] = []
    actions_log: list[dict] = [{"step": 0, "action": None, "pose": _pose_dict(pose)}]
    budget_left = cfg.action_budget
    stopped = False
    error: str | None = None

    for step in range(cfg.action_budget):
        if budget_left <= 0:
            break
        try:
            skybox = get_skybox(scene, pose)
        except SceneBoundsError as exc:
            error = str(exc)
            break
        live = make_candidates(skybox, cfg.step)
        if not cfg.use_top_down_obs:
            live = [c for c in live
                    if c.observation.direction not in (ViewDirection.UP, ViewDirection.DOWN)]
        if cfg.use_bev_map:
            for cand in live:
                bev.update(cand.position, cand.observation.feature)
            local = bev.local_map(pose, cfg.local_map_size)
        else:
            local = zero_map
        merged = pool.merge_step(live) if cfg.use_extra_candidates else list(live)
        decision_positions.append(pose.position)

        ctx = PolicyContext(
            episode_id=episode.episode_id,
            instruction=episode.instruction,
            candidates=merged,
            local_map=local,
            step=step,
            history=history,
            executed=Path(executed),
            decision_positions=tuple(decision_positions),
            pose=pose,
        )
        decision = policy.decide(ctx)
        if decision.selected is None:
            vertical = None
            target = None
        else:
            cand = merged[decision.selected]
            if cfg.use_vertical_action:
                vertical = decode_vertical(float(decision.d_v[decision.selected]))
            else:
                vertical = VerticalClass.MIDDLE
            target = cand.vertical_set[vertical - 1]
        decisions_log.append({
            "step": step,
            "pose": _pose_dict(pose),
            "n_candidates": len(merged),
            "candidates": [
                {"position": list(c.position.as_tuple()),
                 "feature_ref": _feature_ref(c.observation.feature),
                 "from_pool": c.from_pool}
                for c in merged
            ],
            "selected": decision.selected,
            "scores": decision.scores.tolist(),
            "d_v": decision.d_v.tolist(),
            "vertical": int(vertical) if vertical is not None else None,
            "target": list(target.as_tuple()) if target is not None else None,
        })
        if decision.selected is None:
            stopped = True
            break

        try:
            outcome = go_to(scene, pose, target, cfg.step, budget_left)
        except StuckError as exc:
            error = str(exc)
            break
        base = len(actions_log)
        for k, (act, p) in enumerate(zip(outcome.actions, outcome.poses)):
            executed.append(p.position)
            actions_log.append({"step": base + k, "action": act.value, "pose": _pose_dict(p)})
        budget_left -= len(outcome.actions)
        pose = outcome.final_pose
        history.append(merged[decision.selected].observation.feature)
        if cfg.use_extra_candidates:
            scored = list(zip(merged, decision.scores[:len(merged)].tolist()))
            pool.update_after_prediction(scored, merged[decision.selected],
                                         pool.quantize(pose.position), step=step)

    trajectory = Path(executed)
    report = metrics.evaluate_episode(trajectory, episode.gt_path, cfg.step)
    return EpisodeResult(episode_id=episode.episode_id, trajectory=trajectory,
                         report=report, decisions=decisions_log,
                         actions=actions_log, stopped=stopped, error=error)


# -- policies ----------------------------------------------------------------


def make_policy(name: str, cfg: RunConfig, replay_path: str | None = None) -> Policy:
    if name == "oracle":
        return OraclePolicy(cfg.step, window_steps=cfg.window_steps)
    if name == "random":
        return RandomPolicy(seed=cfg.policy_seed)
    if name == "heuristic":
        return HeuristicPolicy(seed=cfg.policy_seed, cfg=cfg.step)
    if name == "replay":
        if replay_path is None:
            raise ValueError("replay policy needs a score file")
        return ReplayPolicy.from_file(replay_path)
    raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")


# -- suites -------------------------------------------------------------------

_WORKER_SCENES: Mapping[str, Scene] | None = None


def _init_worker(scenes: Mapping[str, Scene]) -> None:
    global _WORKER_SCENES
    _WORKER_SCENES = scenes


def _run_task(task: tuple) -> EpisodeResult:
    episode, policy_name, cfg, replay_path = task
    scenes = _WORKER_SCENES
    assert scenes is not None
    scene = scenes.get(episode.scene_id)
    if scene is None:
        return EpisodeResult(
            episode_id=episode.episode_id,
            trajectory=Path([episode.start_pose.position]),
            report=metrics.evaluate_episode(Path([episode.start_pose.position]),
                                            episode.gt_path, cfg.step),
            decisions=[], actions=[], stopped=False,
            error=f"missing scene {episode.scene_id!r}",
        )
    policy = make_policy(policy_name, cfg, replay_path)
    return run_episode(scene, episode, policy, cfg)


@dataclass(eq=False)
class SuiteResult:
    results: list[EpisodeResult]
    rows: list[dict]
    aggregate: dict

    @property
    def any_errors(self) -> bool:
        return any(r.error for r in self.results)


def run_suite(episodes: Sequence[Episode], scenes: Mapping[str, Scene],
              policy_name: str, cfg: RunConfig, parallelism: int = 1,
              replay_path: str | None = None) -> SuiteResult:
    """Run every episode and aggregate. Output is independent of parallelism."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    tasks = [(ep, policy_name, cfg, replay_path) for ep in episodes]
    if parallelism == 1 or len(tasks) <= 1:
        _init_worker(scenes)
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism, initializer=_init_worker,
                                 initargs=(scenes,)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (parallelism * 4))))

    rows = []
    for r in results:
        rows.append({
            "episode_id": r.episode_id,
            "ne": r.report.ne,
            "success": r.report.success,
            "osr": r.report.oracle_success,
            "ndtw": r.report.ndtw,
            "sdtw": r.report.sdtw,
            "stopped": r.stopped,
            "error": r.error,
        })
    agg = metrics.aggregate([r.report for r in results])
    agg["errors"] = sum(1 for r in results if r.error)
    agg["policy"] = policy_name
    return SuiteResult(results=results, rows=rows, aggregate=agg)


# -- synthetic datasets --------------------------------------------------------

_HORIZONTAL_MOVES = {
    "north": (1, 0, 0), "south": (-1, 0, 0), "east": (0, -1, 0), "west": (0, 1, 0),
}
_VERTICAL_MOVES = {"up": (0, 0, 1), "down": (0, 0, -1)}
_NUMBER_WORDS = ("zero one two three four five six seven eight nine ten eleven twelve "
                 "thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty").split()


def _instruction_tokens(moves: list[str], start_heading: float) -> tuple[str, ...]:
    """Template phrasing of a move list; opaque word tokens for the policies."""
    tokens: list[str] = ["fly"]
    i = 0
    while i < len(moves):
        j = i
        while j < len(moves) and moves[j] == moves[i]:
            j += 1
        run = j - i
        count = _NUMBER_WORDS[run] if run < len(_NUMBER_WORDS) else str(run)
        if moves[i] in _VERTICAL_MOVES:
            verb = "climb" if moves[i] == "up" else "descend"
            tokens += [verb, count, "steps" if run > 1 else "step"]
        else:
            tokens += ["head", moves[i], count, "blocks" if run > 1 else "block"]
        tokens.append("then")
        i = j
    tokens[-1] = "and"
    tokens += ["stop", "there"]
    return tuple(tokens)


def generate_dataset(scene: Scene, n_episodes: int, seed: int,
                     length_range: tuple[int, int], cfg: StepConfig,
                     max_tries: int = 400,
                     min_goal_distance: float | None = None) -> list[Episode]:
    """Seeded grid walks through free space with altitude changes.

    Consecutive reference points differ by exactly one horizontal or vertical
    step; every leg is collision-checked. The walk prefers to keep its
    direction, occasionally changes altitude, and never revisits a point:
    exact revisits would make the nearest-reference-point lookup ambiguous,
    which no continuous-space trajectory exhibits. Walks whose endpoint curls
    back to within `min_goal_distance` of the start (default twice the success
    radius) are rejected — such episodes would count as successes for an agent
    that never leaves home.
    """
    lo, hi = length_range
    if not (0 < lo <= hi):
        raise ValueError("length_range must be positive and ordered")
    if min_goal_distance is None:
        min_goal_distance = 2.0 * cfg.success_radius
    rng = np.random.default_rng([seed, 0xD5])
    sh, sv = cfg.horizontal_step, cfg.vertical_step
    if hi * sh < min_goal_distance:
        raise ValueError("min_goal_distance unreachable at the longest path length")
    margin = 2 * sh
    zmin = 2 * sv
    zmax = scene.bounds.hi.z - 2 * sv
    episodes: list[Episode] = []
    tries = 0
    while len(episodes) < n_episodes:
        tries += 1
        if tries > max_tries * n_episodes:
            raise RuntimeError("could not sample enough collision-free walks")
        n_moves = int(rng.integers(lo, hi + 1))
        xi = int(rng.integers(int(margin / sh), int((scene.bounds.hi.x - margin) / sh) + 1))
        yi = int(rng.integers(int(margin / sh), int((scene.bounds.hi.y - margin) / sh) + 1))
        zi = int(rng.integers(int(np.ceil(zmin / sv)), int(zmax / sv) + 1))
        start = Vec3(xi * sh, yi * sh, zi * sv)
        if scene.is_occupied(start):
            continue
        heading = Heading(float(rng.choice([0.0, 90.0, 180.0, 270.0])))
        points = [start]
        visited = {start.as_tuple()}
        moves: list[str] = []
        ok = True
        for _ in range(n_moves):
            cur = points[-1]
            options = []
            for name, (dx, dy, dz) in {**_HORIZONTAL_MOVES, **_VERTICAL_MOVES}.items():
                nxt = Vec3(cur.x + dx * sh, cur.y + dy * sh, cur.z + dz * sv)
                if not (margin <= nxt.x <= scene.bounds.hi.x - margin
                        and margin <= nxt.y <= scene.bounds.hi.y - margin
                        and zmin <= nxt.z <= zmax):
                    continue
                if nxt.as_tuple() in visited:
                    continue
                if scene.is_occupied(nxt) or scene.segment_blocked(cur, nxt):
                    continue
                options.append(name)
            if not options:
                ok = False
                break
            weights = []
            for name in options:
                if moves and name == moves[-1]:
                    w = 6.0  # keep going straight most of the time
                elif name in _VERTICAL_MOVES:
                    w = 0.8
                else:
                    w = 1.6
                weights.append(w)
            total = sum(weights)
            probs = [w / total for w in weights]
            name = str(rng.choice(options, p=probs))
            dx, dy, dz = {**_HORIZONTAL_MOVES, **_VERTICAL_MOVES}[name]
            nxt = Vec3(cur.x + dx * sh, cur.y + dy * sh, cur.z + dz * sv)
            points.append(nxt)
            visited.add(nxt.as_tuple())
            moves.append(name)
        if not ok or points[-1].distance_to(start) < min_goal_distance:
            continue
        k = len(episodes)
        episodes.append(Episode(
            episode_id=f"ep-{seed:04d}-{k:04d}",
            scene_id=scene.scene_id,
            start_pose=Pose(start, heading),
            instruction=_instruction_tokens(moves, heading.degrees),
            gt_path=Path(points),
        ))
    return episodes


# -- file formats ---------------------------------------------------------------


def save_episodes(episodes: Sequence[Episode], path: str | FsPath) -> None:
    """Line-delimited records, one episode per line, human-diffable."""
    with open(path, "w") as fh:
        for ep in episodes:
            fh.write(json.dumps({
                "schema": EPISODE_SCHEMA,
                "episode_id": ep.episode_id,
                "scene_id": ep.scene_id,
                "start_pose": _pose_dict(ep.start_pose),
                "instruction": list(ep.instruction),
                "gt_path": [list(p.as_tuple()) for p in ep.gt_path],
            }, sort_keys=True) + "\n")


def load_episodes(path: str | FsPath) -> list[Episode]:
    episodes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("schema") != EPISODE_SCHEMA:
                raise ValueError(f"unsupported episode schema {rec.get('schema')!r}")
            episodes.append(Episode(
                episode_id=rec["episode_id"],
                scene_id=rec["scene_id"],
                start_pose=_pose_from_dict(rec["start_pose"]),
                instruction=tuple(rec["instruction"]),
                gt_path=Path([Vec3(*p) for p in rec["gt_path"]]),
            ))
    return episodes


def write_report(suite: SuiteResult, path: str | FsPath) -> None:
    """Per-episode rows then one aggregate line, all line-delimited records."""
    with open(path, "w") as fh:
        for row in suite.rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.write(json.dumps({"aggregate": suite.aggregate}, sort_keys=True) + "\n")


def write_trajectory_log(result: EpisodeResult, path: str | FsPath) -> None:
    """One line per primitive action: step, action, pose. Line 0 is the start pose."""
    with open(path, "w") as fh:
        for rec in result.actions:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_trajectory(path: str | FsPath) -> Path:
    points = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            x, y, z = rec["pose"]["position"]
            points.append(Vec3(x, y, z))
    return Path(points)


def write_decision_log(result: EpisodeResult, path: str | FsPath) -> None:
    with open(path, "w") as fh:
        for rec in result.decisions:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def decisions_to_replay_file(results: Sequence[EpisodeResult], path: str | FsPath) -> None:
    """Convert decision logs into a replayable score file."""
    with open(path, "w") as fh:
        for r in results:
            for rec in r.decisions:
                fh.write(json.dumps({
                    "schema": ReplayPolicy.SCHEMA,
                    "episode_id": r.episode_id,
                    "step": rec["step"],
                    "scores": rec["scores"],
                    "d_v": rec["d_v"],
                }, sort_keys=True) + "\n")


def _feature_ref(feature: np.ndarray) -> str:
    return hashlib.blake2b(feature.tobytes(), digest_size=8).hexdigest()


def export_teacher(scenes: Mapping[str, Scene] | Scene, episodes: Sequence[Episode],
                   cfg: RunConfig, path: str | FsPath) -> int:
    """Oracle rollouts dumped as per-step supervision records.

    Each line carries the pose, every candidate position with a feature
    digest, the teacher's selected index (null for Stop), and one vertical
    class per candidate.
    """
    if isinstance(scenes, Scene):
        scenes = {scenes.scene_id: scenes}
    n = 0
    with open(path, "w") as fh:
        for ep in episodes:
            scene = scenes.get(ep.scene_id)
            if scene is None:
                raise KeyError(f"episode {ep.episode_id} references missing scene {ep.scene_id!r}")
            policy = OraclePolicy(cfg.step, window_steps=cfg.window_steps)
            result = run_episode(scene, ep, policy, cfg)
            if result.error:
                raise RuntimeError(f"teacher rollout failed on {ep.episode_id}: {result.error}")
            for rec in result.decisions:
                d_v_classes = [int(decode_vertical(v)) for v in rec["d_v"]]
                fh.write(json.dumps({
                    "schema": TEACHER_SCHEMA,
                    "episode_id": ep.episode_id,
                    "step": rec["step"],
                    "pose": rec["pose"],
                    "candidates": rec["candidates"],
                    "c_gt": rec["selected"],
                    "d_v_gt": d_v_classes,
                }, sort_keys=True) + "\n")
                n += 1
    return n
