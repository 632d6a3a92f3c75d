"""Episode rollouts, dataset generation, suites, and on-disk record formats."""

from __future__ import annotations

import json

import numpy as np
import pytest

from avgrid.core import Heading, Path, Pose, StepConfig, Vec3
from avgrid.env import generate_city
from avgrid.policy import OraclePolicy, ReplayPolicy
from avgrid.runner import (Episode, EpisodeResult, RunConfig,
                           decisions_to_replay_file, export_teacher,
                           generate_dataset, load_episodes, load_trajectory,
                           make_policy, run_episode, run_suite, save_episodes,
                           write_decision_log, write_report,
                           write_trajectory_log)

STEP = StepConfig()
CFG = RunConfig()


@pytest.fixture(scope="module")
def town():
    return generate_city(seed=21, extent=250.0, building_density=0.2,
                         max_height=25.0)


@pytest.fixture(scope="module")
def town_episodes(town):
    return generate_dataset(town, 12, seed=21, length_range=(8, 20), cfg=STEP)


# -- configuration and episodes ---------------------------------------------------

def test_episode_requires_path_starting_at_pose():
    with pytest.raises(ValueError):
        Episode(episode_id="e", scene_id="s",
                start_pose=Pose(Vec3(0, 0, 10), Heading(0.0)),
                instruction=("fly",),
                gt_path=Path([Vec3(5, 0, 10), Vec3(10, 0, 10)]))


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(local_map_size=10)
    with pytest.raises(ValueError):
        RunConfig(pool_capacity=-1)
    with pytest.raises(ValueError):
        RunConfig(budget=0)
    assert RunConfig(budget=77).action_budget == 77
    assert RunConfig().action_budget == STEP.max_steps


def test_make_policy_names():
    assert isinstance(make_policy("oracle", CFG), OraclePolicy)
    for name in ("random", "heuristic"):
        make_policy(name, CFG)
    with pytest.raises(ValueError):
        make_policy("nonsense", CFG)
    with pytest.raises(ValueError):
        make_policy("replay", CFG)  # needs a score file


# -- dataset generation --------------------------------------------------------

def test_dataset_is_seeded_and_sized(town):
    a = generate_dataset(town, 6, seed=5, length_range=(8, 15), cfg=STEP)
    b = generate_dataset(town, 6, seed=5, length_range=(8, 15), cfg=STEP)
    assert len(a) == 6
    assert [ep.episode_id for ep in a] == [ep.episode_id for ep in b]
    for x, y in zip(a, b):
        assert x.gt_path.points == y.gt_path.points
        assert x.instruction == y.instruction
    c = generate_dataset(town, 6, seed=6, length_range=(8, 15), cfg=STEP)
    assert any(x.gt_path.points != y.gt_path.points for x, y in zip(a, c))


def test_dataset_paths_are_grid_walks(town, town_episodes):
    for ep in town_episodes:
        pts = ep.gt_path.points
        assert 8 + 1 <= len(pts) <= 20 + 1
        seen = set()
        for p in pts:
            assert p.as_tuple() not in seen  # self-avoiding
            seen.add(p.as_tuple())
        for a, b in zip(pts, pts[1:]):
            d = (abs(b.x - a.x), abs(b.y - a.y), abs(b.z - a.z))
            assert d in {(STEP.horizontal_step, 0.0, 0.0),
                         (0.0, STEP.horizontal_step, 0.0),
                         (0.0, 0.0, STEP.vertical_step)}
            assert not town.segment_blocked(a, b)


def test_dataset_goals_are_displaced(town_episodes):
    for ep in town_episodes:
        assert ep.gt_path[-1].distance_to(ep.gt_path[0]) >= 2 * STEP.success_radius


def test_dataset_instructions_describe_moves(town_episodes):
    for ep in town_episodes:
        assert ep.instruction[0] == "fly"
        assert ep.instruction[-2:] == ("stop", "there")


def test_dataset_rejects_unreachable_displacement(town):
    with pytest.raises(ValueError):
        generate_dataset(town, 1, seed=0, length_range=(2, 3), cfg=STEP)


# -- single-episode rollouts ---------------------------------------------------

def test_oracle_rollout_reaches_goal(town, town_episodes):
    ep = town_episodes[0]
    result = run_episode(town, ep, make_policy("oracle", CFG), CFG)
    assert result.error is None
    assert result.stopped
    assert result.report.success
    assert result.trajectory[0] == ep.start_pose.position


def test_rollout_logs_are_structured(town, town_episodes):
    ep = town_episodes[1]
    result = run_episode(town, ep, make_policy("oracle", CFG), CFG)
    assert result.actions[0] == {"step": 0, "action": None,
                                 "pose": {"position": list(ep.start_pose.position.as_tuple()),
                                          "heading": ep.start_pose.heading.degrees}}
    assert len(result.trajectory) == len(result.actions)
    for k, rec in enumerate(result.actions):
        assert rec["step"] == k
        assert tuple(rec["pose"]["position"]) == result.trajectory[k].as_tuple()
    for rec in result.decisions:
        assert len(rec["scores"]) == rec["n_candidates"] + 1
        assert len(rec["d_v"]) == rec["n_candidates"]
        assert len(rec["candidates"]) == rec["n_candidates"]
        assert rec["selected"] is None or 0 <= rec["selected"] < rec["n_candidates"]
    assert result.decisions[-1]["selected"] is None  # ended with Stop


def test_budget_limits_primitive_actions(town, town_episodes):
    ep = town_episodes[2]
    cfg = RunConfig(budget=7)
    result = run_episode(town, ep, make_policy("oracle", cfg), cfg)
    assert len(result.actions) - 1 <= 7  # line 0 is the start pose
    assert not result.report.success or result.stopped


def test_disabled_top_down_removes_vertical_candidates(town, town_episodes):
    ep = town_episodes[3]
    cfg = RunConfig(use_top_down_obs=False, use_extra_candidates=False)
    result = run_episode(town, ep, make_policy("oracle", cfg), cfg)
    assert result.decisions
    for rec in result.decisions:
        assert rec["n_candidates"] == 4


def test_disabled_vertical_action_keeps_middle(town, town_episodes):
    ep = town_episodes[4]
    cfg = RunConfig(use_vertical_action=False)
    result = run_episode(town, ep, make_policy("oracle", cfg), cfg)
    for rec in result.decisions:
        assert rec["vertical"] in (None, 2)


def test_pool_capacity_zero_matches_pool_disabled(town, town_episodes):
    base = RunConfig(pool_capacity=0)
    off = RunConfig(use_extra_candidates=False)
    for ep in town_episodes[:4]:
        a = run_episode(town, ep, make_policy("heuristic", base), base)
        b = run_episode(town, ep, make_policy("heuristic", off), off)
        assert [p.as_tuple() for p in a.trajectory] == [p.as_tuple() for p in b.trajectory]
        assert [r["selected"] for r in a.decisions] == [r["selected"] for r in b.decisions]


# -- suites --------------------------------------------------------

def test_suite_aggregates_and_rows(town, town_episodes):
    suite = run_suite(town_episodes[:5], {town.scene_id: town}, "oracle", CFG)
    assert len(suite.results) == len(suite.rows) == 5
    assert suite.aggregate["episodes"] == 5
    assert suite.aggregate["policy"] == "oracle"
    assert not suite.any_errors
    for row, res in zip(suite.rows, suite.results):
        assert row["episode_id"] == res.episode_id
        assert row["ndtw"] == res.report.ndtw


def test_suite_parallel_matches_serial(town, town_episodes):
    eps = town_episodes[:6]
    scenes = {town.scene_id: town}
    serial = run_suite(eps, scenes, "heuristic", CFG, parallelism=1)
    parallel = run_suite(eps, scenes, "heuristic", CFG, parallelism=3)
    assert serial.rows == parallel.rows
    assert serial.aggregate == parallel.aggregate
    for a, b in zip(serial.results, parallel.results):
        assert [p.as_tuple() for p in a.trajectory] == [p.as_tuple() for p in b.trajectory]


def test_suite_missing_scene_is_an_error_row(town_episodes):
    suite = run_suite(town_episodes[:2], {}, "oracle", CFG)
    assert suite.any_errors
    assert all(r.error for r in suite.results)
    assert suite.aggregate["errors"] == 2


def test_suite_rejects_bad_parallelism(town, town_episodes):
    with pytest.raises(ValueError):
        run_suite(town_episodes[:1], {town.scene_id: town}, "oracle", CFG,
                  parallelism=0)


# -- file formats --------------------------------------------------------

def test_episode_file_round_trip(tmp_path, town_episodes):
    p = tmp_path / "episodes.jsonl"
    save_episodes(town_episodes, p)
    loaded = load_episodes(p)
    assert len(loaded) == len(town_episodes)
    for a, b in zip(town_episodes, loaded):
        assert a.episode_id == b.episode_id
        assert a.scene_id == b.scene_id
        assert a.start_pose == b.start_pose
        assert a.instruction == b.instruction
        assert a.gt_path.points == b.gt_path.points


def test_episode_file_rejects_unknown_schema(tmp_path):
    p = tmp_path / "episodes.jsonl"
    p.write_text('{"schema": "episodes-v9"}\n')
    with pytest.raises(ValueError):
        load_episodes(p)


def test_report_file_has_rows_then_aggregate(tmp_path, town, town_episodes):
    suite = run_suite(town_episodes[:3], {town.scene_id: town}, "oracle", CFG)
    p = tmp_path / "report.jsonl"
    write_report(suite, p)
    lines = [json.loads(l) for l in p.read_text().splitlines()]
    assert len(lines) == 4
    assert [l["episode_id"] for l in lines[:3]] == [r.episode_id for r in suite.results]
    assert lines[-1] == {"aggregate": suite.aggregate}


def test_trajectory_log_round_trip(tmp_path, town, town_episodes):
    result = run_episode(town, town_episodes[5], make_policy("oracle", CFG), CFG)
    p = tmp_path / "trajectory.jsonl"
    write_trajectory_log(result, p)
    loaded = load_trajectory(p)
    assert [q.as_tuple() for q in loaded] == [q.as_tuple() for q in result.trajectory]


def test_decision_log_and_replay_round_trip(tmp_path, town, town_episodes):
    eps = town_episodes[:3]
    scenes = {town.scene_id: town}
    suite = run_suite(eps, scenes, "heuristic", CFG)
    p = tmp_path / "scores.jsonl"
    decisions_to_replay_file(suite.results, p)

    replayed = run_suite(eps, scenes, "replay", CFG, replay_path=str(p))
    for a, b in zip(suite.results, replayed.results):
        assert [q.as_tuple() for q in a.trajectory] == [q.as_tuple() for q in b.trajectory]
        assert [r["selected"] for r in a.decisions] == [r["selected"] for r in b.decisions]
    assert suite.aggregate == {**replayed.aggregate, "policy": "heuristic"}


def test_decision_log_is_line_json(tmp_path, town, town_episodes):
    result = run_episode(town, town_episodes[0], make_policy("oracle", CFG), CFG)
    p = tmp_path / "decisions.jsonl"
    write_decision_log(result, p)
    lines = [json.loads(l) for l in p.read_text().splitlines()]
    assert [l["step"] for l in lines] == list(range(len(lines)))


def test_export_teacher_schema(tmp_path, town, town_episodes):
    p = tmp_path / "teacher.jsonl"
    n = export_teacher(town, town_episodes[:2], CFG, p)
    lines = [json.loads(l) for l in p.read_text().splitlines()]
    assert len(lines) == n > 0
    for rec in lines:
        assert rec["schema"] == "teacher-v1"
        assert rec["c_gt"] is None or 0 <= rec["c_gt"] < len(rec["candidates"])
        assert len(rec["d_v_gt"]) == len(rec["candidates"])
        assert set(rec["d_v_gt"]) <= {1, 2, 3}
        for cand in rec["candidates"]:
            assert len(cand["position"]) == 3
            assert isinstance(cand["feature_ref"], str)
    # The final record of each episode is the Stop label.
    last_by_ep = {}
    for rec in lines:
        last_by_ep[rec["episode_id"]] = rec
    assert all(rec["c_gt"] is None for rec in last_by_ep.values())


def test_export_teacher_missing_scene_raises(tmp_path, town_episodes):
    with pytest.raises(KeyError):
        export_teacher({}, town_episodes[:1], CFG, tmp_path / "t.jsonl")
