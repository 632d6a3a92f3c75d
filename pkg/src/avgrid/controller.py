"""Greedy primitive-action control toward a target position.

The loop emits one action per iteration: turn toward the target bearing while
the heading error is at least half a turn increment, then move forward while
the horizontal gap exceeds half a horizontal step, then ascend or descend
while the vertical gap exceeds half a vertical step. It terminates when both
gaps are inside their half-step bands simultaneously. Sideways moves are never
used. A blocked translation substitutes one ascend; a blocked ascend means the
agent is stuck.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Action, Pose, StepConfig, Vec3, apply_action, relative_heading
from .env import Scene


class StuckError(RuntimeError):
    """The obstacle dodge itself is blocked or has exceeded the scene height."""


@dataclass(eq=False)
class ControlOutcome:
    actions: list[Action]
    poses: list[Pose]            # pose after each action, parallel to actions
    final_pose: Pose
    reached: bool
    ascents_for_avoidance: int


def go_to(scene: Scene, start: Pose, target: Vec3, cfg: StepConfig, budget: int) -> ControlOutcome:
    """Drive from start to within half a step of target, spending at most budget actions."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    h_band = cfg.horizontal_step / 2.0
    v_band = cfg.vertical_step / 2.0
    max_dodges = int(math.ceil(scene.bounds.z_extent / cfg.vertical_step)) + 1

    pose = start
    actions: list[Action] = []
    poses: list[Pose] = []
    dodges = 0

    def emit(action: Action) -> None:
        nonlocal pose
        pose = apply_action(pose, action, cfg)
        actions.append(action)
        poses.append(pose)

    def translate(action: Action) -> None:
        nonlocal dodges
        nxt = apply_action(pose, action, cfg)
        if not scene.segment_blocked(pose.position, nxt.position):
            emit(action)
            return
        if action is Action.ASCEND:
            raise StuckError(f"ascend blocked at {pose.position.as_tuple()}")
        up = apply_action(pose, Action.ASCEND, cfg)
        if scene.segment_blocked(pose.position, up.position):
            raise StuckError(f"translation and dodge both blocked at {pose.position.as_tuple()}")
        dodges += 1
        if dodges > max_dodges:
            raise StuckError("upward dodging exceeded the scene height")
        emit(Action.ASCEND)

    while True:
        h_gap = pose.position.horizontal_distance_to(target)
        v_gap = abs(target.z - pose.position.z)
        reached = h_gap <= h_band and v_gap <= v_band
        if reached or len(actions) >= budget:
            return ControlOutcome(actions=actions, poses=poses, final_pose=pose,
                                  reached=reached, ascents_for_avoidance=dodges)
        rel = relative_heading(pose, target)
        if rel is not None and abs(rel) >= cfg.turn_increment / 2.0 and h_gap > h_band:
            emit(Action.TURN_RIGHT if rel > 0 else Action.TURN_LEFT)
        elif h_gap > h_band:
            translate(Action.MOVE_FORWARD)
        else:
            translate(Action.ASCEND if target.z > pose.position.z else Action.DESCEND)
