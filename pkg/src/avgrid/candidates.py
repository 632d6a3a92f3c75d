"""View-to-position candidates and alignment-based teacher labels.

Each skybox view maps to the position the agent would occupy after moving one
step along that view's axis. A teacher scores every candidate by how well the
trajectory-so-far, extended with the candidate, aligns with a windowed prefix
of the reference path, and separately picks one of three vertical offsets per
candidate the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .core import Path, Pose, StepConfig, Vec3
from .env import Observation, Skybox, ViewDirection


class VerticalClass(IntEnum):
    LOWER = 1
    MIDDLE = 2
    UPPER = 3


@dataclass(eq=False)
class Candidate:
    """A reachable position derived from one observation."""

    observation: Observation
    position: Vec3
    origin_pose: Pose
    vertical_set: tuple[Vec3, Vec3, Vec3]  # (lower, middle, upper)
    from_pool: bool = False


def make_candidates(skybox: Skybox, cfg: StepConfig) -> list[Candidate]:
    """One candidate per view: the pose displaced one step along the view axis.

    Horizontal views move by the horizontal step, vertical views by the
    vertical step; the three-way vertical set brackets each candidate with
    +/- one vertical step.
    """
    p = skybox.pose.position
    sv = cfg.vertical_step
    out = []
    for obs in skybox.observations:
        d = obs.orientation
        pos = Vec3(p.x + d.x * cfg.horizontal_step,
                   p.y + d.y * cfg.horizontal_step,
                   p.z + d.z * cfg.vertical_step)
        vset = (Vec3(pos.x, pos.y, pos.z - sv), pos, Vec3(pos.x, pos.y, pos.z + sv))
        out.append(Candidate(observation=obs, position=pos,
                             origin_pose=skybox.pose, vertical_set=vset))
    return out


def nearest_index(gt: Path, p: Vec3) -> int:
    """Index of the reference point closest to p; ties go to the earliest."""
    arr = gt.as_array()
    d = np.sqrt(((arr - np.array(p.as_tuple())) ** 2).sum(-1))
    return int(np.argmin(d))


def gt_window(gt: Path, agent_position: Vec3, window_steps: int) -> Path:
    """Reference prefix from the start to `window_steps` past the nearest point."""
    if window_steps < 0:
        raise ValueError("window_steps must be non-negative")
    idx = nearest_index(gt, agent_position)
    end = min(idx + window_steps, len(gt) - 1)
    return Path(gt.points[:end + 1])


def window_reaches_end(gt: Path, agent_position: Vec3, window_steps: int) -> bool:
    """True when the window above is clamped at the reference endpoint."""
    return nearest_index(gt, agent_position) + window_steps >= len(gt) - 1


def alignment_similarity(executed: Path, window: Path, point: Vec3, threshold: float) -> float:
    """Open-end alignment of (executed + point) against the window.

    The trajectory is still in progress, so it is matched against every prefix
    of the window and the best one counts; the window tail beyond that prefix
    is free. A boundary-matched comparison would instead drag every candidate
    toward the window's far end and reward corner-cutting at reference turns.
    Returns exp(-cost / (len(window) * threshold)), in (0, 1].
    """
    tracker = AlignmentTracker(window, success_radius=threshold, window_steps=0)
    for p in executed:
        tracker.append_position(p)
    return tracker.extension_score(point, len(window))


def teacher_candidate(candidates: Sequence[Candidate],
                      pool_extras: Sequence[Candidate],
                      executed: Path,
                      window: Path,
                      cfg: StepConfig,
                      *,
                      reaches_end: bool = True) -> int | None:
    """Best candidate index under windowed alignment, or None for Stop.

    Stop fires when the agent already sits within the success radius of the
    window's endpoint and the window is clamped at the reference end; otherwise
    the argmax over live candidates followed by pool extras decides, with ties
    going to the smallest index.
    """
    merged = list(candidates) + list(pool_extras)
    if not merged:
        raise ValueError("no candidates to choose from")
    if reaches_end and executed[-1].distance_to(window[-1]) < cfg.success_radius:
        return None
    best_i, best_s = 0, -math.inf
    for i, cand in enumerate(merged):
        s = alignment_similarity(executed, window, cand.position, cfg.success_radius)
        if s > best_s:
            best_i, best_s = i, s
    return best_i


def teacher_vertical(candidate: Candidate, executed: Path, window: Path,
                     distance_threshold: float = 20.0) -> VerticalClass:
    """Vertical offset whose extension aligns best; ties prefer middle, then lower."""
    scores = [
        alignment_similarity(executed, window, p, distance_threshold)
        for p in candidate.vertical_set
    ]
    best = max(scores)
    for cls in (VerticalClass.MIDDLE, VerticalClass.LOWER, VerticalClass.UPPER):
        if scores[cls - 1] == best:
            return cls
    raise AssertionError("unreachable")


def encode_vertical(cls: VerticalClass | int) -> float:
    """Map a vertical class to its regression target in {0, 0.5, 1}."""
    return (int(cls) - 1) / 2.0


def decode_vertical(d_v: float) -> VerticalClass:
    """Thresholded decode of a unit-interval vertical offset; middle keeps the ties."""
    if not 0.0 <= d_v <= 1.0 or not math.isfinite(d_v):
        raise ValueError(f"vertical offset {d_v} outside [0, 1]")
    if d_v < 0.25:
        return VerticalClass.LOWER
    if d_v <= 0.75:
        return VerticalClass.MIDDLE
    return VerticalClass.UPPER


def vertical_loss(predicted: Sequence[float], labels: Sequence[VerticalClass | int]) -> float:
    """Mean squared error between offsets and encoded class targets."""
    if len(predicted) != len(labels) or not predicted:
        raise ValueError("predicted and labels must be equal-length and non-empty")
    return float(np.mean([(p - encode_vertical(c)) ** 2 for p, c in zip(predicted, labels)]))


@dataclass(frozen=True)
class VerticalAccuracy:
    """Exact/relaxed class accuracy over all views and the selected subset."""

    all_exact: float
    all_relaxed: float
    select_exact: float
    select_relaxed: float


def vertical_accuracy(predictions: Sequence[float],
                      labels: Sequence[VerticalClass | int],
                      selected_mask: Sequence[bool]) -> VerticalAccuracy:
    """Score decoded vertical predictions against labels.

    Exact requires the decoded class to equal the label; relaxed tolerates a
    one-class miss, which the middle class always satisfies.
    """
    if not (len(predictions) == len(labels) == len(selected_mask)) or not predictions:
        raise ValueError("inputs must be equal-length and non-empty")
    decoded = np.array([int(decode_vertical(p)) for p in predictions])
    lab = np.array([int(c) for c in labels])
    if lab.min() < 1 or lab.max() > 3:
        raise ValueError("labels must be vertical classes in {1, 2, 3}")
    mask = np.array(selected_mask, dtype=bool)
    if not mask.any():
        raise ValueError("selected mask picks no views")
    exact = decoded == lab
    relaxed = np.abs(decoded - lab) <= 1
    return VerticalAccuracy(
        all_exact=float(exact.mean()),
        all_relaxed=float(relaxed.mean()),
        select_exact=float(exact[mask].mean()),
        select_relaxed=float(relaxed[mask].mean()),
    )


class AlignmentTracker:
    """Incremental alignment scores of a growing trajectory against one reference.

    Keeps the last dynamic-program row of the trajectory-vs-reference distance
    table, so appending a position costs O(|reference|) and scoring a
    hypothetical extra point costs the same without mutating state. Scores are
    open-end: the extended trajectory matches the best prefix of the window.
    """

    def __init__(self, gt: Path, success_radius: float, window_steps: int) -> None:
        if success_radius <= 0:
            raise ValueError("success_radius must be positive")
        self.gt = gt
        self.gt_arr = gt.as_array()
        self.success_radius = success_radius
        self.window_steps = window_steps
        self._row: list[float] | None = None  # alignment row over all gt prefixes

    def _dist_row(self, p: Vec3) -> list[float]:
        d = np.sqrt(((self.gt_arr - np.array(p.as_tuple())) ** 2).sum(-1))
        return d.tolist()

    def append_position(self, p: Vec3) -> None:
        d = self._dist_row(p)
        if self._row is None:
            self._row = list(np.cumsum(d))
            return
        prev = self._row
        cur = [prev[0] + d[0]]
        for j in range(1, len(d)):
            best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            if prev[j - 1] < best:
                best = prev[j - 1]
            cur.append(d[j] + best)
        self._row = cur

    def window_length(self, agent_position: Vec3) -> tuple[int, bool]:
        """Points in the current window and whether it reaches the reference end."""
        idx = nearest_index(self.gt, agent_position)
        last = len(self.gt) - 1
        end = min(idx + self.window_steps, last)
        return end + 1, end == last

    def extension_score(self, p: Vec3, window_len: int) -> float:
        """Open-end similarity of (trajectory + p) against the window.

        The appended row of the dynamic program is minimized over all window
        prefixes instead of being read at the window's end, so the score does
        not pull candidates toward the far end of the window.
        """
        if self._row is None:
            raise ValueError("no positions appended yet")
        if not 1 <= window_len <= len(self.gt):
            raise ValueError("window_len outside the reference")
        d = self._dist_row(p)
        prev = self._row
        cur = prev[0] + d[0]
        best_at = cur
        for j in range(1, window_len):
            best = prev[j]
            if cur < best:
                best = cur
            if prev[j - 1] < best:
                best = prev[j - 1]
            cur = d[j] + best
            if cur < best_at:
                best_at = cur
        return math.exp(-best_at / (window_len * self.success_radius))
