"""Decision interface and reference policies: oracle, random, heuristic, replay.

Policies are deterministic functions of (their own configuration, the
context); the runner rebuilds them per episode, so any per-episode state bound
in `begin_episode` never leaks across episodes or worker processes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from .bevmap import egocentric_cell
from .candidates import (AlignmentTracker, Candidate, VerticalClass,
                         encode_vertical, teacher_vertical)
from .core import Path, Pose, StepConfig, Vec3, round_half_away


def stable_hash(text: str) -> int:
    """Process-independent 64-bit hash (Python's builtin hash is salted)."""
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


@dataclass(eq=False)
class Decision:
    """Scores over candidates plus a trailing Stop slot, and vertical offsets.

    `selected` is None for Stop, otherwise the argmax index with ties going to
    the smallest index. One vertical offset in [0, 1] accompanies every
    candidate slot.
    """

    scores: np.ndarray
    selected: int | None
    d_v: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.d_v = np.asarray(self.d_v, dtype=np.float64)
        n = len(self.scores) - 1
        if n < 1 or len(self.d_v) != n:
            raise ValueError("need one score per candidate plus a stop slot")
        if np.any(self.d_v < 0.0) or np.any(self.d_v > 1.0):
            raise ValueError("vertical offsets must lie in [0, 1]")
        arg = int(np.argmax(self.scores))
        expect = None if arg == n else arg
        if self.selected != expect:
            raise ValueError(f"selected {self.selected} is not the argmax slot {expect}")

    @classmethod
    def from_scores(cls, scores: Sequence[float], d_v: Sequence[float]) -> Decision:
        scores = np.asarray(scores, dtype=np.float64)
        arg = int(np.argmax(scores))
        selected = None if arg == len(scores) - 1 else arg
        return cls(scores=scores, selected=selected, d_v=np.asarray(d_v, dtype=np.float64))


@dataclass(eq=False)
class PolicyContext:
    """Everything a policy may look at for one decision."""

    episode_id: str
    instruction: tuple[str, ...]
    candidates: list[Candidate]            # live views first, then pool extras
    local_map: np.ndarray                  # egocentric (size, size, hidden)
    step: int                              # decision index within the episode
    history: list[np.ndarray]              # features of previously selected candidates
    executed: Path                         # trajectory so far, one point per action
    decision_positions: tuple[Vec3, ...]   # agent position at each decision so far
    pose: Pose


class Policy:
    def begin_episode(self, episode) -> None:
        """Bind per-episode data; default policies need nothing."""

    def decide(self, ctx: PolicyContext) -> Decision:
        raise NotImplementedError


class OraclePolicy(Policy):
    """Follows teacher labels: windowed-alignment argmax and vertical classes.

    Scores are the alignment similarities themselves, so the pool sees honest
    confidences. The stop slot outscores everything once the agent is inside
    the success radius of the reference endpoint with the window clamped there.
    """

    def __init__(self, cfg: StepConfig, window_steps: int = 5) -> None:
        self.cfg = cfg
        self.window_steps = window_steps
        self._tracker: AlignmentTracker | None = None
        self._fed = 0

    def begin_episode(self, episode) -> None:
        self._tracker = AlignmentTracker(episode.gt_path, self.cfg.success_radius,
                                         self.window_steps)
        self._fed = 0

    def decide(self, ctx: PolicyContext) -> Decision:
        if self._tracker is None:
            raise RuntimeError("begin_episode was never called")
        tracker = self._tracker
        while self._fed < len(ctx.executed):
            tracker.append_position(ctx.executed[self._fed])
            self._fed += 1
        agent = ctx.executed[-1]
        wlen, reaches_end = tracker.window_length(agent)
        window_end = tracker.gt[wlen - 1]
        stop = reaches_end and agent.distance_to(window_end) < self.cfg.success_radius

        scores = []
        d_v = []
        for cand in ctx.candidates:
            scores.append(tracker.extension_score(cand.position, wlen))
            vscores = [tracker.extension_score(p, wlen) for p in cand.vertical_set]
            best = max(vscores)
            for cls in (VerticalClass.MIDDLE, VerticalClass.LOWER, VerticalClass.UPPER):
                if vscores[cls - 1] == best:
                    d_v.append(encode_vertical(cls))
                    break
        scores.append(2.0 if stop else -1.0)  # similarities live in (0, 1]
        return Decision.from_scores(scores, d_v)


class RandomPolicy(Policy):
    """Uniform candidate scores and offsets, seeded per (seed, episode, step).

    The stop slot scores strictly below every candidate: a uniformly random
    stop would end most episodes a few steps from the start, where short
    references keep their goals, so the baseline wanders until the budget runs
    out instead.
    """

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def decide(self, ctx: PolicyContext) -> Decision:
        rng = np.random.default_rng([self.seed, stable_hash(ctx.episode_id), ctx.step])
        n = len(ctx.candidates)
        scores = rng.random(n)
        return Decision.from_scores(np.append(scores, -1.0), rng.random(n))


class HeuristicPolicy(Policy):
    """Instruction-feature cosine plus motion continuity, minus coverage.

    Instruction tokens embed through a seeded hash into the feature space; a
    candidate scores by cosine against the mean token embedding, a small bonus
    for continuing the recent motion direction, and a small penalty when its
    local-map cell already holds state. Stop outscores everything once the
    last three decision positions sit within half a horizontal step.
    """

    PROGRESS_WEIGHT = 0.1
    COVERAGE_WEIGHT = 0.2

    def __init__(self, seed: int, cfg: StepConfig) -> None:
        self.seed = seed
        self.cfg = cfg
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vec(self, token: str, dim: int) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None and len(cached) == dim:
            return cached
        rng = np.random.default_rng([self.seed, stable_hash(token)])
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        self._token_cache[token] = v
        return v

    def _query(self, instruction: tuple[str, ...], dim: int) -> np.ndarray:
        if not instruction:
            return np.zeros(dim)
        q = np.mean([self._token_vec(t, dim) for t in instruction], axis=0)
        norm = np.linalg.norm(q)
        return q / norm if norm > 0 else q

    def _stagnating(self, positions: tuple[Vec3, ...]) -> bool:
        if len(positions) < 3:
            return False
        last = positions[-3:]
        band = self.cfg.horizontal_step / 2.0
        return all(a.distance_to(b) <= band for a in last for b in last)

    def decide(self, ctx: PolicyContext) -> Decision:
        dim = len(ctx.candidates[0].observation.feature)
        query = self._query(ctx.instruction, dim)
        agent = ctx.executed[-1]
        motion = None
        if len(ctx.decision_positions) >= 2:
            prev = ctx.decision_positions[-2]
            step_vec = np.array(agent.as_tuple()) - np.array(prev.as_tuple())
            norm = np.linalg.norm(step_vec)
            if norm > 0:
                motion = step_vec / norm
        size = ctx.local_map.shape[0]

        scores = []
        for cand in ctx.candidates:
            f = cand.observation.feature
            s = float(f @ query)  # features are unit-norm
            offset = np.array(cand.position.as_tuple()) - np.array(agent.as_tuple())
            norm = np.linalg.norm(offset)
            if motion is not None and norm > 0:
                s += self.PROGRESS_WEIGHT * float(offset @ motion) / norm
            du = round_half_away(offset[0] / self.cfg.horizontal_step)
            dv = round_half_away(offset[1] / self.cfg.horizontal_step)
            ij = egocentric_cell(size, ctx.pose.heading.degrees, du, dv)
            if ij is not None:
                state_norm = np.linalg.norm(ctx.local_map[ij[0], ij[1]])
                s -= self.COVERAGE_WEIGHT * min(1.0, float(state_norm))
            scores.append(s)
        scores.append(2.0 if self._stagnating(ctx.decision_positions) else -2.0)

        d_v = []
        for cand in ctx.candidates:
            dz = cand.position.z - agent.z
            d_v.append(1.0 if dz > 0.5 * self.cfg.vertical_step
                       else 0.0 if dz < -0.5 * self.cfg.vertical_step else 0.5)
        return Decision.from_scores(scores, d_v)


class ReplayPolicy(Policy):
    """Replays precomputed scores keyed by (episode_id, step)."""

    SCHEMA = "scores-v1"

    def __init__(self, table: dict[tuple[str, int], tuple[list[float], list[float]]]) -> None:
        self.table = table

    @classmethod
    def from_file(cls, path: str | FsPath) -> ReplayPolicy:
        table = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("schema") != cls.SCHEMA:
                    raise ValueError(f"unsupported score record schema {rec.get('schema')!r}")
                table[(rec["episode_id"], int(rec["step"]))] = (rec["scores"], rec["d_v"])
        return cls(table)

    def decide(self, ctx: PolicyContext) -> Decision:
        key = (ctx.episode_id, ctx.step)
        if key not in self.table:
            raise KeyError(f"no replay scores for episode {ctx.episode_id!r} step {ctx.step}")
        scores, d_v = self.table[key]
        if len(scores) != len(ctx.candidates) + 1:
            raise ValueError(f"replay scores for {key} cover {len(scores) - 1} candidates, "
                             f"context has {len(ctx.candidates)}")
        return Decision.from_scores(scores, d_v)
