"""Carry-over store of unselected high-confidence candidates.

After each decision the pool is rebuilt from the scored merged candidate list:
entries whose quantized grid cell has been visited or was just selected are
dropped, the rest are kept by descending score up to capacity. Capacity zero
degenerates to a build without the pool.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .core import StepConfig, Vec3, round_half_away
from .candidates import Candidate


@dataclass(eq=False)
class PoolEntry:
    candidate: Candidate
    score: float
    step_added: int


class CandidatePool:
    """Bounded pool keyed by quantized grid cells, plus the visited-cell set."""

    def __init__(self, capacity: int, cfg: StepConfig, origin: Vec3) -> None:
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self.cfg = cfg
        self.origin = origin
        self.entries: list[PoolEntry] = []
        self.visited: set[tuple[int, int, int]] = set()

    def quantize(self, p: Vec3) -> tuple[int, int, int]:
        """Grid cell of a position at (horizontal, horizontal, vertical) step size."""
        return (round_half_away((p.x - self.origin.x) / self.cfg.horizontal_step),
                round_half_away((p.y - self.origin.y) / self.cfg.horizontal_step),
                round_half_away((p.z - self.origin.z) / self.cfg.vertical_step))

    def mark_visited(self, cell: tuple[int, int, int]) -> None:
        self.visited.add(cell)

    def merge_step(self, live: Sequence[Candidate]) -> list[Candidate]:
        """Live candidates first, then pool entries by descending score then age.

        Pool entries that land in the same quantized cell as a live candidate
        (or an earlier pool entry) are dropped, keeping the live copy.
        """
        merged = list(live)
        seen = {self.quantize(c.position) for c in live}
        for entry in sorted(self.entries, key=lambda e: (-e.score, e.step_added)):
            cell = self.quantize(entry.candidate.position)
            if cell in seen:
                continue
            seen.add(cell)
            merged.append(entry.candidate)
        return merged

    def update_after_prediction(self,
                                scored: Sequence[tuple[Candidate, float]],
                                selected: Candidate | None,
                                new_agent_cell: tuple[int, int, int],
                                step: int) -> None:
        """Rebuild the pool from this step's scored candidates.

        The agent's new cell becomes visited. Unvisited, unselected candidates
        re-enter by descending score; per cell the best score wins and an
        entry already in the pool keeps its original insertion step. Over
        capacity, the lowest score goes first and the oldest entry breaks ties.
        """
        self.mark_visited(new_agent_cell)
        selected_cell = self.quantize(selected.position) if selected is not None else None
        original_step = {self.quantize(e.candidate.position): e.step_added for e in self.entries}

        best: dict[tuple[int, int, int], PoolEntry] = {}
        for cand, score in scored:
            cell = self.quantize(cand.position)
            if cell in self.visited or cell == selected_cell:
                continue
            kept = best.get(cell)
            if kept is None or score > kept.score:
                pooled = cand if cand.from_pool else replace(cand, from_pool=True)
                best[cell] = PoolEntry(candidate=pooled, score=float(score),
                                       step_added=original_step.get(cell, step))

        ranked = sorted(best.values(), key=lambda e: (-e.score, -e.step_added))
        self.entries = ranked[:self.capacity]
