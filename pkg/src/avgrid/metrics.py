"""Trajectory metrics: time-warped path distance, normalized similarity, success stats."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Path, StepConfig


def point_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between two (n, 3) point arrays."""
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def dtw(p: Path, q: Path) -> float:
    """Minimal accumulated point distance over monotone alignments.

    Classic dynamic program with match/insert/delete steps; the first points
    are aligned with each other and so are the last.
    """
    d = point_distances(p.as_array(), q.as_array())
    n, m = d.shape
    prev = list(np.cumsum(d[0]))
    for i in range(1, n):
        row = d[i].tolist()
        cur = [prev[0] + row[0]]
        for j in range(1, m):
            best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            if prev[j - 1] < best:
                best = prev[j - 1]
            cur.append(row[j] + best)
        prev = cur
    return float(prev[-1])


def ndtw(p: Path, ref: Path, distance_threshold: float = 20.0) -> float:
    """Similarity in (0, 1]: exp(-dtw / (|ref| * threshold))."""
    if distance_threshold <= 0:
        raise ValueError("distance_threshold must be positive")
    return math.exp(-dtw(p, ref) / (len(ref) * distance_threshold))


@dataclass(frozen=True)
class MetricsReport:
    """Per-episode navigation outcome."""

    ne: float              # distance from final position to the reference endpoint
    success: bool          # ne within the success radius
    oracle_success: bool   # any visited point within the radius of the endpoint
    ndtw: float
    sdtw: float            # ndtw gated by success, else 0


def evaluate_episode(executed: Path, gt: Path, cfg: StepConfig) -> MetricsReport:
    """Score an executed trajectory against its reference path."""
    goal = gt[-1]
    ne = executed[-1].distance_to(goal)
    success = ne <= cfg.success_radius
    arr = executed.as_array()
    garr = np.array(goal.as_tuple())
    closest = float(np.sqrt(((arr - garr) ** 2).sum(-1)).min())
    oracle_success = closest <= cfg.success_radius
    similarity = ndtw(executed, gt, cfg.success_radius)
    return MetricsReport(
        ne=float(ne),
        success=success,
        oracle_success=oracle_success,
        ndtw=similarity,
        sdtw=similarity if success else 0.0,
    )


def aggregate(reports: Sequence[MetricsReport]) -> dict:
    """Suite-level summary. SR/OSR are percentages to one decimal."""
    if not reports:
        raise ValueError("nothing to aggregate")
    n = len(reports)
    return {
        "episodes": n,
        "ne_mean": float(np.mean([r.ne for r in reports])),
        "sr_pct": round(100.0 * sum(r.success for r in reports) / n, 1),
        "osr_pct": round(100.0 * sum(r.oracle_success for r in reports) / n, 1),
        "ndtw_mean": float(np.mean([r.ndtw for r in reports])),
        "sdtw_mean": float(np.mean([r.sdtw for r in reports])),
    }
