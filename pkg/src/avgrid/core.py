"""Domain primitives: positions, headings, the discrete action alphabet, step geometry.

Coordinate frame: right-handed, z-up, 1 unit = 1 meter. Heading 0 degrees
points along +x and increases clockwise when viewed from above, so a
TurnRight increases the heading angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

# Exact facing vectors at cardinal headings keep grid walks on the lattice
# (math.cos(math.radians(90)) is 6e-17, not 0).
_CARDINAL_DIRECTIONS = {
    0.0: (1.0, 0.0),
    90.0: (0.0, -1.0),
    180.0: (-1.0, 0.0),
    270.0: (0.0, 1.0),
}


def round_half_away(t: float) -> int:
    """Round to nearest integer with halves going away from zero."""
    return math.floor(t + 0.5) if t >= 0 else math.ceil(t - 0.5)


@dataclass(frozen=True)
class Vec3:
    """A point or displacement in scene coordinates (meters)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite component: ({self.x}, {self.y}, {self.z})")

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> Vec3:
        return Vec3(self.x * k, self.y * k, self.z * k)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def distance_to(self, other: Vec3) -> float:
        d = self - other
        return d.norm()

    def horizontal_distance_to(self, other: Vec3) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class Heading:
    """Yaw angle in degrees, normalized to [0, 360)."""

    degrees: float

    def __post_init__(self) -> None:
        d = float(self.degrees) % 360.0
        if not math.isfinite(d):
            raise ValueError(f"non-finite heading: {self.degrees}")
        if d == 360.0:  # tiny negative inputs round the modulo up to the period
            d = 0.0
        object.__setattr__(self, "degrees", d)

    def turned(self, delta: float) -> Heading:
        return Heading(self.degrees + delta)

    def direction(self) -> Vec3:
        """Unit facing vector in the horizontal plane."""
        d = self.degrees
        exact = _CARDINAL_DIRECTIONS.get(d % 360.0)
        if exact is not None:
            return Vec3(exact[0], exact[1], 0.0)
        r = math.radians(d)
        return Vec3(math.cos(r), -math.sin(r), 0.0)


class Action(str, Enum):
    MOVE_FORWARD = "move_forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    ASCEND = "ascend"
    DESCEND = "descend"
    MOVE_LEFT = "move_left"   # in the alphabet, never emitted by the controller
    MOVE_RIGHT = "move_right"  # in the alphabet, never emitted by the controller
    STOP = "stop"


@dataclass(frozen=True)
class StepConfig:
    """Motion geometry shared by the whole harness."""

    horizontal_step: float = 5.0
    vertical_step: float = 2.0
    turn_increment: float = 15.0
    success_radius: float = 20.0
    max_steps: int = 1000

    def __post_init__(self) -> None:
        if self.horizontal_step <= 0 or self.vertical_step <= 0:
            raise ValueError("step lengths must be positive")
        if self.turn_increment <= 0 or abs(360.0 / self.turn_increment - round(360.0 / self.turn_increment)) > 1e-9:
            raise ValueError("turn_increment must divide 360")
        if self.success_radius <= 0:
            raise ValueError("success_radius must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class Pose:
    position: Vec3
    heading: Heading


@dataclass(frozen=True)
class Path:
    """An ordered, non-empty sequence of positions.

    Consecutive duplicates are allowed: the agent may hold position while
    turning in place.
    """

    points: tuple[Vec3, ...]

    def __init__(self, points: Iterable[Vec3]) -> None:
        pts = tuple(points)
        if not pts:
            raise ValueError("a path needs at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __iter__(self) -> Iterator[Vec3]:
        return iter(self.points)

    def extended(self, p: Vec3) -> Path:
        return Path(self.points + (p,))

    def as_array(self) -> np.ndarray:
        return np.array([(p.x, p.y, p.z) for p in self.points], dtype=np.float64)


def apply_action(pose: Pose, action: Action, cfg: StepConfig) -> Pose:
    """Kinematic effect of one primitive action (no collision checking).

    Stop is rejected; episode termination is the caller's business.
    """
    if action is Action.STOP:
        raise ValueError("stop is not a motion; handle it at the episode level")
    p, h = pose.position, pose.heading
    if action is Action.TURN_LEFT:
        return Pose(p, h.turned(-cfg.turn_increment))
    if action is Action.TURN_RIGHT:
        return Pose(p, h.turned(cfg.turn_increment))
    if action is Action.ASCEND:
        return Pose(Vec3(p.x, p.y, p.z + cfg.vertical_step), h)
    if action is Action.DESCEND:
        return Pose(Vec3(p.x, p.y, p.z - cfg.vertical_step), h)
    if action is Action.MOVE_FORWARD:
        d = h.direction()
    elif action is Action.MOVE_LEFT:
        d = h.turned(-90.0).direction()
    elif action is Action.MOVE_RIGHT:
        d = h.turned(90.0).direction()
    else:  # pragma: no cover - exhaustive
        raise ValueError(f"unknown action {action}")
    return Pose(p + d.scaled(cfg.horizontal_step), h)


def relative_heading(pose: Pose, target: Vec3) -> float | None:
    """Signed smallest rotation (degrees) taking the heading onto the target bearing.

    Positive means a right turn is needed. Returns None when the target has no
    horizontal offset (directly above/below); callers treat that as aligned.
    """
    dx = target.x - pose.position.x
    dy = target.y - pose.position.y
    if dx == 0.0 and dy == 0.0:
        return None
    bearing = math.degrees(math.atan2(-dy, dx)) % 360.0
    rel = (bearing - pose.heading.degrees + 180.0) % 360.0 - 180.0
    return rel
