"""Sparse top-down memory: one recurrently updated feature cell per visited grid square.

Cells are keyed by integer offsets from a fixed origin at the horizontal step
size, so overhead and underfoot observations land in the agent's own cell.
The local crop is egocentric: the grid is rotated in quarter turns so the
agent's nearest cardinal heading points toward the top rows.
"""

from __future__ import annotations

import math
from pathlib import Path as FsPath

import numpy as np

from .core import Pose, Vec3, round_half_away


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    u, _, vt = np.linalg.svd(rng.normal(size=(n, n)))
    return u @ vt


class GruCell:
    """Minimal gated recurrent cell on numpy arrays.

    update gate   z = sigmoid(Wz x + Uz h + bz)
    reset gate    r = sigmoid(Wr x + Ur h + br)
    candidate     c = tanh(Wh x + Uh (r * h) + bh)
    new state     h' = z * h + (1 - z) * c

    With bounded inputs the state stays strictly inside (-1, 1). Weights are
    drawn from a seeded, roughly orthogonal initialization; `load` drops in
    externally trained weights with the same shapes.
    """

    PARAM_NAMES = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")

    def __init__(self, input_dim: int, hidden_dim: int | None = None, seed: int = 0) -> None:
        if input_dim <= 0:
            raise ValueError("input_dim must be positive")
        hidden_dim = input_dim if hidden_dim is None else hidden_dim
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        scale = 1.0 / math.sqrt(input_dim)
        self.wz = rng.normal(scale=scale, size=(hidden_dim, input_dim))
        self.uz = _orthogonal(rng, hidden_dim)
        self.bz = np.zeros(hidden_dim)
        self.wr = rng.normal(scale=scale, size=(hidden_dim, input_dim))
        self.ur = _orthogonal(rng, hidden_dim)
        self.br = np.zeros(hidden_dim)
        self.wh = rng.normal(scale=scale, size=(hidden_dim, input_dim))
        self.uh = _orthogonal(rng, hidden_dim)
        self.bh = np.zeros(hidden_dim)

    def step(self, h: np.ndarray, x: np.ndarray) -> np.ndarray:
        """One update; broadcasts over leading batch axes."""
        z = _sigmoid(x @ self.wz.T + h @ self.uz.T + self.bz)
        r = _sigmoid(x @ self.wr.T + h @ self.ur.T + self.br)
        c = np.tanh(x @ self.wh.T + (r * h) @ self.uh.T + self.bh)
        return z * h + (1.0 - z) * c

    def save(self, path: str | FsPath) -> None:
        np.savez(path, **{k: getattr(self, k) for k in self.PARAM_NAMES})

    @classmethod
    def load(cls, path: str | FsPath) -> GruCell:
        data = np.load(path)
        cell = cls.__new__(cls)
        for k in cls.PARAM_NAMES:
            setattr(cell, k, data[k])
        cell.hidden_dim, cell.input_dim = cell.wz.shape
        return cell


def nearest_cardinal_quarter(heading_degrees: float) -> int:
    """Index in 0..3 of the cardinal direction nearest the heading.

    Exact diagonals round up to the next quarter, so adding 90 degrees always
    advances the index by one.
    """
    return int(math.floor(heading_degrees / 90.0 + 0.5)) % 4


def egocentric_cell(size: int, heading_degrees: float, du: int, dv: int) -> tuple[int, int] | None:
    """Local-map indices of a cell offset (du, dv) from the agent, or None if outside.

    Mirrors the rotation in `BevMap.local_map`: with the agent facing its
    nearest cardinal, ahead is toward row 0 and the agent's right is toward
    the last column.
    """
    r = size // 2
    i, j = r - du, r - dv
    n = size
    for _ in range(nearest_cardinal_quarter(heading_degrees)):
        i, j = n - 1 - j, i
    if 0 <= i < n and 0 <= j < n:
        return i, j
    return None


class BevMap:
    """Sparse dict of grid cells, each holding one recurrent state vector."""

    def __init__(self, origin: Vec3, cell_size: float, gru: GruCell) -> None:
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.origin = origin
        self.cell_size = cell_size
        self.gru = gru
        self.cells: dict[tuple[int, int], np.ndarray] = {}

    def cell_of(self, p: Vec3) -> tuple[int, int]:
        """Grid cell of a point: offsets rounded half away from zero."""
        return (round_half_away((p.x - self.origin.x) / self.cell_size),
                round_half_away((p.y - self.origin.y) / self.cell_size))

    def update(self, position: Vec3, feature: np.ndarray) -> np.ndarray:
        """Fold one observation feature into the cell under `position`."""
        if feature.shape != (self.gru.input_dim,):
            raise ValueError(f"feature shape {feature.shape} != ({self.gru.input_dim},)")
        uv = self.cell_of(position)
        h = self.cells.get(uv)
        if h is None:
            h = np.zeros(self.gru.hidden_dim)
        h_new = self.gru.step(h, feature)
        self.cells[uv] = h_new
        return h_new

    def local_map(self, pose: Pose, size: int) -> np.ndarray:
        """Egocentric (size, size, hidden) crop centered on the agent's cell.

        Rotating the heading by 90 degrees rotates the output by exactly one
        quarter turn.
        """
        if size <= 0 or size % 2 == 0:
            raise ValueError("size must be odd and positive")
        r = size // 2
        cu, cv = self.cell_of(pose.position)
        world = np.zeros((size, size, self.gru.hidden_dim))
        # world[i, j] holds the cell at (cu + r - i, cv + r - j): +x up, +y left.
        for (u, v), h in self.cells.items():
            i = cu + r - u
            j = cv + r - v
            if 0 <= i < size and 0 <= j < size:
                world[i, j] = h
        k = nearest_cardinal_quarter(pose.heading.degrees)
        return np.ascontiguousarray(np.rot90(world, k))

    def snapshot(self) -> dict:
        """JSON-ready sparse dump of every cell state."""
        return {
            "cell_size": self.cell_size,
            "origin": list(self.origin.as_tuple()),
            "hidden_dim": self.gru.hidden_dim,
            "cells": [
                {"u": u, "v": v, "state": self.cells[(u, v)].tolist()}
                for (u, v) in sorted(self.cells)
            ],
        }
