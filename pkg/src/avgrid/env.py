"""Voxel scenes: occupancy queries, six-view skybox observations, synthetic cities, file I/O.

A scene is a dense boolean voxel grid over an axis-aligned box. Everything
outside the box counts as solid, so the world edge is a wall. Observations are
deterministic geometry digests, not rendered images: an externally trained
vision model can replace `get_skybox` as long as it honors the same shapes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path as FsPath

import numpy as np

from .core import Heading, Pose, Vec3

SCENE_MAGIC = b"AVGRID1\0"
FEATURE_WINDOW = 9        # voxels per side of the occupancy window behind each view
FEATURE_MAX_RANGE = 100.0  # meters swept by the free-space depth ray
DIRECTION_TAG_DIM = 6


class SceneBoundsError(ValueError):
    """Raised when an observation is requested from outside the scene box."""


class ViewDirection(Enum):
    FRONT = "front"
    LEFT = "left"
    RIGHT = "right"
    BACK = "back"
    UP = "up"
    DOWN = "down"


# (relative heading, relative elevation) in degrees for each view.
VIEW_ANGLES: dict[ViewDirection, tuple[float, float]] = {
    ViewDirection.FRONT: (0.0, 0.0),
    ViewDirection.LEFT: (-90.0, 0.0),
    ViewDirection.RIGHT: (90.0, 0.0),
    ViewDirection.BACK: (180.0, 0.0),
    ViewDirection.UP: (0.0, 90.0),
    ViewDirection.DOWN: (0.0, -90.0),
}


def view_orientation(direction: ViewDirection, heading: Heading) -> Vec3:
    """Unit vector of a view axis for an agent with the given heading."""
    if direction is ViewDirection.UP:
        return Vec3(0.0, 0.0, 1.0)
    if direction is ViewDirection.DOWN:
        return Vec3(0.0, 0.0, -1.0)
    turn = {ViewDirection.FRONT: 0.0, ViewDirection.LEFT: -90.0,
            ViewDirection.RIGHT: 90.0, ViewDirection.BACK: 180.0}[direction]
    return heading.turned(turn).direction()


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounding box, closed on all faces for containment."""

    lo: Vec3
    hi: Vec3

    def __post_init__(self) -> None:
        if not (self.lo.x < self.hi.x and self.lo.y < self.hi.y and self.lo.z < self.hi.z):
            raise ValueError("degenerate bounds")

    def contains(self, p: Vec3) -> bool:
        return (self.lo.x <= p.x <= self.hi.x
                and self.lo.y <= p.y <= self.hi.y
                and self.lo.z <= p.z <= self.hi.z)

    @property
    def z_extent(self) -> float:
        return self.hi.z - self.lo.z


@dataclass(eq=False)
class Observation:
    """One view of the skybox: orientation, feature vector, view angles."""

    direction: ViewDirection
    orientation: Vec3          # unit vector along the view axis
    feature: np.ndarray        # length feature_dim, L2-normalized
    relative_heading: float    # degrees, fixed per view slot
    relative_elevation: float  # degrees, fixed per view slot


@dataclass(eq=False)
class Skybox:
    pose: Pose
    observations: tuple[Observation, ...]  # front, left, right, back, up, down


@dataclass(eq=False)
class Scene:
    """Dense voxel occupancy over an axis-aligned box.

    Voxel (i, j, k) covers the half-open cell
    [lo + i*s, lo + (i+1)*s) x ... : a point on a shared face belongs to the
    voxel whose low face it is.
    """

    voxel_size: float
    occupancy: np.ndarray  # bool, shape (nx, ny, nz)
    bounds: Box
    scene_id: str
    feature_dim: int = 64
    feature_seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if self.occupancy.dtype != bool or self.occupancy.ndim != 3:
            raise ValueError("occupancy must be a 3-d boolean array")
        if self.feature_dim <= DIRECTION_TAG_DIM + 1:
            raise ValueError("feature_dim must exceed the depth+tag components")
        dims = np.array(self.occupancy.shape, dtype=np.float64)
        extent = np.array([self.bounds.hi.x - self.bounds.lo.x,
                           self.bounds.hi.y - self.bounds.lo.y,
                           self.bounds.hi.z - self.bounds.lo.z])
        if not np.allclose(dims * self.voxel_size, extent, rtol=0, atol=1e-6):
            raise ValueError("occupancy shape inconsistent with bounds and voxel size")
        self._projection: np.ndarray | None = None

    # -- occupancy ---------------------------------------------------------

    def voxel_index(self, p: Vec3) -> tuple[int, int, int]:
        s = self.voxel_size
        return (int(np.floor((p.x - self.bounds.lo.x) / s)),
                int(np.floor((p.y - self.bounds.lo.y) / s)),
                int(np.floor((p.z - self.bounds.lo.z) / s)))

    def is_occupied(self, p: Vec3) -> bool:
        """Solidity at a point; anything outside the bounds is solid."""
        i, j, k = self.voxel_index(p)
        nx, ny, nz = self.occupancy.shape
        if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
            return True
        return bool(self.occupancy[i, j, k])

    def _occupied_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized is_occupied for an (n, 3) array of points."""
        lo = np.array([self.bounds.lo.x, self.bounds.lo.y, self.bounds.lo.z])
        idx = np.floor((pts - lo) / self.voxel_size).astype(np.int64)
        shape = np.array(self.occupancy.shape, dtype=np.int64)
        inside = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.ones(len(pts), dtype=bool)
        if inside.any():
            ii = idx[inside]
            out[inside] = self.occupancy[ii[:, 0], ii[:, 1], ii[:, 2]]
        return out

    def segment_blocked(self, a: Vec3, b: Vec3) -> bool:
        """True when any sample along the segment lies in a solid voxel.

        Samples are spaced at most half a voxel apart and include both
        endpoints, so the check is symmetric in its arguments.
        """
        length = a.distance_to(b)
        if length == 0.0:
            return self.is_occupied(a)
        n = int(np.ceil(length / (self.voxel_size / 2.0))) + 1
        ts = np.linspace(0.0, 1.0, n)
        pa = np.array(a.as_tuple())
        pb = np.array(b.as_tuple())
        pts = pa[None, :] + ts[:, None] * (pb - pa)[None, :]
        return bool(self._occupied_many(pts).any())

    # -- observation features ----------------------------------------------

    def _projection_matrix(self) -> np.ndarray:
        """Fixed seeded +/-1 matrix shared by all views of this scene."""
        if self._projection is None:
            rng = np.random.default_rng(self.feature_seed)
            rows = self.feature_dim - DIRECTION_TAG_DIM - 1
            w = FEATURE_WINDOW ** 3
            self._projection = rng.integers(0, 2, size=(rows, w)).astype(np.float64) * 2.0 - 1.0
        return self._projection

    def _window_bits(self, center: Vec3) -> np.ndarray:
        """Occupancy of the W^3 voxel cube around a point; outside pads solid."""
        w = FEATURE_WINDOW
        r = w // 2
        ci, cj, ck = self.voxel_index(center)
        nx, ny, nz = self.occupancy.shape
        cube = np.ones((w, w, w), dtype=bool)
        i0, i1 = max(ci - r, 0), min(ci + r + 1, nx)
        j0, j1 = max(cj - r, 0), min(cj + r + 1, ny)
        k0, k1 = max(ck - r, 0), min(ck + r + 1, nz)
        if i0 < i1 and j0 < j1 and k0 < k1:
            cube[i0 - (ci - r):i1 - (ci - r),
                 j0 - (cj - r):j1 - (cj - r),
                 k0 - (ck - r):k1 - (ck - r)] = self.occupancy[i0:i1, j0:j1, k0:k1]
        return cube.ravel().astype(np.float64)

    def _free_depth(self, origin: Vec3, d: Vec3) -> float:
        """Distance to the first solid sample along a ray, over the max range."""
        spacing = self.voxel_size / 2.0
        n = int(np.floor(FEATURE_MAX_RANGE / spacing))
        ts = (np.arange(n) + 1) * spacing
        pts = np.array(origin.as_tuple())[None, :] + ts[:, None] * np.array(d.as_tuple())[None, :]
        hits = self._occupied_many(pts)
        first = np.argmax(hits) if hits.any() else None
        if first is None:
            return 1.0
        return float(ts[first] / FEATURE_MAX_RANGE)

    def view_feature(self, pose: Pose, direction: ViewDirection) -> np.ndarray:
        """Deterministic geometry digest for one view.

        Recipe: occupancy bits of a window centered one window-length ahead
        along the view axis, projected through the scene's +/-1 matrix, then a
        free-space depth component and a one-hot view tag, L2-normalized.
        """
        d = view_orientation(direction, pose.heading)
        center = pose.position + d.scaled(FEATURE_WINDOW * self.voxel_size)
        bits = self._window_bits(center)
        proj = self._projection_matrix() @ bits
        depth = self._free_depth(pose.position, d)
        tag = np.zeros(DIRECTION_TAG_DIM)
        tag[list(ViewDirection).index(direction)] = 1.0
        f = np.concatenate([proj, [depth], tag])
        return f / np.linalg.norm(f)


def get_skybox(scene: Scene, pose: Pose) -> Skybox:
    """All six view observations at a pose. Gathering them costs no actions."""
    if not scene.bounds.contains(pose.position):
        raise SceneBoundsError(f"pose {pose.position.as_tuple()} outside scene bounds")
    obs = []
    for direction in ViewDirection:
        theta, phi = VIEW_ANGLES[direction]
        obs.append(Observation(
            direction=direction,
            orientation=view_orientation(direction, pose.heading),
            feature=scene.view_feature(pose, direction),
            relative_heading=theta,
            relative_elevation=phi,
        ))
    return Skybox(pose=pose, observations=tuple(obs))


# -- synthetic cities --------------------------------------------------------

BLOCK_PITCH = 8   # voxels per city block, street included
STREET_WIDTH = 2  # voxels of street on each block's low side


def generate_city(seed: int, extent: float, building_density: float,
                  max_height: float, voxel_size: float = 5.0,
                  clearance: float = 40.0) -> Scene:
    """Deterministic Manhattan-style block city.

    Solid ground occupies one voxel layer below z = 0. Each block cell hosts a
    cuboid building with probability `building_density`; building heights are
    uniform over whole voxels in (0, max_height].
    """
    if extent <= 0 or max_height <= 0:
        raise ValueError("extent and max_height must be positive")
    if not 0.0 <= building_density <= 1.0:
        raise ValueError("building_density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = int(round(extent / voxel_size))
    max_h_vox = max(1, int(max_height // voxel_size))
    nz = 1 + max_h_vox + int(np.ceil(clearance / voxel_size))
    occ = np.zeros((n, n, nz), dtype=bool)
    occ[:, :, 0] = True  # ground layer, z in [-voxel_size, 0)

    n_blocks = n // BLOCK_PITCH
    for bx in range(n_blocks):
        for by in range(n_blocks):
            has_building = rng.random() < building_density
            # Draws below stay in lockstep regardless of placement so that
            # densities differ only where buildings appear.
            x_inset = int(rng.integers(0, 2))
            y_inset = int(rng.integers(0, 2))
            w = int(rng.integers(2, BLOCK_PITCH - STREET_WIDTH))
            h = int(rng.integers(2, BLOCK_PITCH - STREET_WIDTH))
            height = int(rng.integers(1, max_h_vox + 1))
            if not has_building:
                continue
            x0 = bx * BLOCK_PITCH + STREET_WIDTH + x_inset
            y0 = by * BLOCK_PITCH + STREET_WIDTH + y_inset
            x1 = min(x0 + w, (bx + 1) * BLOCK_PITCH)
            y1 = min(y0 + h, (by + 1) * BLOCK_PITCH)
            occ[x0:x1, y0:y1, 1:1 + height] = True

    bounds = Box(Vec3(0.0, 0.0, -voxel_size), Vec3(n * voxel_size, n * voxel_size, (nz - 1) * voxel_size))
    meta = {
        "generator": "city",
        "seed": int(seed),
        "extent": float(extent),
        "building_density": float(building_density),
        "max_height": float(max_height),
        "voxel_size": float(voxel_size),
        "clearance": float(clearance),
        "block_pitch": BLOCK_PITCH,
        "street_width": STREET_WIDTH,
    }
    scene_id = f"city-s{seed}-d{building_density:g}-e{extent:g}"
    return Scene(voxel_size=voxel_size, occupancy=occ, bounds=bounds,
                 scene_id=scene_id, meta=meta)


# -- scene files -------------------------------------------------------------
#
# Binary layout (little-endian), documented byte-for-byte in the README:
#   magic 8s | voxel_size f64 | nx ny nz u32 | bounds lo.xyz hi.xyz f64 x6
#   | feature_seed u64 | feature_dim u32 | occupancy bitset
# The bitset packs the grid row-major with x fastest, LSB-first within each
# byte. A JSON manifest sits alongside at <path>.json with the scene id and
# generator parameters.

_HEADER = struct.Struct("<8sd3I6dQI")


def save_scene(scene: Scene, path: str | FsPath) -> None:
    path = FsPath(path)
    nx, ny, nz = scene.occupancy.shape
    header = _HEADER.pack(
        SCENE_MAGIC, scene.voxel_size, nx, ny, nz,
        scene.bounds.lo.x, scene.bounds.lo.y, scene.bounds.lo.z,
        scene.bounds.hi.x, scene.bounds.hi.y, scene.bounds.hi.z,
        scene.feature_seed, scene.feature_dim,
    )
    flat = scene.occupancy.transpose(2, 1, 0).ravel()  # x fastest
    bits = np.packbits(flat, bitorder="little")
    path.write_bytes(header + bits.tobytes())
    manifest = {"scene_id": scene.scene_id, "meta": scene.meta}
    path.with_name(path.name + ".json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_scene(path: str | FsPath) -> Scene:
    path = FsPath(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: not a scene file (truncated header)")
    (magic, voxel_size, nx, ny, nz,
     lox, loy, loz, hix, hiy, hiz,
     feature_seed, feature_dim) = _HEADER.unpack_from(raw, 0)
    if magic != SCENE_MAGIC:
        raise ValueError(f"{path}: not a scene file (bad magic {magic!r})")
    n_vox = nx * ny * nz
    bits = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
    flat = np.unpackbits(bits, count=n_vox, bitorder="little").astype(bool)
    occ = flat.reshape(nz, ny, nx).transpose(2, 1, 0).copy()
    manifest_path = path.with_name(path.name + ".json")
    scene_id, meta = path.stem, {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        scene_id = manifest.get("scene_id", scene_id)
        meta = manifest.get("meta", {})
    return Scene(voxel_size=voxel_size, occupancy=occ,
                 bounds=Box(Vec3(lox, loy, loz), Vec3(hix, hiy, hiz)),
                 scene_id=scene_id, feature_dim=feature_dim,
                 feature_seed=feature_seed, meta=meta)
