"""Synthetic degenerate worlds, trajectories and a point-sampling scan simulator.

Every generator is a pure function of its spec and seed. Maps carry analytic
normals (facing the interior) with planarity 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .liegroup import PoseSE3, compose, inverse
from .pointcloud import PointCloud, SpatialIndex
from .trajectory import Trajectory

__all__ = [
    "SceneKind",
    "SceneSpec",
    "SensorModel",
    "Trajectory",
    "generate_map",
    "straight_trajectory",
    "simulate_scan",
    "simulate_sequence",
    "relative_motions",
    "noisy_priors",
    "SyntheticRun",
    "derive_seeds",
    "synthesize",
]


class SceneKind(str, Enum):
    CORRIDOR = "corridor"
    TUNNEL = "tunnel"
    PLANE = "plane"
    ROOM = "room"
    STAIRCASE = "staircase"


REQUIRED_DIMENSIONS = {
    SceneKind.CORRIDOR: ("length", "width", "height"),
    SceneKind.TUNNEL: ("length", "radius"),
    SceneKind.PLANE: ("size_x", "size_y"),
    SceneKind.ROOM: ("length", "width", "height"),
    SceneKind.STAIRCASE: ("steps", "step_depth", "step_height", "width"),
}


@dataclass(frozen=True)
class SceneSpec:
    """Geometry of a synthetic world.

    Dimensions per kind (metres unless noted):

    * corridor: ``length`` along +x from 0, ``width`` across y (centred),
      ``height`` up from the floor at z = 0. Walls, floor and ceiling; open ends.
    * tunnel: cylinder wall of ``radius`` around the x axis, ``length`` along +x.
    * plane: ``size_x`` by ``size_y`` patch of z = 0 centred on the origin.
    * room: closed box, ``length`` (x) by ``width`` (y) centred on the origin,
      floor at z = 0 and ceiling at ``height``.
    * staircase: ``steps`` (count) treads and risers climbing along +x, each
      ``step_depth`` deep and ``step_height`` tall, ``width`` across y.
    """

    kind: SceneKind
    dimensions: dict = field(default_factory=dict)
    density: float = 100.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        kind = SceneKind(self.kind)
        object.__setattr__(self, "kind", kind)
        dims = dict(self.dimensions)
        for key in REQUIRED_DIMENSIONS[kind]:
            if key not in dims:
                raise ValueError(f"scene '{kind.value}' is missing dimension '{key}'")
            if not float(dims[key]) > 0:
                raise ValueError(f"dimension '{key}' must be positive")
        object.__setattr__(self, "dimensions", dims)
        if not self.density > 0:
            raise ValueError("density must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class SensorModel:
    max_range: float = 30.0
    rays: int = 4000
    vertical_fov: float = 180.0
    horizontal_fov: float = 360.0
    range_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")
        if self.rays < 1:
            raise ValueError("rays must be at least 1")


def _rect(rng, density, origin, u, v, normal):
    """Uniform samples on the parallelogram ``origin + a u + b v``, a, b in [0, 1]."""
    u, v = np.asarray(u, float), np.asarray(v, float)
    area = float(np.linalg.norm(np.cross(u, v)))
    n = int(round(area * density))
    ab = rng.random((n, 2))
    pts = np.asarray(origin, float) + ab[:, :1] * u + ab[:, 1:] * v
    return pts, np.tile(np.asarray(normal, float), (n, 1))


def _surfaces(spec: SceneSpec, rng):
    d = {k: float(v) for k, v in spec.dimensions.items()}
    rho = spec.density
    kind = spec.kind
    if kind is SceneKind.PLANE:
        sx, sy = d["size_x"], d["size_y"]
        yield _rect(rng, rho, (-sx / 2, -sy / 2, 0), (sx, 0, 0), (0, sy, 0), (0, 0, 1))
    elif kind in (SceneKind.CORRIDOR, SceneKind.ROOM):
        L, W, H = d["length"], d["width"], d["height"]
        x0 = 0.0 if kind is SceneKind.CORRIDOR else -L / 2
        yield _rect(rng, rho, (x0, -W / 2, 0), (L, 0, 0), (0, 0, H), (0, 1, 0))
        yield _rect(rng, rho, (x0, W / 2, 0), (L, 0, 0), (0, 0, H), (0, -1, 0))
        yield _rect(rng, rho, (x0, -W / 2, 0), (L, 0, 0), (0, W, 0), (0, 0, 1))
        yield _rect(rng, rho, (x0, -W / 2, H), (L, 0, 0), (0, W, 0), (0, 0, -1))
        if kind is SceneKind.ROOM:
            yield _rect(rng, rho, (x0, -W / 2, 0), (0, W, 0), (0, 0, H), (1, 0, 0))
            yield _rect(rng, rho, (x0 + L, -W / 2, 0), (0, W, 0), (0, 0, H), (-1, 0, 0))
    elif kind is SceneKind.TUNNEL:
        L, r = d["length"], d["radius"]
        n = int(round(2 * np.pi * r * L * rho))
        x = rng.random(n) * L
        theta = rng.random(n) * 2 * np.pi
        radial = np.column_stack([np.zeros(n), np.cos(theta), np.sin(theta)])
        yield np.column_stack([x, r * radial[:, 1], r * radial[:, 2]]), -radial
    elif kind is SceneKind.STAIRCASE:
        steps = int(d["steps"])
        depth, rise, W = d["step_depth"], d["step_height"], d["width"]
        for k in range(steps):
            yield _rect(rng, rho, (k * depth, -W / 2, k * rise), (0, 0, rise), (0, W, 0), (-1, 0, 0))
            yield _rect(rng, rho, (k * depth, -W / 2, (k + 1) * rise), (depth, 0, 0), (0, W, 0), (0, 0, 1))


def generate_map(spec: SceneSpec, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    parts = list(_surfaces(spec, rng))
    pts = np.concatenate([p for p, _ in parts]) if parts else np.zeros((0, 3))
    normals = np.concatenate([n for _, n in parts]) if parts else np.zeros((0, 3))
    if spec.noise_sigma > 0 and len(pts):
        pts = pts + normals * rng.normal(0.0, spec.noise_sigma, size=(len(pts), 1))
    return PointCloud(pts, normals, np.ones(len(pts)), frame_id="map")


def straight_trajectory(
    start: PoseSE3,
    velocity,
    duration: float,
    rate: float,
    t0: float = 0.0,
) -> Trajectory:
    """Constant-velocity poses sampled at ``rate`` Hz over ``duration`` seconds, both ends included."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    n = int(np.floor(duration * rate + 1e-9)) + 1
    k = np.arange(n)
    dt = k / rate
    v = np.asarray(velocity, dtype=float)
    poses = [PoseSE3(start.rotation, start.translation + v * s) for s in dt]
    return Trajectory(t0 + dt, poses)


def simulate_scan(
    map_cloud: PointCloud,
    map_index: SpatialIndex,
    pose: PoseSE3,
    sensor: SensorModel,
) -> PointCloud:
    """Points of the map visible from ``pose``, expressed in the sensor frame.

    Visibility is range and field of view only (no occlusion). Range noise is
    applied along each ray and the result is subsampled to ``sensor.rays``
    points, both driven by ``sensor.seed``.
    """
    rng = np.random.default_rng(sensor.seed)
    if np.isfinite(sensor.max_range):
        ids = np.sort(map_index.within(pose.translation, sensor.max_range))
    else:
        ids = np.arange(len(map_cloud))
    local = (map_cloud.points[ids] - pose.translation) @ pose.R
    if sensor.horizontal_fov < 360.0 and len(local):
        az = np.degrees(np.arctan2(local[:, 1], local[:, 0]))
        local = local[np.abs(az) <= sensor.horizontal_fov / 2]
    if sensor.vertical_fov < 180.0 and len(local):
        el = np.degrees(np.arctan2(local[:, 2], np.hypot(local[:, 0], local[:, 1])))
        local = local[np.abs(el) <= sensor.vertical_fov / 2]
    if len(local) > sensor.rays:
        keep = np.sort(rng.choice(len(local), size=sensor.rays, replace=False))
        local = local[keep]
    if sensor.range_noise_sigma > 0 and len(local):
        r = np.linalg.norm(local, axis=1)
        noise = rng.normal(0.0, sensor.range_noise_sigma, size=len(local))
        scale = np.where(r > 0, (r + noise) / np.where(r > 0, r, 1.0), 1.0)
        local = local * scale[:, None]
    return PointCloud(local, frame_id="sensor")


def simulate_sequence(
    map_cloud: PointCloud,
    map_index: SpatialIndex,
    trajectory: Trajectory,
    sensor: SensorModel,
) -> list:
    """One scan per trajectory pose; scan ``k`` uses seed ``sensor.seed + k``."""
    return [
        (t, simulate_scan(map_cloud, map_index, pose, replace(sensor, seed=sensor.seed + k)))
        for k, (t, pose) in enumerate(trajectory)
    ]


def relative_motions(trajectory: Trajectory) -> list:
    """``T_{k-1}^-1 T_k`` for each pose; the first entry is ``None``."""
    poses = trajectory.poses
    return [None] + [compose(inverse(a), b) for a, b in zip(poses[:-1], poses[1:])]


def noisy_priors(
    trajectory: Trajectory,
    sigma: float,
    seed: int,
    rot_sigma: float = 0.0,
) -> list:
    """Ground-truth relative motion with zero-mean Gaussian noise.

    ``sigma`` (m) perturbs each translation component and ``rot_sigma`` (rad)
    each rotation-vector component.
    """
    rng = np.random.default_rng(seed)
    out: list[Optional[PoseSE3]] = [None]
    for rel in relative_motions(trajectory)[1:]:
        dt = rng.normal(0.0, sigma, 3) if sigma > 0 else np.zeros(3)
        dr = rng.normal(0.0, rot_sigma, 3) if rot_sigma > 0 else np.zeros(3)
        noisy = compose(rel, PoseSE3.from_rotvec(dr))
        out.append(PoseSE3(noisy.rotation, rel.translation + dt))
    return out



@dataclass
class SyntheticRun:
    """Everything one synthetic experiment needs, generated from a single seed."""

    map_cloud: PointCloud
    map_index: SpatialIndex
    trajectory: Trajectory
    scans: list  # (timestamp, PointCloud)
    priors: list  # relative poses, first entry None


def derive_seeds(seed: int) -> tuple[int, int, int]:
    """Independent integer seeds for the map, the sensor and the prior noise."""
    a, b, c = np.random.SeedSequence(seed).generate_state(3)
    return int(a), int(b), int(c)


def synthesize(
    spec: SceneSpec,
    sensor: SensorModel,
    trajectory: Trajectory,
    prior_sigma: float,
    seed: int,
    prior_rot_sigma: float = 0.0,
) -> SyntheticRun:
    """Map, scans and noisy relative-motion priors along ``trajectory``.

    ``sensor.seed`` is replaced by a seed derived from ``seed``.
    """
    map_seed, sensor_seed, prior_seed = derive_seeds(seed)
    map_cloud = generate_map(spec, map_seed)
    index = SpatialIndex(map_cloud)
    scans = simulate_sequence(map_cloud, index, trajectory, replace(sensor, seed=sensor_seed))
    priors = noisy_priors(trajectory, prior_sigma, prior_seed, prior_rot_sigma)
    return SyntheticRun(map_cloud, index, trajectory, scans, priors)
