"""TOML run configuration.

A run either synthesises a world (``[scene]`` plus ``[trajectory]``) or reads
recorded data (``[input]``), never both. Example::

    seed = 0

    [scene]
    kind = "corridor"
    density = 200
    noise_sigma = 0.01
    [scene.dimensions]
    length = 50.0
    width = 2.0
    height = 3.0

    [sensor]
    max_range = 15.0
    rays = 2000

    [trajectory]
    start = [5.0, 0.0, 1.5]
    start_rpy = [0.0, 0.0, 0.0]
    velocity = [1.0, 0.0, 0.0]
    duration = 10.0
    rate = 10.0

    [prior]
    sigma = 0.01

    [registration]
    max_dist = 0.5

    [output]
    obs_every = 10
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .liegroup import PoseSE3
from .registration import RegistrationConfig
from .scenes import SceneSpec, SensorModel, straight_trajectory
from .trajectory import Trajectory


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class TrajectorySpec:
    start: tuple = (0.0, 0.0, 0.0)
    start_rpy: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (1.0, 0.0, 0.0)
    duration: float = 10.0
    rate: float = 10.0

    def build(self) -> Trajectory:
        start = PoseSE3.from_xyz_rpy(*self.start, *self.start_rpy)
        return straight_trajectory(start, self.velocity, self.duration, self.rate)


@dataclass(frozen=True)
class InputSpec:
    """Recorded data: a map, a directory of scans and optional priors / ground truth."""

    scans: Path
    map: Path
    priors: Optional[Path] = None
    ground_truth: Optional[Path] = None


@dataclass(frozen=True)
class RunConfig:
    scene: Optional[SceneSpec] = None
    input: Optional[InputSpec] = None
    sensor: SensorModel = field(default_factory=SensorModel)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)
    prior_sigma: float = 0.0
    prior_rot_sigma: float = 0.0
    prior_path: Optional[Path] = None
    output_dir: Path = Path("out")
    obs_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if (self.scene is None) == (self.input is None):
            raise ConfigError("exactly one of [scene] and [input] must be given")
        if self.prior_sigma < 0 or self.prior_rot_sigma < 0:
            raise ConfigError("prior noise must be non-negative")
        if self.obs_every < 0:
            raise ConfigError("obs_every must be >= 0")


def _build(cls, table: dict, section: str, **extra):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {', '.join(sorted(unknown))}")
    try:
        return cls(**table, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def _path(base: Path, value) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def parse_config(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Build a :class:`RunConfig` from an already-parsed TOML document."""
    data = dict(data)
    scene = None
    if "scene" in data:
        table = dict(data.pop("scene"))
        if "kind" not in table:
            raise ConfigError("[scene] is missing field 'kind'")
        if "dimensions" not in table:
            raise ConfigError("[scene] is missing field 'dimensions'")
        scene = _build(SceneSpec, table, "scene")

    inp = None
    if "input" in data:
        table = dict(data.pop("input"))
        for key in ("scans", "map"):
            if key not in table:
                raise ConfigError(f"[input] is missing field '{key}'")
        table = {k: _path(base_dir, v) for k, v in table.items()}
        inp = _build(InputSpec, table, "input")

    sensor = _build(SensorModel, dict(data.pop("sensor", {})), "sensor")
    traj_table = {k: tuple(v) if isinstance(v, list) else v for k, v in data.pop("trajectory", {}).items()}
    trajectory = _build(TrajectorySpec, traj_table, "trajectory")
    registration = _build(RegistrationConfig, dict(data.pop("registration", {})), "registration")

    prior = dict(data.pop("prior", {}))
    prior_sigma = float(prior.pop("sigma", 0.0))
    prior_rot_sigma = float(prior.pop("rot_sigma", 0.0))
    prior_path = _path(base_dir, prior.pop("path", None))
    if prior:
        raise ConfigError(f"[prior] has unknown keys: {', '.join(sorted(prior))}")

    output = dict(data.pop("output", {}))
    out_dir = _path(base_dir, output.pop("dir", "out"))
    obs_every = int(output.pop("obs_every", 10))
    if output:
        raise ConfigError(f"[output] has unknown keys: {', '.join(sorted(output))}")

    seed = int(data.pop("seed", 0))
    if data:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(data))}")
    try:
        return RunConfig(
            scene=scene,
            input=inp,
            sensor=sensor,
            trajectory=trajectory,
            registration=registration,
            prior_sigma=prior_sigma,
            prior_rot_sigma=prior_rot_sigma,
            prior_path=prior_path,
            output_dir=out_dir,
            obs_every=obs_every,
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    """Read a TOML run configuration; relative paths resolve against its directory."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path.parent)

