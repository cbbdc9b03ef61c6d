from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .liegroup import PoseSE3


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped poses with strictly increasing timestamps (seconds)."""

    timestamps: np.ndarray
    poses: tuple[PoseSE3, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=float).reshape(-1)
        poses = tuple(self.poses)
        if len(ts) != len(poses):
            raise ValueError(f"{len(ts)} timestamps for {len(poses)} poses")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "poses", poses)

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self):
        return iter(zip(self.timestamps, self.poses))

    @property
    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.zeros((0, 3))
        return np.array([p.translation for p in self.poses])
