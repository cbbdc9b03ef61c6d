"""Per-correspondence observability, label statistics and scan confidence.

For each pair the six scores are::

    a2d**2 * [|c.X|, |c.Y|, |c.Z|, |n.X|, |n.Y|, |n.Z|],   c = (T_init p) x n

with the world axes X, Y, Z. The first three score roll/pitch/yaw, the last
three x/y/z. Every pair votes once for its strongest rotational axis and once
for its strongest translational axis; label counts are normalised per group
so that a uniform spread gives confidence 1 on every axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .errors import LengthMismatch
from .liegroup import PoseSE3, apply
from .pointcloud import PointCloud
from .registration import AXIS_NAMES, AlignmentMatrix, CorrespondenceSet

NO_LABEL = -1
DEFAULT_REPORT_THRESHOLD = 0.5


class DofLabel(IntEnum):
    ROLL = 0
    PITCH = 1
    YAW = 2
    X = 3
    Y = 4
    Z = 5

    @property
    def is_rotation(self) -> bool:
        return self < 3

    @property
    def axis_name(self) -> str:
        return AXIS_NAMES[self]


ROTATION_LABELS = (DofLabel.ROLL, DofLabel.PITCH, DofLabel.YAW)
TRANSLATION_LABELS = (DofLabel.X, DofLabel.Y, DofLabel.Z)

LABEL_COLORS = {
    DofLabel.X: (255, 0, 0),
    DofLabel.Y: (0, 255, 0),
    DofLabel.Z: (0, 0, 255),
}
UNLABELED_COLOR = (128, 128, 128)


def point_observability(c, t_init: PoseSE3) -> np.ndarray:
    """Observability scores ``[roll, pitch, yaw, x, y, z]`` of one or many pairs.

    Accepts a :class:`Correspondence` (returns shape ``(6,)``) or a
    :class:`CorrespondenceSet` (returns ``(N, 6)``). Normals are taken to be in
    the world frame already, as produced by matching against a world-frame map.
    """
    p_world = apply(t_init, c.source)
    n = np.asarray(c.normal, dtype=float)
    lever = np.cross(p_world, n)
    a2 = np.asarray(c.a2d, dtype=float) ** 2
    scores = np.abs(np.concatenate([lever, n], axis=-1))
    return scores * np.expand_dims(a2, -1)


def assign_labels(obs) -> tuple[Optional[DofLabel], Optional[DofLabel]]:
    """Dominant rotational and translational axis of a single score vector.

    Ties go to the earlier axis (roll < pitch < yaw, x < y < z). A group whose
    scores are all zero gets ``None``.
    """
    obs = np.asarray(obs, dtype=float).reshape(6)
    rot = DofLabel(int(np.argmax(obs[:3]))) if np.any(obs[:3] > 0) else None
    trans = DofLabel(3 + int(np.argmax(obs[3:]))) if np.any(obs[3:] > 0) else None
    return rot, trans


def label_arrays(obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`assign_labels`; missing labels are ``NO_LABEL``."""
    obs = np.asarray(obs, dtype=float).reshape(-1, 6)
    rot = np.argmax(obs[:, :3], axis=1)
    trans = 3 + np.argmax(obs[:, 3:], axis=1)
    rot = np.where(np.any(obs[:, :3] > 0, axis=1), rot, NO_LABEL)
    trans = np.where(np.any(obs[:, 3:] > 0, axis=1), trans, NO_LABEL)
    return rot, trans


@dataclass(frozen=True, eq=False)
class LabelHistogram:
    counts: np.ndarray  # int64[6] in DofLabel order

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(6)
        if np.any(c < 0):
            raise ValueError("label counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_labels(cls, rot_labels, trans_labels) -> "LabelHistogram":
        labels = np.concatenate([np.asarray(rot_labels).ravel(), np.asarray(trans_labels).ravel()])
        labels = labels[labels != NO_LABEL].astype(np.int64)
        return cls(np.bincount(labels, minlength=6))

    @property
    def total_rot(self) -> int:
        return int(self.counts[:3].sum())

    @property
    def total_trans(self) -> int:
        return int(self.counts[3:].sum())

    def __getitem__(self, label: DofLabel) -> int:
        return int(self.counts[int(label)])


def label_histogram(correspondences: CorrespondenceSet, t_init: PoseSE3) -> tuple[LabelHistogram, np.ndarray, np.ndarray]:
    """Histogram plus the per-pair rotational and translational labels."""
    if len(correspondences) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return LabelHistogram(np.zeros(6)), empty, empty
    obs = point_observability(correspondences, t_init)
    rot, trans = label_arrays(obs)
    return LabelHistogram.from_labels(rot, trans), rot, trans


@dataclass(frozen=True, eq=False)
class ConfidenceCovariance:
    """Per-axis confidence in [0, 1]; 1 means well observed."""

    trans: np.ndarray
    rot: np.ndarray
    raw_trans: Optional[np.ndarray] = None
    raw_rot: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("trans", "rot", "raw_trans", "raw_rot"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.array(v, dtype=float).reshape(3)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for v in (self.trans, self.rot):
            if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
                raise ValueError("confidence entries must lie in [0, 1]")

    @classmethod
    def uniform(cls, value: float = 1.0) -> "ConfidenceCovariance":
        return cls(np.full(3, value), np.full(3, value))

    @property
    def vector(self) -> np.ndarray:
        """Six entries in ``[roll, pitch, yaw, x, y, z]`` order."""
        return np.concatenate([self.rot, self.trans])

    @property
    def as_diagonal(self) -> np.ndarray:
        return np.diag(self.vector)

    def as_dict(self) -> dict:
        return {f"conf_{name}": float(v) for name, v in zip(AXIS_NAMES, self.vector)}


def _group_confidence(counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    if total == 0:
        return np.zeros(3)
    return 3.0 * counts / total


def scan_confidence(hist: LabelHistogram) -> ConfidenceCovariance:
    """Normalised label fractions ``3 N_axis / N_group``, clamped to [0, 1]."""
    raw_rot = _group_confidence(hist.counts[:3])
    raw_trans = _group_confidence(hist.counts[3:])
    return ConfidenceCovariance(
        trans=np.minimum(raw_trans, 1.0),
        rot=np.minimum(raw_rot, 1.0),
        raw_trans=raw_trans,
        raw_rot=raw_rot,
    )


def observability_scan(cloud: PointCloud, labels: Sequence) -> PointCloud:
    """Copy of ``cloud`` coloured by translational label: x red, y green, z blue.

    ``labels`` holds one entry per point: either a ``(rot, trans)`` pair, a bare
    translational label, or ``None``/``NO_LABEL`` for unlabelled points.
    """
    labels = list(labels) if not isinstance(labels, np.ndarray) else labels
    if len(labels) != len(cloud):
        raise LengthMismatch(f"{len(labels)} labels for {len(cloud)} points")
    colors = np.empty((len(cloud), 3), dtype=np.uint8)
    colors[:] = UNLABELED_COLOR
    for i, lab in enumerate(labels):
        if isinstance(lab, tuple):
            lab = lab[1]
        if lab is None or int(lab) == NO_LABEL:
            continue
        lab = DofLabel(int(lab))
        if lab in LABEL_COLORS:
            colors[i] = LABEL_COLORS[lab]
    return PointCloud(cloud.points, cloud.normals, cloud.planarity, colors, cloud.frame_id)


@dataclass
class DegeneracyReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    confidence: ConfidenceCovariance
    low_confidence: list  # axis names, in [roll, pitch, yaw, x, y, z] order
    threshold: float

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigenvectors": [[float(v) for v in col] for col in self.eigenvectors.T],
            "confidence": self.confidence.as_dict(),
            "low_confidence": list(self.low_confidence),
            "threshold": self.threshold,
        }


def degeneracy_report(
    alignment: AlignmentMatrix,
    conf: ConfidenceCovariance,
    threshold: float = DEFAULT_REPORT_THRESHOLD,
) -> DegeneracyReport:
    """Eigen-analysis of the alignment matrix alongside the per-axis confidence.

    Axes whose confidence falls below ``threshold`` are listed; the list is for
    reporting only and does not steer the estimator.
    """
    evals, evecs = alignment.eig()
    low = [name for name, v in zip(AXIS_NAMES, conf.vector) if v < threshold]
    return DegeneracyReport(evals, evecs, conf, low, threshold)
