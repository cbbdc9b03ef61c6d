"""Trajectory and map accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NoAssociations
from .liegroup import PoseSE3, apply
from .pointcloud import PointCloud, SpatialIndex, concatenate, voxel_downsample
from .trajectory import Trajectory

DEFAULT_OUTLIER_THRESHOLD = 0.10
DEFAULT_MAP_LEAF = 0.05


@dataclass
class AteResult:
    rmse: float
    mean: float
    median: float
    max: float
    errors: np.ndarray
    aligned: bool
    alignment: Optional[PoseSE3] = None


@dataclass
class MapQualityResult:
    inlier_fraction: float
    outlier_fraction: float
    threshold: float
    points_evaluated: int


def associate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02) -> list[tuple[PoseSE3, PoseSE3]]:
    """Pair each estimated pose with the nearest unused ground-truth stamp within ``max_dt``.

    Candidate pairs are taken greedily in order of increasing time offset, so
    the result does not depend on the order of either input.
    """
    if len(est) == 0 or len(gt) == 0:
        raise NoAssociations("both trajectories must be non-empty")
    te, tg = est.timestamps, gt.timestamps
    cands = []
    for i, t in enumerate(te):
        lo = np.searchsorted(tg, t - max_dt, side="left")
        hi = np.searchsorted(tg, t + max_dt, side="right")
        for j in range(lo, hi):
            cands.append((abs(tg[j] - t), i, j))
    cands.sort()
    used_e, used_g, pairs = set(), set(), []
    for _, i, j in cands:
        if i in used_e or j in used_g:
            continue
        used_e.add(i)
        used_g.add(j)
        pairs.append((i, j))
    if not pairs:
        raise NoAssociations(f"no timestamps agree within {max_dt} s")
    pairs.sort()
    return [(est.poses[i], gt.poses[j]) for i, j in pairs]


def rigid_alignment(src: np.ndarray, dst: np.ndarray) -> PoseSE3:
    """Least-squares rotation and translation mapping ``src`` rows onto ``dst`` rows (no scale)."""
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    cov = (dst - mu_d).T @ (src - mu_s) / len(src)
    U, _, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    return PoseSE3.from_rt(R, mu_d - R @ mu_s)


def ate(pairs: Sequence[tuple[PoseSE3, PoseSE3]], align: bool = True) -> AteResult:
    """Translational RMSE between ``(estimate, ground_truth)`` pose pairs."""
    if len(pairs) < 2:
        raise ValueError("ATE needs at least two associated poses")
    est = np.array([e.translation for e, _ in pairs])
    gt = np.array([g.translation for _, g in pairs])
    T = None
    if align:
        T = rigid_alignment(est, gt)
        est = apply(T, est)
    err = np.linalg.norm(est - gt, axis=1)
    return AteResult(
        rmse=float(np.sqrt(np.mean(err**2))),
        mean=float(err.mean()),
        median=float(np.median(err)),
        max=float(err.max()),
        errors=err,
        aligned=align,
        alignment=T,
    )


def map_outlier_rate(
    built: PointCloud,
    gt_map_index: SpatialIndex,
    threshold: float = DEFAULT_OUTLIER_THRESHOLD,
) -> MapQualityResult:
    """Share of built-map points farther than ``threshold`` from every ground-truth point."""
    if len(built) == 0:
        raise ValueError("built map is empty")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    _, d = gt_map_index.nearest(built.points)
    outliers = int(np.count_nonzero(d > threshold))
    n = len(built)
    return MapQualityResult(1.0 - outliers / n, outliers / n, threshold, n)


def build_map(scans: Sequence[Optional[PointCloud]], poses: Sequence[PoseSE3], leaf: float = DEFAULT_MAP_LEAF) -> PointCloud:
    """Union of scans placed at ``poses``, voxel-downsampled at ``leaf``."""
    placed = [s.transformed(p) for s, p in zip(scans, poses) if s is not None and len(s)]
    cloud = concatenate(placed)
    if leaf and len(cloud):
        cloud = voxel_downsample(cloud, leaf)
    return cloud
