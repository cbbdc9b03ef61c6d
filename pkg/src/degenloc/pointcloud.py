"""Point-cloud container, exact nearest-neighbour index and PCA features."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, InvalidEigenvalues

DEFAULT_NORMAL_K = 10
# neighbourhoods whose largest singular value is below this are treated as coincident points
DEGENERATE_SIGMA = 1e-9


def _readonly(a, dtype=float, shape=None):
    if a is None:
        return None
    a = np.array(a, dtype=dtype)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Immutable point set with optional per-point normals, planarity and colour.

    Normals that could not be estimated are stored as NaN rows; ``valid_normals``
    masks them out. Colours are ``uint8`` RGB.
    """

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    planarity: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None
    frame_id: str = "map"

    def __post_init__(self):
        pts = _readonly(self.points, shape=(-1, 3))
        n = len(pts)
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            normals = _readonly(self.normals, shape=(-1, 3))
            if len(normals) != n:
                raise ValueError(f"{len(normals)} normals for {n} points")
            object.__setattr__(self, "normals", normals)
        if self.planarity is not None:
            planarity = _readonly(self.planarity, shape=(-1,))
            if len(planarity) != n:
                raise ValueError(f"{len(planarity)} planarity values for {n} points")
            if np.any((planarity < 0) | (planarity > 1)):
                raise ValueError("planarity must lie in [0, 1]")
            object.__setattr__(self, "planarity", planarity)
        if self.colors is not None:
            colors = _readonly(self.colors, dtype=np.uint8, shape=(-1, 3))
            if len(colors) != n:
                raise ValueError(f"{len(colors)} colours for {n} points")
            object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    @cached_property
    def valid_normals(self) -> np.ndarray:
        """Boolean mask of points carrying a usable normal."""
        if self.normals is None:
            ok = np.zeros(len(self), dtype=bool)
        else:
            ok = np.all(np.isfinite(self.normals), axis=1)
            if self.planarity is not None:
                ok &= self.planarity > 0
        ok.setflags(write=False)
        return ok

    def transformed(self, pose) -> "PointCloud":
        """Copy with points (and normals) mapped through ``pose``."""
        pts = self.points @ pose.R.T + pose.translation
        normals = None if self.normals is None else self.normals @ pose.R.T
        return replace(self, points=pts, normals=normals)

    def select(self, mask_or_index) -> "PointCloud":
        def pick(a):
            return None if a is None else a[mask_or_index]

        return PointCloud(
            self.points[mask_or_index],
            pick(self.normals),
            pick(self.planarity),
            pick(self.colors),
            self.frame_id,
        )


class SpatialIndex:
    """Exact KD-tree over a fixed cloud."""

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise EmptyCloud("cannot index an empty cloud")
        self.cloud = cloud
        self._tree = cKDTree(cloud.points)

    def __len__(self) -> int:
        return len(self.cloud)

    def nearest(self, queries, max_dist: float = np.inf):
        """Nearest indexed point for each query row.

        Returns ``(ids, dists)``; queries with no neighbour within ``max_dist``
        (inclusive) get id ``-1`` and distance ``inf``.
        """
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        if len(queries) == 0:
            return np.zeros(0, dtype=np.intp), np.zeros(0)
        # slack keeps the tree's strict bound from dropping exact-radius hits; trimmed below
        bound = max_dist * (1.0 + 1e-9) + 1e-150 if np.isfinite(max_dist) else np.inf
        dists, ids = self._tree.query(queries, k=1, distance_upper_bound=bound, workers=-1)
        miss = ~(dists <= max_dist)
        ids = np.where(miss, -1, ids)
        dists = np.where(miss, np.inf, dists)
        return ids, dists

    def query(self, queries, k: int):
        """``k`` nearest neighbours per query, ``(dists, ids)`` shaped ``(M, k)``."""
        queries = np.asarray(queries, dtype=float).reshape(-1, 3)
        k = min(k, len(self))
        dists, ids = self._tree.query(queries, k=k, workers=-1)
        return np.asarray(dists).reshape(len(queries), k), np.asarray(ids).reshape(len(queries), k)

    def within(self, center, radius: float) -> np.ndarray:
        return np.asarray(self._tree.query_ball_point(np.asarray(center, float), radius), dtype=np.intp)


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def k_nearest(index: SpatialIndex, query, k: int) -> list[tuple[int, float]]:
    """The ``k`` closest points as ``(id, distance)`` pairs in ascending distance."""
    if k < 1:
        raise ValueError("k must be at least 1")
    dists, ids = index.query(query, k)
    return [(int(i), float(d)) for i, d in zip(ids[0], dists[0])]


def planarity_scalar(sigma1: float, sigma2: float, sigma3: float) -> float:
    """Planarity ``(s2 - s3) / s1`` for ordered PCA singular values."""
    if not (sigma1 >= sigma2 >= sigma3 >= 0.0) or sigma1 <= 0.0:
        raise InvalidEigenvalues(
            f"need sigma1 >= sigma2 >= sigma3 >= 0 and sigma1 > 0, got {(sigma1, sigma2, sigma3)}"
        )
    return (sigma2 - sigma3) / sigma1


def estimate_normals(
    cloud: PointCloud,
    k: int = DEFAULT_NORMAL_K,
    viewpoint=(0.0, 0.0, 0.0),
    index: Optional[SpatialIndex] = None,
) -> PointCloud:
    """PCA normals and planarity over the ``k`` nearest neighbours of each point.

    The normal is the direction of least spread, flipped to face ``viewpoint``.
    Singular values of the centred neighbourhood (standard deviations, not
    variances) give the planarity. Neighbourhoods of coincident points get a
    NaN normal and planarity 0.
    """
    if k < 3:
        raise ValueError("neighbourhood size must be at least 3")
    if len(cloud) < k:
        raise ValueError(f"cloud has {len(cloud)} points, fewer than k={k}")
    index = index if index is not None else SpatialIndex(cloud)
    _, nbr = index.query(cloud.points, k)
    hood = cloud.points[nbr]
    hood = hood - hood.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", hood, hood) / k
    evals, evecs = np.linalg.eigh(cov)
    # eigh sorts ascending: column 0 is the normal direction
    sig = np.sqrt(np.clip(evals[:, ::-1], 0.0, None))
    normals = evecs[:, :, 0].copy()

    degenerate = sig[:, 0] <= DEGENERATE_SIGMA
    s1 = np.where(degenerate, 1.0, sig[:, 0])
    planarity = np.clip((sig[:, 1] - sig[:, 2]) / s1, 0.0, 1.0)
    planarity[degenerate] = 0.0

    to_view = np.asarray(viewpoint, dtype=float) - cloud.points
    flip = np.einsum("ij,ij->i", normals, to_view) < 0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    normals[degenerate] = np.nan
    return replace(cloud, normals=normals, planarity=planarity)


def voxel_downsample(cloud: PointCloud, leaf: float) -> PointCloud:
    """One centroid per occupied voxel of edge ``leaf``.

    Normals, when present, are averaged and renormalised; planarity and colour
    are dropped.
    """
    if leaf <= 0:
        raise ValueError("leaf size must be positive")
    if len(cloud) == 0:
        return PointCloud(np.zeros((0, 3)), frame_id=cloud.frame_id)
    keys = np.floor(cloud.points / leaf).astype(np.int64)
    keys -= keys.min(axis=0)
    span = keys.max(axis=0) + 1
    flat = np.ravel_multi_index(keys.T, span) if np.prod(span.astype(float)) < 2**62 else None
    if flat is None:
        _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    else:
        _, inverse, counts = np.unique(flat, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    m = len(counts)
    centroids = np.zeros((m, 3))
    np.add.at(centroids, inverse, cloud.points)
    centroids /= counts[:, None]
    normals = None
    if cloud.normals is not None:
        normals = np.zeros((m, 3))
        np.add.at(normals, inverse, np.nan_to_num(cloud.normals))
        norm = np.linalg.norm(normals, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = np.where(norm > 0, normals / norm, np.nan)
    return PointCloud(centroids, normals, frame_id=cloud.frame_id)


def concatenate(clouds, frame_id: str = "map") -> PointCloud:
    clouds = list(clouds)
    if not clouds:
        return PointCloud(np.zeros((0, 3)), frame_id=frame_id)
    pts = np.concatenate([c.points for c in clouds])
    return PointCloud(pts, frame_id=frame_id)
