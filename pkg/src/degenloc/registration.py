"""Point-to-plane ICP on SE(3) and the pre-optimisation alignment matrix.

Residual of one pair under pose ``T = (R, t)``::

    d = (R p + t - q) . n

Its Jacobian with respect to the tangent increment ``[dr; dt]`` (see
:mod:`degenloc.liegroup` for the update rule) is the row ``[(R p) x n ; n]``.
The alignment matrix is the Gram matrix of these rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InsufficientCorrespondences, MissingNormals
from .liegroup import PoseSE3, apply, retract
from .pointcloud import PointCloud, SpatialIndex

log = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 6
AXIS_NAMES = ("roll", "pitch", "yaw", "x", "y", "z")


@dataclass(frozen=True)
class RegistrationConfig:
    max_iterations: int = 30
    step_tol: float = 1e-6
    max_dist: float = 1.0
    cond_limit: float = 1e8
    weight_by_planarity: bool = True
    # rescale ICP residuals so each translational label group carries equal total weight
    balance_axes: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.step_tol <= 0 or self.cond_limit <= 1:
            raise ValueError("step_tol must be > 0 and cond_limit > 1")
        if self.max_dist < 0:
            raise ValueError("max_dist must be >= 0")


@dataclass(frozen=True, eq=False)
class Correspondence:
    """One source point paired with a target point and its plane normal."""

    source: np.ndarray
    target: np.ndarray
    normal: np.ndarray
    a2d: float = 1.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-6:
            raise ValueError("correspondence normal must be unit length")
        if not 0.0 <= self.a2d <= 1.0:
            raise ValueError("planarity must lie in [0, 1]")
        object.__setattr__(self, "source", np.asarray(self.source, dtype=float).reshape(3))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(3))
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Batch of correspondences stored column-wise.

    ``source`` stays in the source frame; ``target`` and ``normal`` live in the target frame.
    """

    source: np.ndarray
    target: np.ndarray
    normal: np.ndarray
    a2d: np.ndarray
    source_ids: Optional[np.ndarray] = None
    target_ids: Optional[np.ndarray] = None

    @classmethod
    def empty(cls) -> "CorrespondenceSet":
        z = np.zeros((0, 3))
        return cls(z, z, z, np.zeros(0), np.zeros(0, np.intp), np.zeros(0, np.intp))

    @classmethod
    def from_list(cls, items) -> "CorrespondenceSet":
        items = list(items)
        if not items:
            return cls.empty()
        return cls(
            np.array([c.source for c in items]),
            np.array([c.target for c in items]),
            np.array([c.normal for c in items]),
            np.array([c.a2d for c in items], dtype=float),
        )

    def __len__(self) -> int:
        return len(self.source)

    def __getitem__(self, i) -> Correspondence:
        return Correspondence(self.source[i], self.target[i], self.normal[i], float(self.a2d[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def repeated(self, times: int) -> "CorrespondenceSet":
        def rep(a):
            return None if a is None else np.concatenate([a] * times)

        return CorrespondenceSet(
            rep(self.source), rep(self.target), rep(self.normal), rep(self.a2d), rep(self.source_ids), rep(self.target_ids)
        )


Pairs = Union[Correspondence, CorrespondenceSet]


@dataclass(frozen=True, eq=False)
class AlignmentMatrix:
    """6x6 constraint Gram matrix, rows/cols ``[rot_x, rot_y, rot_z, x, y, z]``."""

    m: np.ndarray

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and matching unit eigenvectors (columns)."""
        return np.linalg.eigh(self.m)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.m)[0])

    @property
    def weakest_direction(self) -> np.ndarray:
        return self.eig()[1][:, 0]

    def rank(self, rtol: float = 1e-9) -> int:
        ev = np.linalg.eigvalsh(self.m)
        return int(np.sum(ev > rtol * max(ev[-1], 1e-300)))


@dataclass
class RegistrationResult:
    pose: PoseSE3
    final_error: float
    iterations: int
    converged: bool
    alignment: AlignmentMatrix
    correspondences_used: int
    damped_iterations: int = 0
    error_history: list = field(default_factory=list)
    last_step_norm: float = float("nan")


def find_correspondences(
    source: PointCloud,
    target_index: SpatialIndex,
    target: PointCloud,
    pose: PoseSE3,
    max_dist: float,
) -> CorrespondenceSet:
    """Nearest target point for every posed source point within ``max_dist``."""
    if target.normals is None or target.planarity is None:
        raise MissingNormals("target cloud needs normals and planarity")
    if len(source) == 0:
        return CorrespondenceSet.empty()
    moved = apply(pose, source.points)
    tid, _ = target_index.nearest(moved, max_dist)
    keep = tid >= 0
    keep[keep] = target.valid_normals[tid[keep]]
    sid = np.flatnonzero(keep)
    tid = tid[keep]
    return CorrespondenceSet(
        source.points[sid],
        target.points[tid],
        target.normals[tid],
        target.planarity[tid],
        sid,
        tid,
    )


def point_plane_residual(c: Pairs, pose: PoseSE3):
    """Signed point-to-plane distance (m); vectorised over a :class:`CorrespondenceSet`."""
    diff = apply(pose, c.source) - c.target
    return np.einsum("...i,...i->...", diff, c.normal)


def residual_jacobian(c: Pairs, pose: PoseSE3) -> np.ndarray:
    """Row(s) ``[(R p) x n ; n]`` of the residual derivative, shape ``(6,)`` or ``(N, 6)``."""
    rp = np.asarray(c.source, dtype=float) @ pose.R.T
    return np.concatenate([np.cross(rp, c.normal), np.asarray(c.normal, dtype=float)], axis=-1)


def alignment_matrix(correspondences: Pairs, pose: PoseSE3) -> AlignmentMatrix:
    if isinstance(correspondences, Correspondence):
        correspondences = CorrespondenceSet.from_list([correspondences])
    elif not isinstance(correspondences, CorrespondenceSet):
        correspondences = CorrespondenceSet.from_list(correspondences)
    if len(correspondences) == 0:
        return AlignmentMatrix(np.zeros((6, 6)))
    J = residual_jacobian(correspondences, pose)
    return AlignmentMatrix(J.T @ J)


def icp_error(c: CorrespondenceSet, pose: PoseSE3) -> float:
    """Unweighted sum of squared point-to-plane distances (m^2)."""
    r = point_plane_residual(c, pose)
    return float(r @ r)


def solve_normal_equations(H: np.ndarray, g: np.ndarray, cond_limit: float) -> tuple[np.ndarray, bool]:
    """Solve ``H d = -g``; adds Levenberg damping when ``H`` is ill-conditioned.

    Returns the step and whether damping was applied.
    """
    ev = np.linalg.eigvalsh(H)
    damped = ev[0] <= 0 or ev[-1] / ev[0] > cond_limit
    if damped:
        lam = 1e-6 * np.trace(H) / 6.0
        if lam <= 0:
            lam = 1e-12
        H = H + lam * np.eye(6)
    return np.linalg.solve(H, -g), damped


# A term contributes (H, g, cost) at a pose: H = J^T W J, g = J^T W r, cost = r^T W r.
Term = Callable[[PoseSE3], tuple]


def gauss_newton(
    pose: PoseSE3,
    correspond: Callable[[PoseSE3], CorrespondenceSet],
    cfg: RegistrationConfig,
    extra_terms: tuple = (),
    icp_weights: Optional[Callable[[CorrespondenceSet, PoseSE3], np.ndarray]] = None,
    recorrespond: bool = True,
) -> RegistrationResult:
    """Shared Gauss-Newton loop for plain ICP and prior-augmented problems.

    ``correspond`` maps a pose to the pairs used at that iteration. With
    ``recorrespond=False`` the first set is reused throughout.
    """
    pairs = correspond(pose)
    alignment = alignment_matrix(pairs, pose)
    if len(pairs) < MIN_CORRESPONDENCES and not extra_terms:
        raise InsufficientCorrespondences(len(pairs))

    damped_count = 0
    history = []
    converged = False
    step_norm = float("nan")
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if it > 1 and recorrespond:
            pairs = correspond(pose)
            if len(pairs) < MIN_CORRESPONDENCES and not extra_terms:
                raise InsufficientCorrespondences(len(pairs))
        H = np.zeros((6, 6))
        g = np.zeros(6)
        cost = 0.0
        if len(pairs):
            r = point_plane_residual(pairs, pose)
            J = residual_jacobian(pairs, pose)
            w = icp_weights(pairs, pose) if icp_weights is not None else np.ones(len(pairs))
            Jw = J * w[:, None]
            H += Jw.T @ J
            g += Jw.T @ r
            cost += float(r @ (w * r))
        for term in extra_terms:
            Ht, gt, ct = term(pose)
            H += Ht
            g += gt
            cost += ct
        history.append(cost)
        delta, damped = solve_normal_equations(H, g, cfg.cond_limit)
        if damped:
            damped_count += 1
            log.debug("iteration %d: ill-conditioned normal equations, damping applied", it)
        pose = retract(pose, delta)
        step_norm = float(np.linalg.norm(delta))
        if step_norm < cfg.step_tol:
            converged = True
            break

    final_error = icp_error(pairs, pose) if len(pairs) else 0.0
    return RegistrationResult(
        pose=pose,
        final_error=final_error,
        iterations=it,
        converged=converged,
        alignment=alignment,
        correspondences_used=len(pairs),
        damped_iterations=damped_count,
        error_history=history,
        last_step_norm=step_norm,
    )


def planarity_weights(cfg: RegistrationConfig) -> Optional[Callable]:
    if not cfg.weight_by_planarity:
        return None
    return lambda pairs, pose: pairs.a2d**2


def solve_registration(
    source: PointCloud,
    target: PointCloud,
    target_index: SpatialIndex,
    init: PoseSE3,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> RegistrationResult:
    """Align ``source`` onto ``target`` starting from ``init``.

    Each iteration re-associates nearest neighbours, builds the 6x6 normal
    equations with per-pair weight ``a2d**2`` and applies the step. The
    returned alignment matrix is the one seen at ``init``.
    """
    if target.normals is None or target.planarity is None:
        raise MissingNormals("target cloud needs normals and planarity")

    def correspond(pose):
        return find_correspondences(source, target_index, target, pose, cfg.max_dist)

    return gauss_newton(init, correspond, cfg, icp_weights=planarity_weights(cfg))
