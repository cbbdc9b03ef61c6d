"""Degeneracy-aware fusion of an external relative-pose prior.

The prior residual is weighted per axis by ``1 - confidence``: axes the scan
observes well leave the prior inert, axes it cannot observe are pinned to the
external odometry. The joint cost minimised over the current pose ``T`` is::

    sum_i a2d_i**2 * d_i(T)**2  +  sum_k w_k * e_k(T)**2

where ``e = prior (-) (T_ref^-1 T)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DegenlocError, InsufficientCorrespondences, NoConstraints
from .liegroup import PoseSE3, compose, hat, inverse, ominus, so3_left_jacobian_inv
from .observability import (
    ConfidenceCovariance,
    DegeneracyReport,
    degeneracy_report,
    label_arrays,
    label_histogram,
    point_observability,
    scan_confidence,
)
from .pointcloud import PointCloud, SpatialIndex
from .registration import (
    CorrespondenceSet,
    RegistrationConfig,
    RegistrationResult,
    alignment_matrix,
    find_correspondences,
    gauss_newton,
    planarity_weights,
)
from .trajectory import Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PriorFactor:
    """Relative motion from an external odometry source with per-axis weights.

    ``info_weights`` follow ``[roll, pitch, yaw, x, y, z]`` and multiply the
    squared residual components directly.
    """

    rel_translation: np.ndarray
    rel_rotation: np.ndarray
    info_weights: np.ndarray = field(default_factory=lambda: np.ones(6))

    def __post_init__(self):
        q = np.array(self.rel_rotation, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("prior rotation must be a unit quaternion")
        w = np.array(self.info_weights, dtype=float).reshape(6)
        if not np.all(np.isfinite(w)) or np.any((w < 0) | (w > 1)):
            raise ValueError("prior weights must lie in [0, 1]")
        object.__setattr__(self, "rel_translation", np.array(self.rel_translation, float).reshape(3))
        object.__setattr__(self, "rel_rotation", q)
        object.__setattr__(self, "info_weights", w)

    @classmethod
    def from_pose(cls, rel: PoseSE3, weights=None) -> "PriorFactor":
        return cls(rel.translation, rel.rotation, np.ones(6) if weights is None else weights)

    @property
    def pose(self) -> PoseSE3:
        return PoseSE3(self.rel_rotation, self.rel_translation)


def prior_weights(conf: ConfidenceCovariance) -> np.ndarray:
    """Information weights ``1 - confidence`` in ``[rot; trans]`` order."""
    return 1.0 - conf.vector


def prior_residual(f: PriorFactor, estimated_rel: PoseSE3) -> np.ndarray:
    return ominus(f.pose, estimated_rel)


def prior_jacobian(f: PriorFactor, pose: PoseSE3, reference: PoseSE3) -> np.ndarray:
    """Derivative of the prior residual with respect to the update of ``pose``."""
    est_rel = compose(inverse(reference), pose)
    e = prior_residual(f, est_rel)
    Rt = pose.R.T
    J = np.zeros((6, 6))
    J[:3, :3] = -so3_left_jacobian_inv(e[:3]) @ Rt
    J[3:, :3] = hat(e[3:]) @ Rt
    J[3:, 3:] = -Rt
    return J


def prior_term(f: PriorFactor, reference: PoseSE3):
    w = f.info_weights

    def term(pose: PoseSE3):
        e = prior_residual(f, compose(inverse(reference), pose))
        J = prior_jacobian(f, pose, reference)
        Jw = J * w[:, None]
        return Jw.T @ J, Jw.T @ e, float(e @ (w * e))

    return term


@dataclass(eq=False)
class FusionProblem:
    """Inputs of one joint optimisation.

    ``correspondences`` are the pairs found at ``init``. When ``source``,
    ``target`` and ``target_index`` are all given, pairs are re-associated at
    every iteration; otherwise the initial set is kept fixed.
    """

    correspondences: CorrespondenceSet
    prior: Optional[PriorFactor] = None
    init: PoseSE3 = field(default_factory=PoseSE3.identity)
    reference_pose: PoseSE3 = field(default_factory=PoseSE3.identity)
    source: Optional[PointCloud] = None
    target: Optional[PointCloud] = None
    target_index: Optional[SpatialIndex] = None
    confidence: Optional[ConfidenceCovariance] = None

    @property
    def can_recorrespond(self) -> bool:
        return self.source is not None and self.target is not None and self.target_index is not None


def _balanced_weights(cfg: RegistrationConfig, conf: ConfidenceCovariance):
    raw = conf.raw_trans if conf.raw_trans is not None else conf.trans

    def weights(pairs: CorrespondenceSet, pose: PoseSE3) -> np.ndarray:
        w = pairs.a2d**2 if cfg.weight_by_planarity else np.ones(len(pairs))
        _, trans = label_arrays(point_observability(pairs, pose))
        scale = np.ones(len(pairs))
        labelled = trans >= 3
        share = raw[trans[labelled] - 3]
        scale[labelled] = np.where(share > 0, 1.0 / np.maximum(share, 1e-12), 1.0)
        return w * scale

    return weights


def joint_optimize(problem: FusionProblem, cfg: RegistrationConfig = RegistrationConfig()) -> RegistrationResult:
    has_pairs = len(problem.correspondences) > 0 or problem.can_recorrespond
    if not has_pairs and problem.prior is None:
        raise NoConstraints("no correspondences and no prior")

    first = [problem.correspondences]

    def correspond(pose: PoseSE3) -> CorrespondenceSet:
        if first:
            return first.pop()
        return find_correspondences(
            problem.source, problem.target_index, problem.target, pose, cfg.max_dist
        )

    terms = ()
    if problem.prior is not None:
        terms = (prior_term(problem.prior, problem.reference_pose),)

    if cfg.balance_axes and problem.confidence is not None:
        icp_weights = _balanced_weights(cfg, problem.confidence)
    else:
        icp_weights = planarity_weights(cfg)

    return gauss_newton(
        problem.init,
        correspond,
        cfg,
        extra_terms=terms,
        icp_weights=icp_weights,
        recorrespond=problem.can_recorrespond,
    )


@dataclass
class ScanReport:
    timestamp: float
    status: str = "ok"
    confidence: Optional[ConfidenceCovariance] = None
    degeneracy: Optional[DegeneracyReport] = None
    min_eigenvalue: float = float("nan")
    iterations: int = 0
    final_error: float = float("nan")
    converged: bool = False
    correspondences: int = 0
    prior_used: bool = False
    # world-frame matched points and their translational labels, for observability exports
    observed_points: Optional[np.ndarray] = None
    observed_labels: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class LocalizationRun:
    trajectory: Trajectory
    reports: list

    @property
    def failures(self) -> int:
        return sum(1 for r in self.reports if not r.ok)


PriorSource = Union[None, Sequence[Optional[PoseSE3]], Mapping[float, PoseSE3]]


def _prior_at(priors: PriorSource, i: int, stamp: float) -> Optional[PoseSE3]:
    if priors is None:
        return None
    if isinstance(priors, Mapping):
        return priors.get(stamp)
    return priors[i] if i < len(priors) else None


def localize_scan(
    map_cloud: PointCloud,
    map_index: SpatialIndex,
    scan: PointCloud,
    previous: PoseSE3,
    prior_rel: Optional[PoseSE3],
    cfg: RegistrationConfig,
    report: ScanReport,
    init: Optional[PoseSE3] = None,
) -> PoseSE3:
    """One pipeline step: correspond, risk, confidence, weights, optimise.

    Fills ``report`` in place and returns the optimised pose.
    """
    if init is None:
        init = compose(previous, prior_rel) if prior_rel is not None else previous
    pairs = find_correspondences(scan, map_index, map_cloud, init, cfg.max_dist)
    align = alignment_matrix(pairs, init)
    hist, _, trans_labels = label_histogram(pairs, init)
    conf = scan_confidence(hist)
    report.confidence = conf
    report.degeneracy = degeneracy_report(align, conf)
    report.min_eigenvalue = align.min_eigenvalue
    report.observed_points = pairs.source @ init.R.T + init.translation
    report.observed_labels = trans_labels

    prior = None
    if prior_rel is not None:
        prior = PriorFactor.from_pose(prior_rel, prior_weights(conf))
        report.prior_used = True
    problem = FusionProblem(
        pairs,
        prior,
        init=init,
        reference_pose=previous,
        source=scan,
        target=map_cloud,
        target_index=map_index,
        confidence=conf,
    )
    if len(pairs) < 6:
        raise InsufficientCorrespondences(len(pairs))
    result = joint_optimize(problem, cfg)
    report.iterations = result.iterations
    report.final_error = result.final_error
    report.converged = result.converged
    report.correspondences = result.correspondences_used
    return result.pose


def run_localization(
    map_cloud: PointCloud,
    scans: Sequence,
    priors: PriorSource = None,
    cfg: RegistrationConfig = RegistrationConfig(),
    map_index: Optional[SpatialIndex] = None,
    initial_pose: Optional[PoseSE3] = None,
    use_prior: bool = True,
) -> LocalizationRun:
    """Localise a time-ordered scan sequence against a map.

    ``scans`` is a sequence of ``(timestamp, cloud)``; a ``None`` cloud marks a
    scan that could not be read. ``priors`` gives the relative motion ending at
    each scan, either aligned by position or keyed by timestamp. Scans that
    fail keep the predicted pose and the run continues.
    """
    if map_cloud.normals is None or map_cloud.planarity is None:
        raise ValueError("map needs normals and planarity; run estimate_normals first")
    map_index = map_index if map_index is not None else SpatialIndex(map_cloud)
    previous = initial_pose if initial_pose is not None else PoseSE3.identity()
    stamps, poses, reports = [], [], []
    for i, (stamp, scan) in enumerate(scans):
        rel = _prior_at(priors, i, stamp) if (use_prior and i > 0) else None
        report = ScanReport(timestamp=float(stamp))
        predicted = compose(previous, rel) if rel is not None else previous
        if scan is None:
            report.status = "skipped: unreadable scan"
            pose = predicted
        else:
            try:
                pose = localize_scan(map_cloud, map_index, scan, previous, rel, cfg, report)
            except DegenlocError as exc:
                report.status = f"failed: {exc}"
                pose = predicted
        if not report.ok:
            log.warning("scan %d (t=%.3f) %s", i, stamp, report.status)
        stamps.append(float(stamp))
        poses.append(pose)
        reports.append(report)
        previous = pose
    return LocalizationRun(Trajectory(stamps, poses), reports)
