"""Degeneracy-aware LiDAR registration and prior-fused localization."""

from .errors import (
    DegenlocError,
    EmptyCloud,
    InsufficientCorrespondences,
    InvalidEigenvalues,
    LengthMismatch,
    MalformedFile,
    MissingNormals,
    NoAssociations,
    NoConstraints,
    UnsupportedFormat,
)
from .evaluation import AteResult, MapQualityResult, associate, ate, build_map, map_outlier_rate
from .fusion import (
    FusionProblem,
    LocalizationRun,
    PriorFactor,
    ScanReport,
    joint_optimize,
    prior_weights,
    run_localization,
)
from .liegroup import PoseSE3, TangentVector, apply, compose, inverse, local_coordinates, ominus, retract
from .observability import (
    ConfidenceCovariance,
    DegeneracyReport,
    DofLabel,
    LabelHistogram,
    assign_labels,
    degeneracy_report,
    label_histogram,
    observability_scan,
    point_observability,
    scan_confidence,
)
from .pointcloud import PointCloud, SpatialIndex, build_index, estimate_normals, k_nearest, planarity_scalar
from .registration import (
    AlignmentMatrix,
    Correspondence,
    CorrespondenceSet,
    RegistrationConfig,
    RegistrationResult,
    alignment_matrix,
    find_correspondences,
    point_plane_residual,
    residual_jacobian,
    solve_registration,
)
from .scenes import SceneKind, SceneSpec, SensorModel, generate_map, simulate_scan, simulate_sequence, straight_trajectory
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "AlignmentMatrix",
    "AteResult",
    "ConfidenceCovariance",
    "Correspondence",
    "CorrespondenceSet",
    "DegeneracyReport",
    "DegenlocError",
    "DofLabel",
    "EmptyCloud",
    "FusionProblem",
    "InsufficientCorrespondences",
    "InvalidEigenvalues",
    "LabelHistogram",
    "LengthMismatch",
    "LocalizationRun",
    "MalformedFile",
    "MapQualityResult",
    "MissingNormals",
    "NoAssociations",
    "NoConstraints",
    "PointCloud",
    "PoseSE3",
    "PriorFactor",
    "RegistrationConfig",
    "RegistrationResult",
    "ScanReport",
    "SceneKind",
    "SceneSpec",
    "SensorModel",
    "SpatialIndex",
    "TangentVector",
    "Trajectory",
    "UnsupportedFormat",
    "alignment_matrix",
    "apply",
    "assign_labels",
    "associate",
    "ate",
    "build_index",
    "build_map",
    "compose",
    "degeneracy_report",
    "estimate_normals",
    "find_correspondences",
    "generate_map",
    "inverse",
    "joint_optimize",
    "k_nearest",
    "label_histogram",
    "local_coordinates",
    "map_outlier_rate",
    "observability_scan",
    "ominus",
    "planarity_scalar",
    "point_observability",
    "point_plane_residual",
    "prior_weights",
    "residual_jacobian",
    "retract",
    "run_localization",
    "scan_confidence",
    "simulate_scan",
    "simulate_sequence",
    "solve_registration",
    "straight_trajectory",
]
