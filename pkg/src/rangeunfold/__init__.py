"""LiDAR range-image preprocessing.

Ring-index recovery, constant-velocity re-skewing, scan-unfolding and
spherical projection with a point-to-pixel look-up table, range-dependent
KNN hole filling, and the metrics that score them, backed by a synthetic
rotating-LiDAR simulator for ground truth.
"""
__version__ = "0.1.0"

from .cloud import PointCloud
from .errors import (
    AmbiguousAxisError,
    CorruptedLUTError,
    DegenerateAzimuthError,
    EmptyInputError,
    FormatError,
    InvalidArgumentError,
    InvariantViolation,
    RangeUnfoldError,
    UnrepairableRingsError,
)
from .geometry import Pose, azimuth_deg, so3_exp, so3_log
from .interpolation import FillReport, KnniConfig, knni, nla_postprocess
from .metrics import ConfusionMatrix, IouReport, SkewMse, compute_miou, kept_ratio, skew_mse, upper_bound_miou
from .motion import (
    VelocityEstimate,
    deskew_scan,
    estimate_velocities,
    predict_relative_pose,
    relative_timestamps,
    skew_scan,
)
from .projection import (
    Channel,
    LookUpTable,
    ProjectionResult,
    ProjectorConfig,
    RangeImage,
    project,
    project_scan_unfolding,
    project_spherical,
    unproject_labels,
)
from .ring_index import (
    RingAssignment,
    RingValidationReport,
    generate_ring_indices,
    repair_trailing_noise,
    validate_ring_indices,
)
