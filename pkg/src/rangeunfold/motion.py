"""Constant-velocity motion model.

Velocities are expressed per scan period, so a point's relative timestamp
is a revolution fraction in [0, 1] and the per-point motion is simply
``alpha * phi`` and ``alpha * v``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _backend
from .cloud import PointCloud
from .errors import AmbiguousAxisError, EmptyInputError, InvalidArgumentError
from .geometry import Pose, rotation_angle, so3_log

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VelocityEstimate:
    phi: np.ndarray  # rad / scan
    v: np.ndarray  # m / scan

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.float64).reshape(3)
        v = np.array(self.v, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(v))):
            raise InvalidArgumentError("velocities must be finite")
        if np.linalg.norm(phi) >= np.pi:
            raise InvalidArgumentError("angular velocity must stay below pi rad per scan")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "v", v)

    @classmethod
    def zero(cls) -> "VelocityEstimate":
        return cls(np.zeros(3), np.zeros(3))

    def to_dict(self) -> dict:
        return {"phi": self.phi.tolist(), "v": self.v.tolist()}


def predict_relative_pose(pose_prev2: Pose, pose_prev1: Pose) -> Pose:
    """Motion between the two previous scans, expressed in the older scan's frame."""
    rt = pose_prev2.rotation.T
    return Pose(rt @ pose_prev1.rotation, rt @ (pose_prev1.translation - pose_prev2.translation))


def estimate_velocities(relative: Pose) -> VelocityEstimate:
    if abs(rotation_angle(relative.rotation) - np.pi) < 1e-9:
        raise AmbiguousAxisError("relative rotation of pi has no unique rotation vector")
    return VelocityEstimate(so3_log(relative.rotation), relative.translation.copy())


def relative_timestamps(cloud: PointCloud) -> np.ndarray:
    """Revolution fraction of each point from its azimuth."""
    if len(cloud) == 0:
        raise EmptyInputError("cannot timestamp an empty cloud")
    theta, n_bad = _backend.kernels().azimuths_filled(cloud.xyz)
    if n_bad:
        log.warning("%d points with undefined azimuth inherit the previous timestamp", n_bad)
    return theta / 360.0


def _check(cloud, alpha):
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    if alpha.shape != (len(cloud),):
        raise InvalidArgumentError(f"alpha has {alpha.size} entries for {len(cloud)} points")
    return alpha


def skew_scan(cloud: PointCloud, vel: VelocityEstimate, alpha) -> PointCloud:
    """Move motion-compensated points back to where the sensor saw them:
    ``p* = Exp(alpha*phi)^-1 (p - alpha*v)``."""
    alpha = _check(cloud, alpha)
    out = _backend.kernels().skew_points(cloud.xyz, alpha, vel.phi, vel.v, False)
    return cloud.with_xyz(out)


def deskew_scan(cloud: PointCloud, vel: VelocityEstimate, alpha) -> PointCloud:
    """Inverse of :func:`skew_scan` for the same ``alpha``."""
    alpha = _check(cloud, alpha)
    out = _backend.kernels().skew_points(cloud.xyz, alpha, vel.phi, vel.v, True)
    return cloud.with_xyz(out)
