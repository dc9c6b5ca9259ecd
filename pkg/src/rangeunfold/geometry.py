"""SO(3) maps, poses and azimuths.

Everything here is float64 and side-effect free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAzimuthError, InvalidArgumentError

SMALL_ANGLE = 1e-8
ORTHO_TOL = 1e-9


def hat(phi):
    """Skew-symmetric matrix such that ``hat(a) @ b == cross(a, b)``."""
    x, y, z = phi
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def check_rotation(r, tol=ORTHO_TOL):
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise InvalidArgumentError("rotation must be a finite 3x3 matrix")
    err = np.max(np.abs(r.T @ r - np.eye(3)))
    if err >= tol or abs(np.linalg.det(r) - 1.0) >= tol:
        raise InvalidArgumentError(f"matrix is not a rotation (orthonormality error {err:.3e})")
    return r


def so3_exp(phi) -> np.ndarray:
    """Rodrigues' formula, with Taylor coefficients below 1e-8 rad."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (3,) or not np.all(np.isfinite(phi)):
        raise InvalidArgumentError("rotation vector must be 3 finite numbers")
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    if theta < SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    k = hat(phi)
    return np.eye(3) + a * k + b * (k @ k)


def so3_log(r, tol=ORTHO_TOL) -> np.ndarray:
    """Inverse of :func:`so3_exp`, returning a vector with norm in [0, pi].

    Near pi the axis comes from the symmetric part of ``r``, where the
    skew part carries too little signal. At exactly pi the sign of the
    axis is arbitrary; the first non-zero component is made positive.
    """
    r = check_rotation(r, tol)
    s_vec = 0.5 * vee(r - r.T)  # sin(theta) * axis
    s = float(np.linalg.norm(s_vec))
    c = 0.5 * (np.trace(r) - 1.0)
    theta = np.arctan2(s, c)
    if theta < SMALL_ANGLE:
        return s_vec * (1.0 + theta * theta / 6.0)
    if c > -0.5:
        return s_vec * (theta / s)
    # (r + r^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T
    outer = (0.5 * (r + r.T) - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[k] / np.sqrt(outer[k, k])
    axis /= np.linalg.norm(axis)
    d = float(axis @ s_vec)
    if d < 0.0:
        axis = -axis
    elif d == 0.0:
        nz = axis[np.flatnonzero(np.abs(axis) > 1e-12)[0]]
        if nz < 0:
            axis = -axis
    return axis * theta


def rotation_angle(r) -> float:
    r = np.asarray(r, dtype=np.float64)
    s = 0.5 * np.linalg.norm(vee(r - r.T))
    c = 0.5 * (np.trace(r) - 1.0)
    return float(np.arctan2(s, c))


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.array(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.array(self.translation, dtype=np.float64).reshape(3))
        if not np.all(np.isfinite(self.translation)):
            raise InvalidArgumentError("translation must be finite")

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def apply(self, xyz):
        return np.asarray(xyz) @ self.rotation.T + self.translation


def azimuth_deg(p) -> float:
    """Horizontal angle of ``p`` in degrees, in [0, 360)."""
    x, y = float(p[0]), float(p[1])
    if x == 0.0 and y == 0.0:
        raise DegenerateAzimuthError("azimuth undefined for a point on the sensor axis")
    theta = np.arctan2(y, x) * (180.0 / np.pi)
    if theta < 0.0:
        theta += 360.0
    return 0.0 if theta >= 360.0 else float(theta)


def azimuths_deg(xyz) -> np.ndarray:
    """Vectorised :func:`azimuth_deg`; degenerate or non-finite points give NaN."""
    xyz = np.asarray(xyz, dtype=np.float64)
    x, y = xyz[:, 0], xyz[:, 1]
    with np.errstate(invalid="ignore"):
        theta = np.arctan2(y, x) * (180.0 / np.pi)
    theta[theta < 0.0] += 360.0
    theta[theta >= 360.0] = 0.0
    theta[(x == 0.0) & (y == 0.0)] = np.nan
    theta[~(np.isfinite(x) & np.isfinite(y))] = np.nan
    return theta


def fill_degenerate(theta) -> tuple[np.ndarray, int]:
    """Replace NaN azimuths with the previous point's value (0 before any valid one).

    Returns the filled array and the number of replaced entries.
    """
    theta = np.asarray(theta, dtype=np.float64)
    bad = np.isnan(theta)
    n_bad = int(bad.sum())
    if not n_bad:
        return theta, 0
    idx = np.where(bad, 0, np.arange(theta.size))
    np.maximum.accumulate(idx, out=idx)
    out = theta[idx]
    out[np.isnan(out)] = 0.0
    return out, n_bad
