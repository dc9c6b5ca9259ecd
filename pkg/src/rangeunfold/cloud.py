from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError


def _opt(a, dtype, n, name):
    if a is None:
        return None
    a = np.ascontiguousarray(a, dtype=dtype)
    if a.shape != (n,):
        raise InvalidArgumentError(f"{name} must have one entry per point ({n}), got {a.shape}")
    return a


@dataclass
class PointCloud:
    """One scan in storage order.

    ``xyz`` is (N, 3) float64. Attributes are optional per-point arrays and
    travel unchanged through every geometric transform. ``quarantine`` lists
    indices whose coordinates were not finite on read.
    """

    xyz: np.ndarray
    intensity: np.ndarray | None = None
    labels: np.ndarray | None = None
    rings: np.ndarray | None = None
    quarantine: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        xyz = np.ascontiguousarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise InvalidArgumentError(f"xyz must be (N, 3), got {xyz.shape}")
        self.xyz = xyz
        n = len(xyz)
        self.intensity = _opt(self.intensity, np.float64, n, "intensity")
        self.labels = _opt(self.labels, np.int64, n, "labels")
        self.rings = _opt(self.rings, np.int64, n, "rings")
        self.quarantine = np.asarray(self.quarantine, dtype=np.int64)

    def __len__(self):
        return len(self.xyz)

    @property
    def ranges(self) -> np.ndarray:
        x, y, z = self.xyz.T
        return np.sqrt(x * x + y * y + z * z)

    def valid_mask(self) -> np.ndarray:
        """Finite and not the (0, 0, 0) sentinel."""
        finite = np.all(np.isfinite(self.xyz), axis=1)
        return finite & np.any(self.xyz != 0.0, axis=1)

    def with_xyz(self, xyz) -> "PointCloud":
        return replace(self, xyz=xyz)
