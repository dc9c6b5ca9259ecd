"""Ring indices for scans stored laser after laser without a ring field."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .cloud import PointCloud
from .errors import EmptyInputError, InvalidArgumentError, UnrepairableRingsError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_DEG = 1.0
MAX_RINGS = 64
MAX_PER_RING = 2180


@dataclass
class RingAssignment:
    rings: np.ndarray

    def __post_init__(self):
        self.rings = np.ascontiguousarray(self.rings, dtype=np.int64)

    @property
    def num_rings(self) -> int:
        return int(self.rings.max()) + 1 if self.rings.size else 0

    @property
    def points_per_ring(self) -> np.ndarray:
        return np.bincount(self.rings, minlength=self.num_rings)


@dataclass
class RingValidationReport:
    max_ring_ok: bool
    max_per_line_ok: bool
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.max_ring_ok and self.max_per_line_ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_ring_ok": self.max_ring_ok,
            "max_per_line_ok": self.max_per_line_ok,
            "violations": [list(v) for v in self.violations],
        }


def generate_ring_indices(cloud: PointCloud, threshold_t: float = DEFAULT_THRESHOLD_DEG) -> RingAssignment:
    """Walk the points in storage order; open a new ring whenever the azimuth
    decreases or jumps by more than ``threshold_t`` degrees.

    Points on the sensor axis inherit the previous point's azimuth.
    """
    if len(cloud) == 0:
        raise EmptyInputError("cannot generate rings for an empty cloud")
    if not threshold_t > 0:
        raise InvalidArgumentError("threshold_t must be positive")
    theta, n_bad = _backend.kernels().azimuths_filled(cloud.xyz)
    if n_bad:
        log.warning("%d points with undefined azimuth inherit the previous azimuth", n_bad)
    rings = _backend.kernels().ring_fold(theta, float(threshold_t))
    return RingAssignment(rings)


def validate_ring_indices(
    assignment: RingAssignment, max_rings: int = MAX_RINGS, max_per_ring: int = MAX_PER_RING
) -> RingValidationReport:
    """Check the ring count and the per-ring point count. Never raises."""
    violations = []
    num = assignment.num_rings
    max_ring_ok = num <= max_rings
    if not max_ring_ok:
        violations.append(("max_rings", num - 1, None))
    hist = assignment.points_per_ring
    over = np.flatnonzero(hist > max_per_ring)
    for ring in over:
        violations.append(("max_per_ring", int(ring), int(hist[ring])))
    return RingValidationReport(max_ring_ok, over.size == 0, violations)


def repair_trailing_noise(assignment: RingAssignment, max_rings: int = MAX_RINGS,
                          max_tail: int | None = None) -> RingAssignment:
    """Clamp overflow rings at the very end of the scan onto the last legal ring.

    Overflow anywhere but a contiguous tail means the assignment is wrong,
    not noisy, and is refused. So is a tail longer than ``max_tail`` points.
    """
    rings = assignment.rings
    over = rings >= max_rings
    if not over.any():
        return RingAssignment(rings.copy())
    first = int(np.argmax(over))
    if not over[first:].all():
        raise UnrepairableRingsError(
            f"ring overflow at point {first} is not confined to the tail of the scan"
        )
    if max_tail is not None and rings.size - first > max_tail:
        raise UnrepairableRingsError(
            f"{rings.size - first} overflow points exceed the repair limit of {max_tail}"
        )
    fixed = rings.copy()
    fixed[first:] = max_rings - 1
    log.warning("clamped %d trailing points to ring %d", rings.size - first, max_rings - 1)
    return RingAssignment(fixed)
