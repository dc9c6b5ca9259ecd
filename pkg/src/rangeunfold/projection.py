"""Range-image projection (scan unfolding and spherical) and label back-projection."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _backend
from .cloud import PointCloud
from .errors import CorruptedLUTError, InvalidArgumentError
from .ring_index import RingAssignment

log = logging.getLogger(__name__)

SP_FOV_UP = 3.0
SP_FOV_DOWN = -25.0


class Channel(IntEnum):
    RANGE = 0
    X = 1
    Y = 2
    Z = 3
    INTENSITY = 4
    MASK = 5
    LABEL = 6
    FILLED = 7  # set by hole filling


ALL_CHANNELS = tuple(Channel)
VALUE_CHANNELS = (Channel.RANGE, Channel.X, Channel.Y, Channel.Z, Channel.INTENSITY)


class RangeImage:
    """H x W grid with one float64 plane per channel.

    Pixels with mask 0 hold zeros in every channel.
    """

    def __init__(self, data, channels=ALL_CHANNELS):
        data = np.ascontiguousarray(data, dtype=np.float64)
        channels = tuple(int(c) for c in channels)
        if data.ndim != 3 or data.shape[2] != len(channels):
            raise InvalidArgumentError("image data must be (H, W, C) with one id per channel")
        if len(set(channels)) != len(channels):
            raise InvalidArgumentError("duplicate channel ids")
        self.data = data
        self.channels = channels
        self._pos = {c: i for i, c in enumerate(channels)}

    @classmethod
    def empty(cls, height, width, channels=ALL_CHANNELS):
        return cls(np.zeros((height, width, len(channels))), channels)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape[:2]

    def has(self, channel) -> bool:
        return int(channel) in self._pos

    def __getitem__(self, channel) -> np.ndarray:
        try:
            return self.data[:, :, self._pos[int(channel)]]
        except KeyError:
            raise InvalidArgumentError(f"image has no channel {channel!r}") from None

    def __setitem__(self, channel, plane):
        self[channel][...] = plane

    @property
    def mask(self) -> np.ndarray:
        return self[Channel.MASK] > 0.5

    def copy(self) -> "RangeImage":
        return RangeImage(self.data.copy(), self.channels)

    def __eq__(self, other):
        return (
            isinstance(other, RangeImage)
            and self.channels == other.channels
            and np.array_equal(self.data, other.data)
        )


@dataclass(eq=False)
class LookUpTable:
    """Pixel of every input point, including points hidden behind a nearer one."""

    point_index: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.point_index = np.ascontiguousarray(self.point_index, dtype=np.int64)
        self.v = np.ascontiguousarray(self.v, dtype=np.int64)
        self.u = np.ascontiguousarray(self.u, dtype=np.int64)
        if not (self.point_index.shape == self.v.shape == self.u.shape) or self.v.ndim != 1:
            raise InvalidArgumentError("LUT rows must be equal-length vectors")

    def __len__(self):
        return self.v.size

    def __eq__(self, other):
        return (
            isinstance(other, LookUpTable)
            and np.array_equal(self.point_index, other.point_index)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.u, other.u)
        )

    def check_bounds(self, height, width):
        bad = (self.v < 0) | (self.v >= height) | (self.u < 0) | (self.u >= width)
        if bad.any():
            i = int(np.argmax(bad))
            raise CorruptedLUTError(
                f"LUT entry {i} points at ({self.v[i]}, {self.u[i]}) outside a {height}x{width} image"
            )
        if self.point_index.size and (
            self.point_index.min() < 0 or self.point_index.max() >= self.point_index.size
        ):
            raise CorruptedLUTError("LUT point index out of range")

    def pixel_of_points(self):
        """(v, u) ordered by point index."""
        v = np.empty_like(self.v)
        u = np.empty_like(self.u)
        v[self.point_index] = self.v
        u[self.point_index] = self.u
        return v, u


@dataclass
class ProjectionResult:
    image: RangeImage
    lut: LookUpTable
    owner: np.ndarray  # flat H*W, point index kept at each pixel or -1

    @property
    def kept_count(self) -> int:
        return int(np.count_nonzero(self.owner >= 0))


@dataclass(frozen=True)
class ProjectorConfig:
    method: str = "su++"
    width: int = 2048
    height: int = 64
    fov_up: float = SP_FOV_UP
    fov_down: float = SP_FOV_DOWN

    def __post_init__(self):
        if self.method not in ("su++", "sp"):
            raise InvalidArgumentError(f"unknown projection method {self.method!r}")
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("image size must be positive")


def _columns(cloud, width):
    theta, _ = _backend.kernels().azimuths_filled(cloud.xyz)
    u = np.floor(theta / 360.0 * width).astype(np.int64)
    np.clip(u, 0, width - 1, out=u)
    return u


def _rasterize(cloud, v, u, height, width) -> ProjectionResult:
    owner, data = _backend.kernels().rasterize(cloud.xyz, cloud.intensity, cloud.labels, v, u, height, width)
    lut = LookUpTable(np.arange(len(cloud)), v, u)
    return ProjectionResult(RangeImage(data, ALL_CHANNELS), lut, owner)


def project_scan_unfolding(cloud: PointCloud, rings: RingAssignment, width: int, height: int | None = None) -> ProjectionResult:
    """One image row per laser ring, column from azimuth.

    Colliding points keep the nearest one (lowest index on exact ties);
    invalid points are left out of the image but stay in the LUT.
    """
    if width < 1:
        raise InvalidArgumentError("width must be >= 1")
    if rings.rings.shape != (len(cloud),):
        raise InvalidArgumentError("ring assignment length differs from the cloud")
    h = rings.num_rings if height is None else int(height)
    if rings.num_rings > h:
        raise InvalidArgumentError(f"{rings.num_rings} rings do not fit an image of height {h}")
    if rings.rings.size and rings.rings.min() < 0:
        raise InvalidArgumentError("negative ring index")
    u = _columns(cloud, width)
    return _rasterize(cloud, rings.rings.copy(), u, h, width)


def project_spherical(cloud: PointCloud, height: int, width: int, fov_up: float = SP_FOV_UP,
                      fov_down: float = SP_FOV_DOWN) -> ProjectionResult:
    """Row from elevation angle over a fixed vertical field of view."""
    if not fov_up > fov_down:
        raise InvalidArgumentError("fov_up must exceed fov_down")
    if height < 1 or width < 1:
        raise InvalidArgumentError("image size must be positive")
    rng = cloud.ranges
    zero = ~(rng > 0)
    if zero.any():
        log.warning("%d zero-range points skipped by spherical projection", int(zero.sum()))
    with np.errstate(invalid="ignore", divide="ignore"):
        elev = np.degrees(np.arcsin(np.clip(cloud.xyz[:, 2] / rng, -1.0, 1.0)))
    elev[zero | ~np.isfinite(elev)] = 0.0
    frac = 1.0 - (elev - fov_down) / (fov_up - fov_down)
    v = np.floor(frac * height).astype(np.int64)
    np.clip(v, 0, height - 1, out=v)
    u = _columns(cloud, width)
    return _rasterize(cloud, v, u, height, width)


def project(cloud: PointCloud, config: ProjectorConfig, rings: RingAssignment | None = None) -> ProjectionResult:
    if config.method == "sp":
        return project_spherical(cloud, config.height, config.width, config.fov_up, config.fov_down)
    if rings is None:
        raise InvalidArgumentError("scan unfolding needs ring indices")
    return project_scan_unfolding(cloud, rings, config.width, config.height)


def unproject_labels(label_image: RangeImage, lut: LookUpTable) -> np.ndarray:
    """Per-point labels read through the LUT, ordered by point index."""
    lut.check_bounds(label_image.height, label_image.width)
    labels = np.rint(label_image[Channel.LABEL]).astype(np.int64)
    out = np.empty(len(lut), dtype=np.int64)
    out[lut.point_index] = labels[lut.v, lut.u]
    return out
