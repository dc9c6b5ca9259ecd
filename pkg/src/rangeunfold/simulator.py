"""Synthetic rotating LiDAR with exact ground truth.

Rays are fired laser by laser (all samples of the top laser first),
sample ``j`` at azimuth ``(j + 0.5) / S * 360`` and time fraction
``alpha = (j + 0.5) / S``, from the sensor pose ``(Exp(alpha*phi), alpha*v)``
relative to the scan start. Azimuths sit mid-column so every sample owns
exactly one column of an S-wide image.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud
from .errors import InvalidArgumentError
from .geometry import Pose, so3_exp
from .motion import VelocityEstimate

EPS = 1e-9

GROUND, BUILDING, CAR, POLE = 1, 2, 3, 4
CLASS_NAMES = {0: "unlabeled", GROUND: "ground", BUILDING: "building", CAR: "car", POLE: "pole"}
NUM_CLASSES = 5


@dataclass(frozen=True)
class SensorModel:
    vertical_angles: tuple  # degrees, top laser first
    samples_per_rev: int = 2048
    max_range: float = 120.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        angles = tuple(float(a) for a in self.vertical_angles)
        object.__setattr__(self, "vertical_angles", angles)
        if len(angles) < 1 or np.any(np.diff(angles) >= 0):
            raise InvalidArgumentError("vertical angles must be strictly decreasing")
        if self.samples_per_rev < 1:
            raise InvalidArgumentError("samples_per_rev must be >= 1")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise InvalidArgumentError("dropout_prob must lie in [0, 1)")
        if not self.max_range > 0:
            raise InvalidArgumentError("max_range must be positive")

    @property
    def num_lasers(self) -> int:
        return len(self.vertical_angles)

    def with_dropout(self, p) -> "SensorModel":
        return SensorModel(self.vertical_angles, self.samples_per_rev, self.max_range, p)


def make_kitti_like_sensor(dropout_prob: float = 0.0) -> SensorModel:
    """64 lasers in two banks: 32 at 1/3 deg pitch from +2 deg, 32 at 1/2 deg
    pitch ending at -24.8 deg; 2048 samples per revolution."""
    top = 2.0 - np.arange(32) / 3.0
    bottom = -9.3 - 0.5 * np.arange(32)
    return SensorModel(tuple(np.concatenate([top, bottom])), 2048, 120.0, dropout_prob)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    label: int

    def __post_init__(self):
        if self.radius < 0:
            raise InvalidArgumentError("sphere radius must be non-negative")


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    label: int

    def __post_init__(self):
        if np.any(np.asarray(self.lo, float) > np.asarray(self.hi, float)):
            raise InvalidArgumentError("box bounds must satisfy lo <= hi")


@dataclass(frozen=True)
class Scene:
    ground_z: float | None = None
    ground_label: int = GROUND
    spheres: tuple = ()
    boxes: tuple = ()

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        try:
            return cls(
                d.get("ground_z"),
                int(d.get("ground_label", GROUND)),
                tuple(Sphere(tuple(s["center"]), float(s["radius"]), int(s["label"])) for s in d.get("spheres", [])),
                tuple(Box(tuple(b["lo"]), tuple(b["hi"]), int(b["label"])) for b in d.get("boxes", [])),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed scene description: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "ground_z": self.ground_z,
            "ground_label": self.ground_label,
            "spheres": [{"center": list(s.center), "radius": s.radius, "label": s.label} for s in self.spheres],
            "boxes": [{"lo": list(b.lo), "hi": list(b.hi), "label": b.label} for b in self.boxes],
        }


def make_street_scene() -> Scene:
    """Ground at -1.73 m inside a closed 90 x 70 x 13 m hall, so every ray of
    the kitti-like sensor returns, plus a few cars and poles."""
    return Scene(
        ground_z=-1.73,
        spheres=(
            Sphere((8.0, -4.0, -0.5), 0.6, POLE),
            Sphere((-6.0, 7.0, 0.0), 1.0, POLE),
            Sphere((15.0, 12.0, 1.0), 2.5, POLE),
        ),
        boxes=(
            Box((-45.0, -35.0, -3.0), (45.0, 35.0, 10.0), BUILDING),
            Box((5.0, 2.0, -1.73), (9.5, 4.0, -0.2), CAR),
            Box((-12.0, -6.0, -1.73), (-7.5, -4.0, -0.3), CAR),
            Box((20.0, -15.0, -1.73), (30.0, -10.0, 6.0), BUILDING),
        ),
    )


@dataclass
class GroundTruthScan:
    raw_points: np.ndarray  # sensor frame at firing time
    deskewed_points: np.ndarray  # sensor frame at scan start
    rings: np.ndarray
    azimuths: np.ndarray  # degrees, firing-time sensor frame
    alphas: np.ndarray
    labels: np.ndarray
    intensity: np.ndarray
    velocity: VelocityEstimate
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.raw_points)

    def raw_cloud(self) -> PointCloud:
        return PointCloud(self.raw_points, self.intensity, self.labels)

    def deskewed_cloud(self) -> PointCloud:
        return PointCloud(self.deskewed_points, self.intensity, self.labels)




def _splitmix64(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def uniform_counter(seed: int, ring, sample):
    """Uniform [0, 1) per (seed, ring, sample); pure integer arithmetic, so
    identical on every platform and independent of evaluation order."""
    with np.errstate(over="ignore"):
        key = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        ctr = (np.asarray(ring, dtype=np.uint64) << np.uint64(32)) | np.asarray(sample, dtype=np.uint64)
        bits = _splitmix64(ctr ^ key)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _ray_plane(o, d, z0):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (z0 - o[:, 2]) / d[:, 2]
    return np.where(np.isfinite(t) & (t > EPS), t, np.inf)


def _ray_sphere(o, d, center, radius):
    oc = o - np.asarray(center, dtype=np.float64)
    b = np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - radius * radius
    disc = b * b - c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t1 = -b - sq
    t2 = -b + sq
    t = np.where(t1 > EPS, t1, np.where(t2 > EPS, t2, np.inf))
    return np.where(ok, t, np.inf)


def _ray_box(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (np.asarray(lo, dtype=np.float64) - o) / d
        t_hi = (np.asarray(hi, dtype=np.float64) - o) / d
    tmin = np.nanmax(np.fmin(t_lo, t_hi), axis=1)
    tmax = np.nanmin(np.fmax(t_lo, t_hi), axis=1)
    hit = tmax >= np.maximum(tmin, EPS)
    t = np.where(tmin > EPS, tmin, tmax)
    return np.where(hit, t, np.inf)


def cast_rays(scene: Scene, origins, dirs):
    """Nearest hit distance and label per ray (inf / 0 on a miss)."""
    best = np.full(len(dirs), np.inf)
    label = np.zeros(len(dirs), dtype=np.int64)
    hits = []
    if scene.ground_z is not None:
        hits.append((_ray_plane(origins, dirs, scene.ground_z), scene.ground_label))
    for s in scene.spheres:
        hits.append((_ray_sphere(origins, dirs, s.center, s.radius), s.label))
    for b in scene.boxes:
        hits.append((_ray_box(origins, dirs, b.lo, b.hi), b.label))
    for t, lab in hits:
        closer = t < best
        best[closer] = t[closer]
        label[closer] = lab
    return best, label


def simulate_scan(sensor: SensorModel, scene: Scene, velocity: VelocityEstimate | None = None,
                  seed: int = 0, firing_order: str = "ring") -> GroundTruthScan:
    """Fire every (laser, sample) ray of one revolution from the moving sensor.

    ``firing_order="column"`` interleaves lasers per azimuth sample instead
    of emitting laser after laser, which breaks the storage-order
    assumption of ring generation on purpose.
    """
    if firing_order not in ("ring", "column"):
        raise InvalidArgumentError(f"unknown firing order {firing_order!r}")
    vel = velocity if velocity is not None else VelocityEstimate.zero()
    n_l, n_s = sensor.num_lasers, sensor.samples_per_rev
    alpha_s = (np.arange(n_s) + 0.5) / n_s
    az_s = alpha_s * 2.0 * np.pi
    el = np.radians(np.asarray(sensor.vertical_angles))
    rot_s = np.stack([so3_exp(a * vel.phi) for a in alpha_s])  # (S, 3, 3)
    org_s = alpha_s[:, None] * vel.v[None, :]

    if firing_order == "ring":
        ring, sample = np.divmod(np.arange(n_l * n_s), n_s)
    else:
        sample, ring = np.divmod(np.arange(n_l * n_s), n_l)
    d_sensor = np.stack(
        (np.cos(el[ring]) * np.cos(az_s[sample]), np.cos(el[ring]) * np.sin(az_s[sample]), np.sin(el[ring])),
        axis=1,
    )
    d_world = np.einsum("nij,nj->ni", rot_s[sample], d_sensor)
    t, label = cast_rays(scene, org_s[sample], d_world)

    keep = t <= sensor.max_range
    if sensor.dropout_prob > 0:
        keep &= uniform_counter(seed, ring, sample) >= sensor.dropout_prob
    ring, sample, t, label, d_sensor = ring[keep], sample[keep], t[keep], label[keep], d_sensor[keep]

    raw = t[:, None] * d_sensor
    alphas = alpha_s[sample]
    deskewed = np.einsum("nij,nj->ni", rot_s[sample], raw) + org_s[sample]
    return GroundTruthScan(
        raw_points=raw,
        deskewed_points=deskewed,
        rings=ring.astype(np.int64),
        azimuths=np.degrees(az_s[sample]),
        alphas=alphas,
        labels=label,
        intensity=np.clip(1.0 - t / sensor.max_range, 0.0, 1.0),
        velocity=vel,
        samples=sample.astype(np.int64),
    )


def constant_velocity_poses(velocity: VelocityEstimate, n: int, start: Pose | None = None) -> list:
    """Scan-start poses of a sensor moving at ``velocity`` for ``n`` scans."""
    step = Pose(so3_exp(velocity.phi), velocity.v)
    poses = [start if start is not None else Pose()]
    for _ in range(n - 1):
        poses.append(poses[-1].compose(step))
    return poses
