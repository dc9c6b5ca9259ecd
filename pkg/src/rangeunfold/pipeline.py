"""End-to-end preprocessing of scans into range images.

Per scan: ring indices -> optional re-skewing -> projection -> optional
hole filling -> RIMG/LUT files, plus optional upper-bound evaluation.
Scans are independent and may run on a thread pool; per-scan results do
not depend on the pool size.
"""
from __future__ import annotations

import hashlib
import json
import platform
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend, fileio
from .cloud import PointCloud
from .errors import InvalidArgumentError, InvariantViolation, RangeUnfoldError
from .interpolation import KnniConfig, knni
from .metrics import kept_ratio, upper_bound_miou
from .motion import estimate_velocities, predict_relative_pose, relative_timestamps, skew_scan
from .projection import ProjectorConfig, project
from .ring_index import (
    MAX_PER_RING,
    MAX_RINGS,
    RingAssignment,
    generate_ring_indices,
    repair_trailing_noise,
    validate_ring_indices,
)


class StageError(RangeUnfoldError):
    def __init__(self, stage, scan, cause):
        super().__init__(f"stage '{stage}' failed for {scan}: {cause}")
        self.stage = stage
        self.scan = str(scan)
        self.exit_code = getattr(cause, "exit_code", 4)


@dataclass
class PipelineConfig:
    output_dir: str = "."
    projector: ProjectorConfig = field(default_factory=ProjectorConfig)
    ring_source: str = "generate"  # or "file": <stem>.ring next to the scan
    ring_threshold: float = 1.0
    max_rings: int = MAX_RINGS
    max_per_ring: int = MAX_PER_RING
    repair_limit: float = 0.01  # largest overflow tail clamped, as a fraction of the scan
    skew: bool = False
    poses: str | None = None
    calibration: str | None = None
    scan_index: int | None = None  # default: parsed from the file stem
    alpha_source: str = "azimuth"  # or "file": <stem>.alpha
    knni: KnniConfig | None = field(default_factory=KnniConfig)
    evaluate: bool = False
    num_classes: int = 20
    ignore_class: int | None = 0
    remap: str | None = None
    mean_mode: str = "present"
    threads: int = 1

    def __post_init__(self):
        if self.ring_source not in ("generate", "file"):
            raise InvalidArgumentError(f"unknown ring source {self.ring_source!r}")
        if self.alpha_source not in ("azimuth", "file"):
            raise InvalidArgumentError(f"unknown alpha source {self.alpha_source!r}")
        if self.skew and not self.poses:
            raise InvalidArgumentError("skewing needs a poses file")
        if not 0.0 <= self.repair_limit <= 1.0:
            raise InvalidArgumentError("repair_limit must be a fraction in [0, 1]")
        if self.threads < 1:
            raise InvalidArgumentError("threads must be >= 1")

    def describe(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        d.pop("output_dir")
        return d


@dataclass
class Preprocessed:
    cloud: PointCloud
    rings: RingAssignment | None
    ring_report: dict | None
    velocity: dict | None
    projection: object
    image: object
    fill_report: dict | None
    timings: dict


def resolve_rings(cloud, config: PipelineConfig, ring_path=None):
    """Ring indices from a sidecar or generated, validated and tail-repaired."""
    if config.ring_source == "file":
        rings = RingAssignment(fileio.read_rings(ring_path, len(cloud)))
    else:
        rings = generate_ring_indices(cloud, config.ring_threshold)
    report = validate_ring_indices(rings, config.max_rings, config.max_per_ring)
    if not report.max_ring_ok:
        limit = int(config.repair_limit * len(cloud))
        rings = repair_trailing_noise(rings, config.max_rings, limit)
        report = validate_ring_indices(rings, config.max_rings, config.max_per_ring)
    if not report.ok:
        raise InvariantViolation(f"ring indices fail validation: {report.violations[:4]}")
    return rings, report.to_dict()


def preprocess(cloud: PointCloud, config: PipelineConfig, *, ring_path=None, poses=None,
               scan_index=None, alphas=None) -> Preprocessed:
    """In-memory stages with wall-clock timings in milliseconds."""
    timings = {}
    rings = ring_report = velocity = fill = None

    def timed(stage, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        finally:
            timings[stage] = (time.perf_counter() - t0) * 1e3

    if config.projector.method == "su++":
        rings, ring_report = timed("ring_index", resolve_rings, cloud, config, ring_path)
    if config.skew:
        if scan_index is None or scan_index < 2:
            velocity = {"skipped": "fewer than two previous poses"}
        else:
            def _skew():
                vel = estimate_velocities(predict_relative_pose(poses[scan_index - 2], poses[scan_index - 1]))
                a = relative_timestamps(cloud) if alphas is None else alphas
                return skew_scan(cloud, vel, a), vel

            if scan_index >= len(poses):
                raise InvalidArgumentError(f"no pose for scan index {scan_index} ({len(poses)} poses)")
            cloud, vel = timed("skew", _skew)
            velocity = vel.to_dict()
    result = timed("project", project, cloud, config.projector, rings)
    image = result.image
    if config.knni is not None:
        image, report = timed("knni", knni, image, config.knni)
        fill = report.to_dict()
    timings["preprocess"] = sum(timings[k] for k in ("ring_index", "skew", "project", "knni") if k in timings)
    return Preprocessed(cloud, rings, ring_report, velocity, result, image, fill, timings)


def _scan_index(path: Path, config: PipelineConfig):
    if config.scan_index is not None:
        return config.scan_index
    m = re.fullmatch(r"\d+", path.stem)
    return int(m.group()) if m else None


def _sha256(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def process_scan(path, config: PipelineConfig, poses=None) -> tuple[dict, dict]:
    """Run every stage on one scan file. Returns (manifest entry, timings)."""
    path = Path(path)
    stage = "read"
    try:
        cloud = fileio.read_scan(path)
        alphas = None
        if config.skew and config.alpha_source == "file":
            alphas = fileio.read_alphas(path.with_suffix(".alpha"), len(cloud))
        stage = "preprocess"
        pre = preprocess(
            cloud, config, ring_path=path.with_suffix(".ring"), poses=poses,
            scan_index=_scan_index(path, config), alphas=alphas,
        )
        stage = "write"
        out_dir = Path(config.output_dir)
        rimg = fileio.encode_range_image(pre.image)
        rlut = fileio.encode_lut(pre.projection.lut)
        fileio.atomic_write_bytes(out_dir / f"{path.stem}.rimg", rimg)
        fileio.atomic_write_bytes(out_dir / f"{path.stem}.rlut", rlut)
        entry = {
            "scan": path.name,
            "points": len(cloud),
            "quarantined": int(cloud.quarantine.size),
            "rings": pre.ring_report,
            "velocity": pre.velocity,
            "k_ratio": kept_ratio(pre.projection, len(cloud)) if len(cloud) else None,
            "fill": pre.fill_report,
            "outputs": {
                f"{path.stem}.rimg": _sha256(rimg),
                f"{path.stem}.rlut": _sha256(rlut),
            },
        }
        if config.evaluate:
            stage = "evaluate"
            semantic, _ = fileio.read_labels(path.with_suffix(".label"), len(cloud))
            gt = fileio.remap_labels(semantic, config.remap) if config.remap else semantic
            report = upper_bound_miou(
                pre.cloud, gt, config.projector, config.num_classes, pre.rings,
                config.ignore_class, config.mean_mode,
            )
            entry["upper_bound"] = report.to_dict()
        return entry, pre.timings
    except RangeUnfoldError as exc:
        raise StageError(stage, path, exc) from exc


def run_pipeline(config: PipelineConfig, scans) -> dict:
    """Process ``scans`` and write ``manifest.json`` to the output directory.

    The manifest holds parameters, versions, per-scan metrics and output
    checksums; it is byte-identical for identical inputs and parameters.
    Timings are returned under ``"timings"`` but not written.
    """
    scans = [Path(s) for s in scans]
    if not scans:
        raise InvalidArgumentError("no input scans")
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    poses = None
    if config.skew:
        calib = fileio.read_calibration(config.calibration) if config.calibration else None
        poses = fileio.read_poses(config.poses, calib)
    if config.threads == 1 or len(scans) == 1:
        results = [process_scan(s, config, poses) for s in scans]
    else:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(lambda s: process_scan(s, config, poses), scans))
    manifest = {
        "tool": "rangeunfold",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "parameters": config.describe(),
        "scans": [entry for entry, _ in results],
    }
    ratios = [e["k_ratio"] for e in manifest["scans"] if e["k_ratio"] is not None]
    if ratios:
        manifest["mean_k_ratio"] = float(np.mean(ratios))
    ub = [e["upper_bound"]["miou"] for e in manifest["scans"] if "upper_bound" in e]
    if ub:
        manifest["mean_upper_bound_miou"] = float(np.mean(ub))
    payload = json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable).encode()
    fileio.atomic_write_bytes(Path(config.output_dir) / "manifest.json", payload + b"\n")
    manifest["timings"] = {entry["scan"]: t for entry, t in results}
    manifest["backend"] = _backend.name()
    return manifest


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")
