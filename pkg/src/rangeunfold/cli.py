"""Command-line entry point.

Exit codes: 0 success, 2 malformed input file, 3 invalid arguments,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend, fileio
from .cloud import PointCloud
from .errors import InvalidArgumentError, RangeUnfoldError
from .interpolation import KnniConfig, knni
from .metrics import kept_ratio, skew_mse, upper_bound_miou
from .motion import (
    VelocityEstimate,
    deskew_scan,
    estimate_velocities,
    predict_relative_pose,
    relative_timestamps,
    skew_scan,
)
from .pipeline import PipelineConfig, run_pipeline
from .projection import ProjectorConfig, project
from .ring_index import (
    RingAssignment,
    generate_ring_indices,
    repair_trailing_noise,
    validate_ring_indices,
)
from .simulator import (
    NUM_CLASSES,
    Scene,
    constant_velocity_poses,
    make_kitti_like_sensor,
    make_street_scene,
    simulate_scan,
)

log = logging.getLogger("rangeunfold")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _out(args, name) -> Path:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _guard_overwrite(src, dst):
    if Path(src).resolve() == Path(dst).resolve():
        raise InvalidArgumentError(f"refusing to overwrite the input {src}; choose another --output-dir")


def _projector(args) -> ProjectorConfig:
    return ProjectorConfig(args.method, args.width, args.height, args.fov_up, args.fov_down)


def _rings_for(cloud, args):
    if args.rings:
        return RingAssignment(fileio.read_rings(args.rings, len(cloud)))
    rings = generate_ring_indices(cloud, args.threshold)
    if not validate_ring_indices(rings, args.height).max_ring_ok:
        rings = repair_trailing_noise(rings, args.height, int(0.01 * len(cloud)))
    return rings


def _labels_for(path, n, args):
    semantic, _ = fileio.read_labels(path, n)
    return fileio.remap_labels(semantic, args.remap) if args.remap else semantic


# --- subcommands --------------------------------------------------------------


def cmd_ring_index(args):
    cloud = fileio.read_scan(args.scan)
    rings = generate_ring_indices(cloud, args.threshold)
    report = validate_ring_indices(rings, args.max_rings, args.max_per_ring)
    if args.repair and not report.max_ring_ok:
        rings = repair_trailing_noise(rings, args.max_rings, int(args.repair_limit * len(cloud)))
        report = validate_ring_indices(rings, args.max_rings, args.max_per_ring)
    dst = _out(args, Path(args.scan).stem + ".ring")
    fileio.write_rings(dst, rings.rings)
    out = report.to_dict()
    out.update(num_rings=rings.num_rings, max_points_per_ring=int(rings.points_per_ring.max()), output=str(dst))
    _dump(out)
    return 0


def _motion(args, inverse):
    cloud = fileio.read_scan(args.scan)
    dst = _out(args, Path(args.scan).stem + ".bin")
    _guard_overwrite(args.scan, dst)
    calib = fileio.read_calibration(args.calib) if args.calib else None
    poses = fileio.read_poses(args.poses, calib)
    if args.index >= len(poses):
        raise InvalidArgumentError(f"scan index {args.index} but only {len(poses)} poses")
    if args.index < 2:
        fileio.write_scan(dst, cloud)
        print(f"scan {args.index}: fewer than two previous poses, written unmodified")
        return 0
    vel = estimate_velocities(predict_relative_pose(poses[args.index - 2], poses[args.index - 1]))
    alpha = fileio.read_alphas(args.alphas, len(cloud)) if args.alphas else relative_timestamps(cloud)
    moved = deskew_scan(cloud, vel, alpha) if inverse else skew_scan(cloud, vel, alpha)
    fileio.write_scan(dst, moved)
    phi = vel.phi
    print(f"scan {args.index}: angular velocity [rad/scan] {phi[0]:.9g} {phi[1]:.9g} {phi[2]:.9g}")
    print(f"scan {args.index}: linear velocity [m/scan] {vel.v[0]:.9g} {vel.v[1]:.9g} {vel.v[2]:.9g}")
    print(f"scan {args.index}: |phi| {np.linalg.norm(phi):.9g} rad, |v| {np.linalg.norm(vel.v):.9g} m")
    print(f"wrote {dst}")
    return 0


def cmd_skew(args):
    return _motion(args, inverse=False)


def cmd_deskew(args):
    return _motion(args, inverse=True)


def cmd_project(args):
    cloud = fileio.read_scan(args.scan)
    if args.labels:
        cloud.labels = _labels_for(args.labels, len(cloud), args)
    cfg = _projector(args)
    rings = _rings_for(cloud, args) if cfg.method == "su++" else None
    result = project(cloud, cfg, rings)
    stem = Path(args.scan).stem
    fileio.write_range_image(_out(args, stem + ".rimg"), result.image)
    fileio.write_lut(_out(args, stem + ".rlut"), result.lut)
    if args.png:
        fileio.save_preview(result.image, args.png)
    _dump({
        "method": cfg.method,
        "height": cfg.height,
        "width": cfg.width,
        "points": len(cloud),
        "kept": result.kept_count,
        "k_ratio": kept_ratio(result, len(cloud)) if len(cloud) else None,
    })
    return 0


def cmd_knni(args):
    image = fileio.read_range_image(args.image)
    filled, report = knni(image, KnniConfig(args.k, args.variant, args.wrap, args.ignore_label))
    dst = Path(args.out) if args.out else _out(args, Path(args.image).stem + "_knni.rimg")
    _guard_overwrite(args.image, dst)
    fileio.write_range_image(dst, filled)
    if args.png:
        fileio.save_preview(filled, args.png)
    _dump(report.to_dict())
    return 0


def cmd_metrics(args):
    if args.mse:
        a, b = (fileio.read_scan(p) for p in args.mse)
        _dump(skew_mse(a, b).to_dict())
        return 0
    scan = args.kratio or args.upper_bound
    cloud = fileio.read_scan(scan)
    cfg = _projector(args)
    rings = _rings_for(cloud, args) if cfg.method == "su++" else None
    if args.kratio:
        result = project(cloud, cfg, rings)
        _dump({"k_ratio": kept_ratio(result, len(cloud)), "kept": result.kept_count, "points": len(cloud)})
        return 0
    labels_path = args.labels or Path(scan).with_suffix(".label")
    gt = _labels_for(labels_path, len(cloud), args)
    report = upper_bound_miou(cloud, gt, cfg, args.num_classes, rings, args.ignore_class, args.mean_mode)
    _dump(report.to_dict())
    return 0


def cmd_simulate(args):
    scene = make_street_scene()
    if args.scene:
        try:
            scene = Scene.from_dict(json.loads(Path(args.scene).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot load scene {args.scene}: {exc}") from exc
    sensor = make_kitti_like_sensor(args.dropout)
    vel = VelocityEstimate(args.phi, args.v)
    gt = simulate_scan(sensor, scene, vel, args.seed, args.firing_order)
    name = args.name
    fileio.write_scan(_out(args, f"{name}.bin"), gt.deskewed_cloud())
    fileio.write_scan(_out(args, f"{name}_raw.bin"), gt.raw_cloud())
    fileio.write_labels(_out(args, f"{name}.label"), gt.labels)
    fileio.write_rings(_out(args, f"{name}.ring"), gt.rings)
    fileio.write_alphas(_out(args, f"{name}.alpha"), gt.alphas)
    fileio.write_poses(_out(args, "poses.txt"), constant_velocity_poses(vel, 3))
    _dump({
        "points": len(gt),
        "num_classes": NUM_CLASSES,
        "velocity": vel.to_dict(),
        "seed": args.seed,
        "scan_index_with_history": 2,
        "files": [f"{name}.bin", f"{name}_raw.bin", f"{name}.label", f"{name}.ring", f"{name}.alpha", "poses.txt"],
    })
    return 0


def cmd_pipeline(args):
    config = PipelineConfig(
        output_dir=args.output_dir,
        projector=_projector(args),
        ring_source=args.ring_source,
        ring_threshold=args.threshold,
        max_rings=args.height,
        max_per_ring=args.max_per_ring,
        repair_limit=args.repair_limit,
        skew=args.skew,
        poses=args.poses,
        calibration=args.calib,
        scan_index=args.index,
        alpha_source=args.alpha_source,
        knni=None if args.no_knni else KnniConfig(args.k, args.variant, args.wrap, args.ignore_label),
        evaluate=args.eval,
        num_classes=args.num_classes,
        ignore_class=args.ignore_class,
        remap=args.remap,
        mean_mode=args.mean_mode,
        threads=args.threads,
    )
    manifest = run_pipeline(config, args.scans)
    timings = manifest.pop("timings")
    backend = manifest.pop("backend")
    _dump(manifest)
    if args.timing:
        report = {"backend": backend, "unit": "ms", "scans": timings}
        pre = [t["preprocess"] for t in timings.values()]
        report["preprocess_mean"] = float(np.mean(pre))
        print(json.dumps(report, indent=2, sort_keys=True), file=sys.stderr)
    return 0


# --- parser -------------------------------------------------------------------


def _add_projector(p, method=True):
    if method:
        p.add_argument("--method", choices=["su++", "sp"], default="su++")
    p.add_argument("--width", type=int, default=2048)
    p.add_argument("--height", type=int, default=64, help="image rows; also the maximum ring count")
    p.add_argument("--fov-up", type=float, default=3.0, help="spherical projection only [deg]")
    p.add_argument("--fov-down", type=float, default=-25.0, help="spherical projection only [deg]")
    p.add_argument("--threshold", type=float, default=1.0, help="ring generation azimuth gap [deg]")


def _add_labels(p):
    p.add_argument("--num-classes", type=int, default=20)
    p.add_argument("--ignore-class", type=int, default=0)
    p.add_argument("--remap", choices=["semantickitti"], default=None,
                   help="map raw SemanticKITTI ids to the 19 training classes (+ ignored 0)")
    p.add_argument("--mean-mode", choices=["present", "all"], default="present",
                   help="average IoU over classes that occur, or over all classes")


def _add_knni(p):
    p.add_argument("--k", type=int, default=5, help="odd window width")
    p.add_argument("--variant", type=str.upper, choices=["A", "B", "C"], default="A")
    p.add_argument("--wrap", action="store_true", help="treat image rows as cyclic")
    p.add_argument("--ignore-label", type=int, default=0, help="label written by variant C on conflicts")


def build_parser():
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--output-dir", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="rangeunfold", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"rangeunfold {__version__}")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for multi-scan runs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output-dir", default=".")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ring-index", parents=[common], help="generate per-point ring indices")
    p.add_argument("scan")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--max-rings", type=int, default=64)
    p.add_argument("--max-per-ring", type=int, default=2180)
    p.add_argument("--repair", action="store_true", help="clamp trailing overflow points to the last ring")
    p.add_argument("--repair-limit", type=float, default=0.01,
                   help="largest overflow tail to clamp, as a fraction of the scan")
    p.set_defaults(func=cmd_ring_index)

    for name, func, what in (("skew", cmd_skew, "re-skew a motion-compensated scan"),
                             ("deskew", cmd_deskew, "motion-compensate a raw scan")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument("scan")
        p.add_argument("--poses", required=True)
        p.add_argument("--index", type=int, required=True, help="scan index into the poses file")
        p.add_argument("--calib", help="LiDAR-to-pose-frame calibration (12 values or KITTI calib.txt)")
        p.add_argument("--alphas", help="float32 per-point timestamp sidecar overriding azimuth timestamps")
        p.set_defaults(func=func)

    p = sub.add_parser("project", parents=[common], help="build a range image and LUT")
    p.add_argument("scan")
    _add_projector(p)
    p.add_argument("--rings", help="u16 ring sidecar; generated when omitted")
    p.add_argument("--labels", help="label file to carry into the label channel")
    p.add_argument("--remap", choices=["semantickitti"], default=None)
    p.add_argument("--png", help="write a range preview image")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("knni", parents=[common], help="fill holes in a RIMG file")
    p.add_argument("image")
    _add_knni(p)
    p.add_argument("--out")
    p.add_argument("--png")
    p.set_defaults(func=cmd_knni)

    p = sub.add_parser("metrics", parents=[common], help="skew MSE, kept ratio, upper-bound mIoU")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--mse", nargs=2, metavar=("SCAN_A", "SCAN_B"))
    mode.add_argument("--kratio", metavar="SCAN")
    mode.add_argument("--upper-bound", metavar="SCAN")
    _add_projector(p)
    p.add_argument("--rings")
    p.add_argument("--labels", help="default: <scan>.label")
    _add_labels(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", parents=[common], help="synthesise a scan with ground truth")
    p.add_argument("--scene", help="JSON scene; default is a closed street hall")
    p.add_argument("--preset", choices=["kitti"], default="kitti")
    p.add_argument("--phi", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("X", "Y", "Z"))
    p.add_argument("--v", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("X", "Y", "Z"))
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--firing-order", choices=["ring", "column"], default="ring")
    p.add_argument("--name", default="000002")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", parents=[common], help="rings -> skew -> project -> knni -> files")
    p.add_argument("scans", nargs="+")
    _add_projector(p)
    p.add_argument("--ring-source", choices=["generate", "file"], default="generate")
    p.add_argument("--max-per-ring", type=int, default=2180)
    p.add_argument("--repair-limit", type=float, default=0.01,
                   help="largest overflow tail to clamp, as a fraction of the scan")
    p.add_argument("--skew", action="store_true")
    p.add_argument("--poses")
    p.add_argument("--calib")
    p.add_argument("--index", type=int, help="scan index (default: numeric file stem)")
    p.add_argument("--alpha-source", choices=["azimuth", "file"], default="azimuth")
    _add_knni(p)
    p.add_argument("--no-knni", action="store_true")
    p.add_argument("--eval", action="store_true", help="upper-bound mIoU from <stem>.label")
    _add_labels(p)
    p.add_argument("--timing", action="store_true", help="per-stage timing report on stderr")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", _backend.name())
    try:
        return args.func(args)
    except RangeUnfoldError as exc:
        print(f"rangeunfold: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"rangeunfold: invalid argument: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
