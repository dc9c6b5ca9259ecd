"""Compiled kernels vs. the numpy fallback on a 120k-point 64 x 2048 scan.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json]
"""
import argparse
import json
import statistics
import time

import numpy as np

from rangeunfold import _backend
from rangeunfold.interpolation import KnniConfig, knni, nla_postprocess
from rangeunfold.motion import VelocityEstimate, relative_timestamps, skew_scan
from rangeunfold.pipeline import PipelineConfig, preprocess
from rangeunfold.projection import ProjectorConfig, project
from rangeunfold.ring_index import generate_ring_indices
from rangeunfold.simulator import make_kitti_like_sensor, make_street_scene, simulate_scan


def make_scan():
    g = simulate_scan(make_kitti_like_sensor(), make_street_scene(), VelocityEstimate([0, 0, -0.02], [0, 0, 0]))
    keep = g.samples % 12 != 0
    cloud = g.raw_cloud()
    cloud.xyz, cloud.intensity, cloud.labels = cloud.xyz[keep], cloud.intensity[keep], cloud.labels[keep]
    return cloud


def bench(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def cases(cloud):
    vel = VelocityEstimate([0.01, 0.0, -0.03], [1.0, 0.2, 0.0])
    alpha = relative_timestamps(cloud)
    rings = generate_ring_indices(cloud)
    res = project(cloud, ProjectorConfig(), rings)
    cfg = PipelineConfig(knni=KnniConfig(5))
    return {
        "ring_index": lambda: generate_ring_indices(cloud),
        "skew": lambda: skew_scan(cloud, vel, alpha),
        "project_su++": lambda: project(cloud, ProjectorConfig(), rings),
        "knni_A_k5": lambda: knni(res.image, KnniConfig(5, "A")),
        "knni_B_k5": lambda: knni(res.image, KnniConfig(5, "B")),
        "nla_w7": lambda: nla_postprocess(cloud.ranges, res.lut, res.image, 7),
        "preprocess": lambda: preprocess(cloud, cfg),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    cloud = make_scan()
    results = {}
    for name in _backend.available():
        prev = _backend.use_backend(name)
        try:
            results[name] = {k: bench(fn, args.repeat) for k, fn in cases(cloud).items()}
        finally:
            _backend.use_backend(prev)

    if args.json:
        print(json.dumps({"points": len(cloud), "median_ms": results}, indent=2))
        return
    names = list(results)
    print(f"{len(cloud)} points, median of {args.repeat} runs, milliseconds")
    print(f"{'kernel':<14}" + "".join(f"{n:>10}" for n in names) + ("   speed-up" if len(names) == 2 else ""))
    for k in results[names[0]]:
        row = f"{k:<14}" + "".join(f"{results[n][k]:>10.2f}" for n in names)
        if len(names) == 2:
            row += f"{results['python'][k] / results['cython'][k]:>10.1f}x"
        print(row)
    if len(names) == 1:
        print("compiled kernels not built; only the numpy fallback was measured")


if __name__ == "__main__":
    np.seterr(all="ignore")
    main()
