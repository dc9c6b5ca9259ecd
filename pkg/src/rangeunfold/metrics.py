"""Skew MSEs, kept-point ratio and IoU metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cloud import PointCloud
from .errors import InvalidArgumentError
from .projection import ProjectionResult, ProjectorConfig, project, unproject_labels
from .ring_index import RingAssignment


@dataclass(frozen=True)
class SkewMse:
    mse_x: float
    mse_y: float
    mse_z: float
    mse_r: float

    def to_dict(self):
        return {"mse_x": self.mse_x, "mse_y": self.mse_y, "mse_z": self.mse_z, "mse_r": self.mse_r}


def _mean(values) -> float:
    # fsum: exact summation, so the result does not depend on chunking
    return math.fsum(values.tolist()) / values.size


def skew_mse(scan_a: PointCloud, scan_b: PointCloud) -> SkewMse:
    """Mean squared coordinate and range differences between index-aligned scans."""
    if len(scan_a) != len(scan_b):
        raise InvalidArgumentError(f"point counts differ: {len(scan_a)} vs {len(scan_b)}")
    if len(scan_a) == 0:
        raise InvalidArgumentError("MSE of empty scans is undefined")
    d = scan_a.xyz - scan_b.xyz
    dr = scan_a.ranges - scan_b.ranges
    return SkewMse(_mean(d[:, 0] ** 2), _mean(d[:, 1] ** 2), _mean(d[:, 2] ** 2), _mean(dr**2))


def kept_ratio(result: ProjectionResult, n_total: int) -> float:
    if n_total < 1:
        raise InvalidArgumentError("n_total must be >= 1")
    return result.kept_count / n_total


class ConfusionMatrix:
    """Rows are ground truth, columns predictions. Points whose ground truth
    is the ignore class are dropped before counting."""

    def __init__(self, num_classes: int, ignore_class: int | None = None):
        if num_classes < 1:
            raise InvalidArgumentError("num_classes must be >= 1")
        self.num_classes = num_classes
        self.ignore_class = ignore_class
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def add(self, pred, gt):
        pred = np.asarray(pred, dtype=np.int64).ravel()
        gt = np.asarray(gt, dtype=np.int64).ravel()
        if pred.shape != gt.shape:
            raise InvalidArgumentError(f"{pred.size} predictions for {gt.size} labels")
        for name, a in (("prediction", pred), ("ground truth", gt)):
            if a.size and (a.min() < 0 or a.max() >= self.num_classes):
                raise InvalidArgumentError(f"{name} label outside [0, {self.num_classes})")
        if self.ignore_class is not None:
            keep = gt != self.ignore_class
            pred, gt = pred[keep], gt[keep]
        self.counts += np.bincount(
            gt * self.num_classes + pred, minlength=self.num_classes**2
        ).reshape(self.num_classes, self.num_classes)
        return self

    def merge(self, other: "ConfusionMatrix"):
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class IouReport:
    per_class_iou: list  # None where the class never occurs
    miou: float
    k_ratio: float | None = None

    def to_dict(self):
        d = {"per_class_iou": self.per_class_iou, "miou": self.miou}
        if self.k_ratio is not None:
            d["k_ratio"] = self.k_ratio
        return d


def iou_from_confusion(conf: ConfusionMatrix, mean_mode: str = "present") -> IouReport:
    """``mean_mode="present"`` averages over classes seen in gt or prediction;
    ``"all"`` divides the IoU sum by every non-ignored class."""
    if mean_mode not in ("present", "all"):
        raise InvalidArgumentError(f"unknown mean mode {mean_mode!r}")
    c = conf.counts
    tp = np.diag(c)
    denom = c.sum(axis=0) + c.sum(axis=1) - tp
    classes = [i for i in range(conf.num_classes) if i != conf.ignore_class]
    per_class = [None] * conf.num_classes
    exact = []  # rationals, so the mean is correctly rounded
    for i in classes:
        if denom[i] > 0:
            exact.append(Fraction(int(tp[i]), int(denom[i])))
            per_class[i] = float(exact[-1])
    if mean_mode == "present":
        miou = float(sum(exact) / len(exact)) if exact else float("nan")
    else:
        miou = float(sum(exact) / len(classes)) if classes else float("nan")
    return IouReport(per_class, miou)


def compute_miou(pred, gt, num_classes: int, ignore_class: int | None = None,
                 mean_mode: str = "present") -> IouReport:
    conf = ConfusionMatrix(num_classes, ignore_class).add(pred, gt)
    return iou_from_confusion(conf, mean_mode)


def upper_bound_miou(cloud: PointCloud, gt_labels, projector: ProjectorConfig, num_classes: int,
                     rings: RingAssignment | None = None, ignore_class: int | None = None,
                     mean_mode: str = "present") -> IouReport:
    """Project the ground-truth labels, read them back through the LUT and
    score the round trip against the originals. ``k_ratio`` is attached."""
    gt = np.asarray(gt_labels, dtype=np.int64)
    labelled = PointCloud(cloud.xyz, cloud.intensity, gt, cloud.rings)
    result = project(labelled, projector, rings)
    back = unproject_labels(result.image, result.lut)
    report = compute_miou(back, gt, num_classes, ignore_class, mean_mode)
    report.k_ratio = kept_ratio(result, len(cloud))
    return report

