"""Row-wise hole filling and nearest-label post-processing."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .errors import InvalidArgumentError
from .projection import VALUE_CHANNELS, Channel, LookUpTable, RangeImage


@dataclass(frozen=True)
class KnniConfig:
    """``variant`` A copies the nearest-range neighbour, B averages the
    neighbours' values (label still from the nearest), C is A but marks the
    label as ignored when the closest left and right neighbours disagree."""

    k: int = 3
    variant: str = "A"
    wrap: bool = False
    ignore_label: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", str(self.variant).upper())
        if int(self.k) != self.k or self.k < 3 or self.k % 2 == 0:
            raise InvalidArgumentError(f"window K must be an odd integer >= 3, got {self.k}")
        if self.variant not in ("A", "B", "C"):
            raise InvalidArgumentError(f"unknown KNNI variant {self.variant!r}")


@dataclass
class FillReport:
    filled_count: int
    remaining_invalid: int
    ignored_label_count: int = 0

    def to_dict(self):
        return asdict(self)


def knni(image: RangeImage, config: KnniConfig = KnniConfig()) -> tuple[RangeImage, FillReport]:
    """Fill each invalid pixel from valid pixels at most K//2 columns away in its row.

    Only pixels valid in the input are read, so filled pixels never feed
    other fills. Valid input pixels are returned untouched.
    """
    h, w = image.shape
    half = config.k // 2
    if config.wrap and config.k > w:
        raise InvalidArgumentError(f"window K={config.k} wider than the image ({w}) with wrap")
    value_pos = [image.channels.index(int(c)) for c in VALUE_CHANNELS if image.has(c)]
    valid = image.mask
    best, left, right, _count, mean = _backend.kernels().knni_fill(
        image.data, valid.view(np.uint8), image.channels.index(int(Channel.RANGE)),
        np.asarray(value_pos, dtype=np.int64), half, bool(config.wrap), config.variant == "B",
    )
    out = image.copy()
    rows, cols = np.nonzero(best >= 0)
    src = best[rows, cols]
    ignored = 0
    if config.variant == "B":
        for i, p in enumerate(value_pos):
            out.data[rows, cols, p] = mean[rows, cols, i]
        if image.has(Channel.LABEL):
            out[Channel.LABEL][rows, cols] = image[Channel.LABEL][rows, src]
        out[Channel.MASK][rows, cols] = 1.0
    else:
        out.data[rows, cols, :] = image.data[rows, src, :]
        if config.variant == "C" and image.has(Channel.LABEL):
            lab = image[Channel.LABEL]
            lu, ru = left[rows, cols], right[rows, cols]
            both = (lu >= 0) & (ru >= 0)
            clash = np.zeros(rows.size, dtype=bool)
            clash[both] = lab[rows[both], lu[both]] != lab[rows[both], ru[both]]
            out[Channel.LABEL][rows[clash], cols[clash]] = config.ignore_label
            ignored = int(clash.sum())
    if out.has(Channel.FILLED):
        out[Channel.FILLED][rows, cols] = 1.0
    initial = int(np.count_nonzero(~valid))
    return out, FillReport(int(rows.size), initial - int(rows.size), ignored)


def nla_postprocess(point_ranges, lut: LookUpTable, image: RangeImage, window: int = 7,
                    wrap: bool = False) -> np.ndarray:
    """Give each point the label of the valid pixel in a window x window
    neighbourhood of its LUT pixel whose range is closest to the point's own.

    Falls back to the point's own pixel label when no pixel in the window
    is valid. Output is ordered by point index.
    """
    if int(window) != window or window < 1 or window % 2 == 0:
        raise InvalidArgumentError(f"NLA window must be a positive odd integer, got {window}")
    lut.check_bounds(image.height, image.width)
    point_ranges = np.ascontiguousarray(point_ranges, dtype=np.float64)
    if point_ranges.shape != (len(lut),):
        raise InvalidArgumentError("one range per LUT entry required")
    v, u = lut.pixel_of_points()
    labels = np.ascontiguousarray(np.rint(image[Channel.LABEL]).astype(np.int64))
    return _backend.kernels().nla_assign(
        point_ranges,
        v,
        u,
        np.ascontiguousarray(image[Channel.RANGE]),
        np.ascontiguousarray(image.mask).view(np.uint8),
        labels,
        int(window) // 2,
        bool(wrap),
    )
