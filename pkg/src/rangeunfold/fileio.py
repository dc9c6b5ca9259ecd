"""Readers and writers for scans, sidecars, poses and range-image files.

All binary formats are little-endian. Writers go through a temporary file
in the target directory followed by a rename.
"""
from __future__ import annotations

import contextlib
import json
import logging
import os
import struct
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import FormatError
from .geometry import Pose
from .projection import LookUpTable, RangeImage

log = logging.getLogger(__name__)

RIMG_MAGIC = b"RIMG"
RLUT_MAGIC = b"RLUT"
FORMAT_VERSION = 1


@contextlib.contextmanager
def atomic_open(path, mode="wb"):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, payload: bytes):
    with atomic_open(path, "wb") as fh:
        fh.write(payload)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc


# --- point records ------------------------------------------------------------


def read_scan(path) -> PointCloud:
    """KITTI .bin: float32 (x, y, z, intensity) records."""
    raw = _read_bytes(path)
    if len(raw) % 16:
        whole = len(raw) // 16 * 16
        raise FormatError(f"{path}: truncated point record at byte offset {whole} ({len(raw)} bytes total)")
    rec = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(rec[:, :3]), axis=1))
    if bad.size:
        log.warning("%s: %d points with non-finite coordinates quarantined", path, bad.size)
    return PointCloud(rec[:, :3], rec[:, 3], quarantine=bad)


def encode_scan(cloud: PointCloud) -> bytes:
    rec = np.zeros((len(cloud), 4), dtype="<f4")
    rec[:, :3] = cloud.xyz
    if cloud.intensity is not None:
        rec[:, 3] = cloud.intensity
    return rec.tobytes()


def write_scan(path, cloud: PointCloud):
    atomic_write_bytes(path, encode_scan(cloud))


def _read_array(path, dtype, what):
    raw = _read_bytes(path)
    size = np.dtype(dtype).itemsize
    if len(raw) % size:
        raise FormatError(f"{path}: {what} file truncated at byte offset {len(raw) // size * size}")
    return np.frombuffer(raw, dtype=dtype)


def read_labels(path, expected: int | None = None):
    """Returns (semantic, instance) from uint32 records (low / high 16 bits)."""
    raw = _read_array(path, "<u4", "label")
    if expected is not None and raw.size != expected:
        raise FormatError(f"{path}: {raw.size} labels for {expected} points")
    return (raw & 0xFFFF).astype(np.int64), (raw >> 16).astype(np.int64)


def write_labels(path, semantic, instance=None):
    sem = np.asarray(semantic, dtype=np.uint32) & 0xFFFF
    inst = np.zeros_like(sem) if instance is None else np.asarray(instance, dtype=np.uint32)
    atomic_write_bytes(path, (sem | (inst << 16)).astype("<u4").tobytes())


def read_rings(path, expected: int | None = None) -> np.ndarray:
    rings = _read_array(path, "<u2", "ring").astype(np.int64)
    if expected is not None and rings.size != expected:
        raise FormatError(f"{path}: {rings.size} ring entries for {expected} points")
    return rings


def write_rings(path, rings):
    rings = np.asarray(rings)
    if rings.size and (rings.min() < 0 or rings.max() > 0xFFFF):
        raise FormatError("ring indices do not fit in 16 bits")
    atomic_write_bytes(path, rings.astype("<u2").tobytes())


def read_alphas(path, expected: int | None = None) -> np.ndarray:
    alphas = _read_array(path, "<f4", "alpha").astype(np.float64)
    if expected is not None and alphas.size != expected:
        raise FormatError(f"{path}: {alphas.size} timestamps for {expected} points")
    return alphas


def write_alphas(path, alphas):
    atomic_write_bytes(path, np.asarray(alphas, dtype="<f4").tobytes())


# --- poses --------------------------------------------------------------------


def _orthonormalize(r, where):
    err = np.max(np.abs(r.T @ r - np.eye(3)))
    if err >= 1e-4 or abs(np.linalg.det(r) - 1.0) >= 1e-4:
        raise FormatError(f"{where}: rotation is not orthonormal (error {err:.2e})")
    u, _, vt = np.linalg.svd(r)
    return u @ vt


def _parse_3x4(values, where) -> Pose:
    m = np.asarray(values, dtype=np.float64).reshape(3, 4)
    if not np.all(np.isfinite(m)):
        raise FormatError(f"{where}: non-finite value")
    return Pose(_orthonormalize(m[:, :3], where), m[:, 3])


def read_calibration(path) -> Pose:
    """Either 12 bare numbers or a KITTI calib.txt with a ``Tr:`` line."""
    text = _read_bytes(path).decode("ascii", errors="replace")
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if fields[0].endswith(":"):
            if fields[0] != "Tr:":
                continue
            fields = fields[1:]
        if len(fields) != 12:
            raise FormatError(f"{path}:{lineno}: expected 12 values, found {len(fields)}")
        try:
            return _parse_3x4([float(f) for f in fields], f"{path}:{lineno}")
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    raise FormatError(f"{path}: no calibration matrix found")


def read_poses(path, calibration: Pose | None = None) -> list:
    """One row-major 3x4 [R|t] per line. With a LiDAR-to-camera
    ``calibration`` the poses are conjugated into the LiDAR frame."""
    text = _read_bytes(path).decode("ascii", errors="replace")
    poses = []
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 12:
            raise FormatError(f"{path}:{lineno}: expected 12 values, found {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        pose = _parse_3x4(values, f"{path}:{lineno}")
        if calibration is not None:
            pose = calibration.inverse().compose(pose).compose(calibration)
        poses.append(pose)
    return poses


def write_poses(path, poses):
    lines = []
    for p in poses:
        m = np.hstack([p.rotation, p.translation[:, None]])
        lines.append(" ".join(repr(float(x)) for x in m.ravel()))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


# --- range images and LUTs ----------------------------------------------------


def encode_range_image(image: RangeImage) -> bytes:
    h, w = image.shape
    c = len(image.channels)
    head = RIMG_MAGIC + struct.pack("<4I", FORMAT_VERSION, h, w, c) + bytes(image.channels)
    return head + image.data.astype("<f4").tobytes()


def decode_range_image(raw: bytes, where="<bytes>") -> RangeImage:
    if len(raw) < 20 or raw[:4] != RIMG_MAGIC:
        raise FormatError(f"{where}: not a RIMG file (bad magic at byte offset 0)")
    version, h, w, c = struct.unpack_from("<4I", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported RIMG version {version} at byte offset 4")
    start = 20 + c
    need = start + 4 * h * w * c
    if len(raw) != need:
        raise FormatError(f"{where}: expected {need} bytes, found {len(raw)} (payload starts at offset {start})")
    channels = tuple(raw[20:start])
    data = np.frombuffer(raw, dtype="<f4", offset=start).reshape(h, w, c).astype(np.float64)
    try:
        return RangeImage(data, channels)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from exc


def write_range_image(path, image: RangeImage):
    atomic_write_bytes(path, encode_range_image(image))


def read_range_image(path) -> RangeImage:
    return decode_range_image(_read_bytes(path), str(path))


def encode_lut(lut: LookUpTable) -> bytes:
    rec = np.stack([lut.point_index, lut.v, lut.u], axis=1).astype("<u4")
    return RLUT_MAGIC + struct.pack("<2I", FORMAT_VERSION, len(lut)) + rec.tobytes()


def decode_lut(raw: bytes, where="<bytes>") -> LookUpTable:
    if len(raw) < 12 or raw[:4] != RLUT_MAGIC:
        raise FormatError(f"{where}: not a RLUT file (bad magic at byte offset 0)")
    version, n = struct.unpack_from("<2I", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported RLUT version {version} at byte offset 4")
    if len(raw) != 12 + 12 * n:
        raise FormatError(f"{where}: expected {12 + 12 * n} bytes for {n} records, found {len(raw)}")
    rec = np.frombuffer(raw, dtype="<u4", offset=12).reshape(n, 3).astype(np.int64)
    return LookUpTable(rec[:, 0], rec[:, 1], rec[:, 2])


def write_lut(path, lut: LookUpTable):
    atomic_write_bytes(path, encode_lut(lut))


def read_lut(path) -> LookUpTable:
    return decode_lut(_read_bytes(path), str(path))


def save_preview(image: RangeImage, path, channel=0):
    """PNG of one channel (range by default) with the viridis colormap."""
    from matplotlib import colormaps
    from matplotlib.image import imsave

    plane = np.ma.masked_where(~image.mask, image[channel])
    cmap = colormaps["viridis"].with_extremes(bad="black")
    with atomic_open(path, "wb") as fh:
        imsave(fh, plane, cmap=cmap, format="png")


def load_label_map(name="semantickitti") -> dict:
    if name != "semantickitti":
        raise FormatError(f"unknown label map {name!r}")
    text = resources.files("rangeunfold").joinpath("data/semantickitti_learning_map.json").read_text()
    return json.loads(text)


def remap_labels(semantic, name="semantickitti") -> np.ndarray:
    table = load_label_map(name)
    lut = np.zeros(max(int(k) for k in table["learning_map"]) + 1, dtype=np.int64)
    for k, v in table["learning_map"].items():
        lut[int(k)] = v
    semantic = np.asarray(semantic, dtype=np.int64)
    out = np.full(semantic.shape, table["ignore_class"], dtype=np.int64)
    inside = semantic < lut.size
    out[inside] = lut[semantic[inside]]
    return out
