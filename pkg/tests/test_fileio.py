import struct

import numpy as np
import pytest

from rangeunfold import fileio
from rangeunfold.cloud import PointCloud
from rangeunfold.errors import FormatError
from rangeunfold.geometry import Pose, so3_exp
from rangeunfold.motion import VelocityEstimate, estimate_velocities, predict_relative_pose
from rangeunfold.projection import Channel, LookUpTable, RangeImage
from rangeunfold.simulator import constant_velocity_poses

IDENTITY_LINE = "1 0 0 0 0 1 0 0 0 0 1 0"


def test_read_two_points(tmp_path):
    f = tmp_path / "a.bin"
    f.write_bytes(np.arange(8, dtype="<f4").tobytes())
    cloud = fileio.read_scan(f)
    assert len(cloud) == 2
    assert cloud.xyz.dtype == np.float64
    assert cloud.xyz.tolist() == [[0, 1, 2], [4, 5, 6]]
    assert cloud.intensity.tolist() == [3, 7]


def test_read_empty(tmp_path):
    f = tmp_path / "e.bin"
    f.write_bytes(b"")
    assert len(fileio.read_scan(f)) == 0


def test_truncated_scan_reports_offset(tmp_path):
    f = tmp_path / "t.bin"
    f.write_bytes(b"\0" * 37)
    with pytest.raises(FormatError, match="offset 32"):
        fileio.read_scan(f)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        fileio.read_scan(tmp_path / "nope.bin")


def test_nan_points_quarantined(tmp_path):
    rec = np.ones((4, 4), dtype="<f4")
    rec[1, 0] = np.nan
    rec[3, 2] = np.inf
    f = tmp_path / "n.bin"
    f.write_bytes(rec.tobytes())
    cloud = fileio.read_scan(f)
    assert cloud.quarantine.tolist() == [1, 3]
    assert cloud.valid_mask().tolist() == [True, False, True, False]


def test_scan_roundtrip_bytes(tmp_path, rng):
    payload = rng.normal(scale=50, size=(1000, 4)).astype("<f4").tobytes()
    src = tmp_path / "src.bin"
    src.write_bytes(payload)
    dst = tmp_path / "dst.bin"
    fileio.write_scan(dst, fileio.read_scan(src))
    assert dst.read_bytes() == payload


def test_sidecars_roundtrip(tmp_path, rng):
    sem, inst = rng.integers(0, 260, 50), rng.integers(0, 9, 50)
    fileio.write_labels(tmp_path / "x.label", sem, inst)
    s, i = fileio.read_labels(tmp_path / "x.label", 50)
    assert np.array_equal(s, sem) and np.array_equal(i, inst)
    rings = rng.integers(0, 64, 50)
    fileio.write_rings(tmp_path / "x.ring", rings)
    assert np.array_equal(fileio.read_rings(tmp_path / "x.ring", 50), rings)
    alphas = (np.arange(50) + 0.5) / 2048
    fileio.write_alphas(tmp_path / "x.alpha", alphas)
    assert np.array_equal(fileio.read_alphas(tmp_path / "x.alpha", 50), alphas)


def test_sidecar_length_mismatch(tmp_path):
    fileio.write_rings(tmp_path / "x.ring", [0, 1, 2])
    with pytest.raises(FormatError):
        fileio.read_rings(tmp_path / "x.ring", 4)
    (tmp_path / "y.label").write_bytes(b"\0" * 7)
    with pytest.raises(FormatError, match="offset 4"):
        fileio.read_labels(tmp_path / "y.label")
    with pytest.raises(FormatError):
        fileio.write_rings(tmp_path / "z.ring", [70000])


def test_poses_identity_and_count(tmp_path):
    f = tmp_path / "poses.txt"
    f.write_text("\n".join([IDENTITY_LINE] * 3) + "\n")
    poses = fileio.read_poses(f)
    assert len(poses) == 3
    assert np.array_equal(poses[0].matrix(), np.eye(4))


def test_poses_field_count_error(tmp_path):
    f = tmp_path / "poses.txt"
    f.write_text(IDENTITY_LINE + "\n1 0 0 0 0 1 0 0 0 0 1\n")
    with pytest.raises(FormatError, match=":2:"):
        fileio.read_poses(f)
    f.write_text("1 0 0 x 0 1 0 0 0 0 1 0\n")
    with pytest.raises(FormatError, match=":1:"):
        fileio.read_poses(f)
    f.write_text("2 0 0 0 0 1 0 0 0 0 1 0\n")
    with pytest.raises(FormatError, match="orthonormal"):
        fileio.read_poses(f)


def test_poses_roundtrip_reproduce_velocity(tmp_path):
    vel = VelocityEstimate([0.01, 0.02, -0.04], [1.3, 0.1, -0.05])
    fileio.write_poses(tmp_path / "p.txt", constant_velocity_poses(vel, 3))
    poses = fileio.read_poses(tmp_path / "p.txt")
    est = estimate_velocities(predict_relative_pose(poses[0], poses[1]))
    assert np.abs(est.phi - vel.phi).max() < 1e-12
    assert np.abs(est.v - vel.v).max() < 1e-12


def test_calibration_conjugation(tmp_path, rng):
    tr = Pose(so3_exp([1.2, -1.2, 1.2]), [0.1, -0.05, -0.3])
    lidar = [Pose(so3_exp(rng.normal(size=3) * 0.3), rng.normal(size=3)) for _ in range(2)]
    cam = [tr.compose(p).compose(tr.inverse()) for p in lidar]
    fileio.write_poses(tmp_path / "p.txt", cam)
    m = [float(x) for x in tr.matrix()[:3].ravel()]
    (tmp_path / "calib.txt").write_text("P0: " + " ".join(["0"] * 12) + "\nTr: " + " ".join(map(repr, m)) + "\n")
    calib = fileio.read_calibration(tmp_path / "calib.txt")
    got = fileio.read_poses(tmp_path / "p.txt", calib)
    for a, b in zip(got, lidar):
        assert np.abs(a.matrix() - b.matrix()).max() < 1e-12
    (tmp_path / "bare.txt").write_text(" ".join(map(repr, m)))
    assert np.abs(fileio.read_calibration(tmp_path / "bare.txt").matrix() - tr.matrix()).max() < 1e-15


def test_range_image_roundtrip(tmp_path, rng):
    img = RangeImage(rng.normal(size=(4, 6, 8)).astype(np.float32))
    fileio.write_range_image(tmp_path / "a.rimg", img)
    raw = (tmp_path / "a.rimg").read_bytes()
    assert raw[:4] == b"RIMG"
    assert struct.unpack_from("<4I", raw, 4) == (1, 4, 6, 8)
    back = fileio.read_range_image(tmp_path / "a.rimg")
    assert back == img
    fileio.write_range_image(tmp_path / "b.rimg", back)
    assert (tmp_path / "b.rimg").read_bytes() == raw


def test_range_image_channel_subset(tmp_path):
    keep = (Channel.RANGE, Channel.MASK)
    img = RangeImage(np.ones((2, 2, 2)), keep)
    back = fileio.decode_range_image(fileio.encode_range_image(img))
    assert back.channels == (0, 5)


@pytest.mark.parametrize("mutate, msg", [
    (lambda b: b"XIMG" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
    (lambda b: b[:-3], "expected"),
])
def test_range_image_malformed(mutate, msg):
    raw = fileio.encode_range_image(RangeImage.empty(2, 3))
    with pytest.raises(FormatError, match=msg):
        fileio.decode_range_image(mutate(raw))


def test_lut_roundtrip(tmp_path):
    lut = LookUpTable([0, 1, 2], [3, 3, 0], [10, 11, 2047])
    fileio.write_lut(tmp_path / "a.rlut", lut)
    back = fileio.read_lut(tmp_path / "a.rlut")
    assert back == lut
    with pytest.raises(FormatError):
        fileio.decode_lut((tmp_path / "a.rlut").read_bytes()[:-1])


def test_atomic_write_leaves_no_temp_on_error(tmp_path):
    with pytest.raises(RuntimeError):
        with fileio.atomic_open(tmp_path / "x.bin") as fh:
            fh.write(b"partial")
            raise RuntimeError
    assert list(tmp_path.iterdir()) == []


def test_label_remap():
    m = fileio.load_label_map()
    assert m["ignore_class"] == 0
    out = fileio.remap_labels([0, 1, 10, 40, 252, 99999])
    assert out.tolist() == [0, 0, 1, 9, 1, 0]
    assert set(m["learning_map"].values()) == set(range(20))


def test_preview_png(tmp_path):
    pytest.importorskip("matplotlib")
    img = RangeImage.empty(4, 8)
    img[Channel.RANGE][1, 2] = 5.0
    img[Channel.MASK][1, 2] = 1.0
    fileio.save_preview(img, tmp_path / "p.png")
    assert (tmp_path / "p.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
