import math

import numpy as np
import pytest

from rangeunfold.cloud import PointCloud
from rangeunfold.errors import AmbiguousAxisError, EmptyInputError, InvalidArgumentError
from rangeunfold.geometry import Pose, so3_exp
from rangeunfold.motion import (
    VelocityEstimate,
    deskew_scan,
    estimate_velocities,
    predict_relative_pose,
    relative_timestamps,
    skew_scan,
)
from rangeunfold.simulator import constant_velocity_poses


def random_pose(rng):
    return Pose(so3_exp(rng.uniform(-1, 1, 3)), rng.normal(scale=5, size=3))


def test_relative_pose_identical_is_identity(rng):
    p = random_pose(rng)
    rel = predict_relative_pose(p, p)
    assert np.allclose(rel.rotation, np.eye(3), atol=1e-14)
    assert np.allclose(rel.translation, 0, atol=1e-14)


def test_relative_pose_from_origin(rng):
    p = random_pose(rng)
    rel = predict_relative_pose(Pose(), p)
    assert np.allclose(rel.matrix(), p.matrix(), atol=1e-15)


def test_relative_pose_homogeneous_oracle(rng):
    for _ in range(20):
        a, b = random_pose(rng), random_pose(rng)
        rel = predict_relative_pose(a, b)
        assert np.abs(a.matrix() @ rel.matrix() - b.matrix()).max() < 1e-10
        assert np.abs(rel.matrix() - np.linalg.inv(a.matrix()) @ b.matrix()).max() < 1e-10


def test_velocities_identity():
    vel = estimate_velocities(Pose())
    assert np.array_equal(vel.phi, np.zeros(3)) and np.array_equal(vel.v, np.zeros(3))


def test_velocities_readback():
    vel = estimate_velocities(Pose(so3_exp([0, 0, 0.02]), [1.1, 0, 0]))
    assert np.allclose(vel.phi, [0, 0, 0.02], atol=1e-15)
    assert np.array_equal(vel.v, [1.1, 0, 0])


def test_velocities_exp_roundtrip(rng):
    for _ in range(20):
        p = random_pose(rng)
        assert np.abs(so3_exp(estimate_velocities(p).phi) - p.rotation).max() < 1e-10


def test_velocities_reject_half_turn():
    with pytest.raises(AmbiguousAxisError):
        estimate_velocities(Pose(so3_exp([0, np.pi, 0]), [0, 0, 0]))


def test_velocity_validation():
    with pytest.raises(InvalidArgumentError):
        VelocityEstimate([0, 0, 4.0], [0, 0, 0])
    with pytest.raises(InvalidArgumentError):
        VelocityEstimate([0, 0, 0], [np.inf, 0, 0])


def test_poses_reproduce_velocity():
    vel = VelocityEstimate([0.01, -0.02, 0.05], [1.5, -0.2, 0.1])
    poses = constant_velocity_poses(vel, 4)
    for a, b in zip(poses, poses[1:]):
        est = estimate_velocities(predict_relative_pose(a, b))
        assert np.abs(est.phi - vel.phi).max() < 1e-12
        assert np.abs(est.v - vel.v).max() < 1e-12


@pytest.mark.parametrize("deg, want", [(0.0, 0.0), (180.0, 0.5), (359.64, 0.999), (90.0, 0.25)])
def test_timestamps(backend, deg, want):
    a = math.radians(deg)
    cloud = PointCloud([[5 * math.cos(a), 5 * math.sin(a), 1.0]])
    assert relative_timestamps(cloud)[0] == pytest.approx(want, abs=1e-12)


def test_timestamps_empty():
    with pytest.raises(EmptyInputError):
        relative_timestamps(PointCloud(np.zeros((0, 3))))


def test_skew_zero_velocity_bitwise(backend, rng):
    cloud = PointCloud(rng.normal(scale=20, size=(500, 3)))
    out = skew_scan(cloud, VelocityEstimate.zero(), rng.uniform(0, 1, 500))
    assert np.array_equal(out.xyz, cloud.xyz)
    out = deskew_scan(cloud, VelocityEstimate.zero(), rng.uniform(0, 1, 500))
    assert np.array_equal(out.xyz, cloud.xyz)


def test_skew_zero_alpha_identity(backend, rng):
    cloud = PointCloud(rng.normal(scale=20, size=(100, 3)))
    vel = VelocityEstimate([0.1, 0.2, -0.3], [1, 2, 3])
    assert np.array_equal(skew_scan(cloud, vel, np.zeros(100)).xyz, cloud.xyz)


def test_skew_single_point(backend):
    vel = VelocityEstimate([0, 0, 0.1], [2, 0, 0])
    out = skew_scan(PointCloud([[10.0, 0, 0]]), vel, [0.5]).xyz[0]
    c, s = math.cos(0.05), math.sin(0.05)
    # inverse z-rotation of (9, 0, 0), evaluated by hand
    assert out == pytest.approx([9 * c, -9 * s, 0.0], abs=1e-9)
    assert out[0] == pytest.approx(8.98876, abs=1e-5) and out[1] == pytest.approx(-0.44981, abs=1e-5)


def test_skew_matches_matrix_oracle(backend, rng):
    xyz = rng.normal(scale=15, size=(200, 3))
    alpha = rng.uniform(0, 1, 200)
    vel = VelocityEstimate(rng.uniform(-0.2, 0.2, 3), rng.uniform(-3, 3, 3))
    got = skew_scan(PointCloud(xyz), vel, alpha).xyz
    want = np.stack([so3_exp(a * vel.phi).T @ (p - a * vel.v) for p, a in zip(xyz, alpha)])
    assert np.abs(got - want).max() < 1e-12


def test_deskew_inverts_skew(backend, rng):
    cloud = PointCloud(rng.normal(scale=30, size=(1000, 3)), intensity=rng.uniform(size=1000))
    alpha = rng.uniform(0, 1, 1000)
    vel = VelocityEstimate([0.05, -0.1, 0.2], [2.5, -1.0, 0.3])
    back = deskew_scan(skew_scan(cloud, vel, alpha), vel, alpha)
    assert np.abs(back.xyz - cloud.xyz).max() < 1e-10
    assert back.intensity is cloud.intensity


def test_deskew_recovers_simulator_scene(backend, kitti_moving):
    g = kitti_moving
    out = deskew_scan(g.raw_cloud(), g.velocity, g.alphas)
    assert np.abs(out.xyz - g.deskewed_points).max() < 1e-9
    again = skew_scan(g.deskewed_cloud(), g.velocity, g.alphas)
    assert np.abs(again.xyz - g.raw_points).max() < 1e-9


def test_alpha_length_checked():
    with pytest.raises(InvalidArgumentError):
        skew_scan(PointCloud(np.ones((3, 3))), VelocityEstimate.zero(), [0.1, 0.2])
