import numpy as np
import pytest

from rangeunfold import _backend
from rangeunfold.motion import VelocityEstimate
from rangeunfold.simulator import make_kitti_like_sensor, make_street_scene, simulate_scan

BACKENDS = _backend.available()


ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--semantickitti", default=None, metavar="PATH",
                     help="SemanticKITTI dataset root (contains sequences/08/...)")
    parser.addoption("--skew-pairs", default=None, metavar="DIR",
                     help="directory with raw/ and deskewed/ scans plus poses.txt for the skew-MSE check")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records and prints one pass/fail line."""

    def record(n, ok, detail, status=None):
        status = status or ("PASS" if ok else "FAIL")
        line = f"criterion {n}: {status} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _backend.use_backend(request.param)
    yield request.param
    _backend.use_backend(prev)


@pytest.fixture(scope="session")
def kitti_static():
    """Collision-free kitti-like scan of the street scene, sensor at rest."""
    return simulate_scan(make_kitti_like_sensor(), make_street_scene())


@pytest.fixture(scope="session")
def kitti_moving():
    vel = VelocityEstimate([0.004, -0.003, 0.03], [1.2, 0.3, 0.02])
    return simulate_scan(make_kitti_like_sensor(), make_street_scene(), vel)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_sim_dataset(root, velocity=None, name="000002", keep=None, seed=0):
    """Write a simulator scan with its sidecars and a 3-pose trajectory.

    Negative yaw keeps the motion-compensated azimuths inside one
    revolution, so rings are recoverable from the stored scan as well.
    """
    from rangeunfold import fileio
    from rangeunfold.simulator import constant_velocity_poses

    vel = velocity if velocity is not None else VelocityEstimate([0, 0, -0.02], [0, 0, 0])
    g = simulate_scan(make_kitti_like_sensor(), make_street_scene(), vel, seed)
    sel = np.ones(len(g), dtype=bool) if keep is None else keep(g)
    root.mkdir(parents=True, exist_ok=True)
    cloud = g.deskewed_cloud()
    cloud.xyz, cloud.intensity = cloud.xyz[sel], cloud.intensity[sel]
    fileio.write_scan(root / f"{name}.bin", cloud)
    fileio.write_labels(root / f"{name}.label", g.labels[sel])
    fileio.write_rings(root / f"{name}.ring", g.rings[sel])
    fileio.write_alphas(root / f"{name}.alpha", g.alphas[sel])
    fileio.write_poses(root / "poses.txt", constant_velocity_poses(vel, 3))
    return root / f"{name}.bin", g, sel
