import subprocess
import sys

SCRIPT = """
import sys
sys.modules["rangeunfold._kernels"] = None  # make the extension unimportable
from rangeunfold import _backend
import rangeunfold
assert _backend.available() == ["python"], _backend.available()
assert _backend.name() == "python"
from rangeunfold.simulator import make_kitti_like_sensor, make_street_scene, simulate_scan
from rangeunfold.ring_index import generate_ring_indices
from rangeunfold.projection import ProjectorConfig, project
g = simulate_scan(make_kitti_like_sensor(), make_street_scene())
rings = generate_ring_indices(g.raw_cloud())
res = project(g.raw_cloud(), ProjectorConfig(), rings)
assert res.kept_count == len(g)
print("ok")
"""


def test_fallback_selected_without_extension():
    proc = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "ok"
