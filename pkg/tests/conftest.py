import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from degenloc.liegroup import PoseSE3
from degenloc.pointcloud import SpatialIndex
from degenloc.scenes import SceneSpec, generate_map

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = hnp.arrays(np.float64, 3, elements=finite)
small_rotvec = hnp.arrays(np.float64, 3, elements=st.floats(-1.0, 1.0))


@st.composite
def unit_quats(draw):
    q = draw(hnp.arrays(np.float64, 4, elements=st.floats(-1, 1)))
    n = np.linalg.norm(q)
    if n < 1e-3:
        return np.array([0.0, 0.0, 0.0, 1.0])
    return q / n


@st.composite
def poses(draw):
    return PoseSE3(draw(unit_quats()), draw(vec3))


def random_pose(rng, t_scale=1.0, angle=np.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return PoseSE3.from_rotvec(axis * rng.uniform(0, angle), rng.normal(scale=t_scale, size=3))


@pytest.fixture(scope="session")
def room_map():
    spec = SceneSpec("room", {"length": 8.0, "width": 6.0, "height": 3.0}, density=60)
    cloud = generate_map(spec, seed=1)
    return cloud, SpatialIndex(cloud)


@pytest.fixture(scope="session")
def plane_map():
    spec = SceneSpec("plane", {"size_x": 10.0, "size_y": 10.0}, density=100)
    cloud = generate_map(spec, seed=2)
    return cloud, SpatialIndex(cloud)


@pytest.fixture(scope="session")
def corridor_map():
    spec = SceneSpec("corridor", {"length": 50.0, "width": 2.0, "height": 3.0}, density=200, noise_sigma=0.01)
    cloud = generate_map(spec, seed=3)
    return cloud, SpatialIndex(cloud)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d}. {'PASS' if passed else 'FAIL'}  {title}: {detail}")
