import numpy as np
import pytest

from degenloc.liegroup import PoseSE3, apply
from degenloc.pointcloud import SpatialIndex
from degenloc.scenes import (
    SceneSpec,
    SensorModel,
    derive_seeds,
    generate_map,
    noisy_priors,
    relative_motions,
    simulate_scan,
    simulate_sequence,
    straight_trajectory,
    synthesize,
)
from degenloc.trajectory import Trajectory

CORRIDOR = {"length": 50.0, "width": 2.0, "height": 3.0}


def test_plane_counts_and_normals():
    m = generate_map(SceneSpec("plane", {"size_x": 10.0, "size_y": 10.0}, density=100), 0)
    assert len(m) == 10000
    assert np.allclose(m.normals, [0, 0, 1])
    assert np.allclose(m.points[:, 2], 0.0)
    assert np.all(m.planarity == 1.0)


def test_corridor_has_no_end_caps():
    m = generate_map(SceneSpec("corridor", CORRIDOR, density=20), 0)
    assert np.all(np.abs(m.normals[:, 0]) <= 0.01)
    on_wall = np.isclose(np.abs(m.points[:, 1]), 1.0)
    on_floor_or_ceiling = np.isclose(m.points[:, 2], 0.0) | np.isclose(m.points[:, 2], 3.0)
    assert np.all(on_wall | on_floor_or_ceiling)
    assert m.points[:, 0].min() >= 0 and m.points[:, 0].max() <= 50


@pytest.mark.parametrize(
    "kind,dims",
    [
        ("tunnel", {"length": 20.0, "radius": 2.0}),
        ("room", {"length": 6.0, "width": 4.0, "height": 3.0}),
        ("staircase", {"steps": 5, "step_depth": 0.3, "step_height": 0.2, "width": 1.0}),
    ],
)
def test_other_scenes_have_unit_normals_and_are_deterministic(kind, dims):
    spec = SceneSpec(kind, dims, density=30, noise_sigma=0.01)
    a, b = generate_map(spec, 7), generate_map(spec, 7)
    assert len(a) > 0
    assert np.array_equal(a.points, b.points)
    assert np.allclose(np.linalg.norm(a.normals, axis=1), 1.0)


def test_tunnel_normals_point_inward():
    m = generate_map(SceneSpec("tunnel", {"length": 10.0, "radius": 2.0}, density=20), 0)
    radial = m.points[:, 1:] / np.linalg.norm(m.points[:, 1:], axis=1, keepdims=True)
    assert np.allclose(np.einsum("ij,ij->i", m.normals[:, 1:], radial), -1.0)
    assert np.allclose(m.normals[:, 0], 0.0)


def test_spec_validation_names_the_missing_field():
    with pytest.raises(ValueError, match="width"):
        SceneSpec("corridor", {"length": 1.0, "height": 1.0})
    with pytest.raises(ValueError):
        SceneSpec("plane", {"size_x": 1.0, "size_y": -1.0})
    with pytest.raises(ValueError):
        SceneSpec("plane", {"size_x": 1.0, "size_y": 1.0}, density=0)
    with pytest.raises(ValueError):
        SceneSpec("cave", {})
    with pytest.raises(ValueError):
        SensorModel(max_range=0)
    with pytest.raises(ValueError):
        SensorModel(rays=0)


def test_straight_trajectory():
    start = PoseSE3.from_xyz_rpy(1, 2, 3, 0, 0, 0.5)
    traj = straight_trajectory(start, [1, 0, 0], 10, 10)
    assert len(traj) == 101
    assert traj.poses[-1].t[0] == pytest.approx(11.0)
    steps = np.diff(traj.positions, axis=0)
    assert np.allclose(steps, steps[0], atol=1e-12)
    assert all(np.allclose(p.rotation, start.rotation) for p in traj.poses)
    still = straight_trajectory(start, [0, 0, 0], 1, 5)
    assert all(np.allclose(p.t, start.t) for p in still.poses)
    with pytest.raises(ValueError):
        straight_trajectory(start, [1, 0, 0], 1, 0)


def test_trajectory_requires_increasing_stamps():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], [PoseSE3.identity()] * 2)


def test_full_view_scan_is_the_map_in_sensor_frame():
    m = generate_map(SceneSpec("room", {"length": 4.0, "width": 3.0, "height": 2.0}, density=10), 0)
    index = SpatialIndex(m)
    pose = PoseSE3(translation=m.points.mean(axis=0))
    scan = simulate_scan(m, index, pose, SensorModel(max_range=np.inf, rays=10**6))
    assert len(scan) == len(m)
    assert np.allclose(apply(pose, scan.points), m.points)


def test_tiny_range_gives_empty_scan():
    m = generate_map(SceneSpec("plane", {"size_x": 2.0, "size_y": 2.0}, density=10), 0)
    scan = simulate_scan(m, SpatialIndex(m), PoseSE3(translation=[0, 0, 5]), SensorModel(max_range=0.001))
    assert len(scan) == 0


def test_fov_limits():
    m = generate_map(SceneSpec("room", {"length": 6.0, "width": 6.0, "height": 3.0}, density=20), 0)
    pose = PoseSE3(translation=[0, 0, 1.5])
    scan = simulate_scan(m, SpatialIndex(m), pose, SensorModel(rays=10**6, horizontal_fov=90, vertical_fov=30))
    az = np.degrees(np.arctan2(scan.points[:, 1], scan.points[:, 0]))
    el = np.degrees(np.arctan2(scan.points[:, 2], np.hypot(scan.points[:, 0], scan.points[:, 1])))
    assert len(scan) > 0 and np.all(np.abs(az) <= 45) and np.all(np.abs(el) <= 15)


def test_corridor_scan_has_few_x_facing_points(corridor_map):
    cloud, index = corridor_map
    pose = PoseSE3.from_xyz_rpy(25, 0, 1.5)
    scan = simulate_scan(cloud, index, pose, SensorModel(max_range=15, rays=3000))
    world = scan.transformed(pose)
    ids, _ = index.nearest(world.points)
    assert np.mean(np.abs(cloud.normals[ids, 0]) > 0.7) < 0.05


def test_scan_points_lie_on_surfaces():
    sigma = 0.01
    spec = SceneSpec("room", {"length": 6.0, "width": 4.0, "height": 3.0}, density=50, noise_sigma=sigma)
    m = generate_map(spec, 0)
    clean = generate_map(SceneSpec("room", spec.dimensions, density=50), 0)
    pose = PoseSE3.from_xyz_rpy(0.5, 0.2, 1.4, 0, 0, 0.3)
    scan = simulate_scan(m, SpatialIndex(m), pose, SensorModel(max_range=10, rays=2000, seed=3))
    world = apply(pose, scan.points)
    # distance to the noiseless surface: min over the six box planes
    half = np.array([3.0, 2.0])
    d = np.min(
        np.column_stack([
            np.abs(np.abs(world[:, 0]) - half[0]),
            np.abs(np.abs(world[:, 1]) - half[1]),
            np.abs(world[:, 2]),
            np.abs(world[:, 2] - 3.0),
        ]),
        axis=1,
    )
    assert np.mean(d <= 3 * sigma) >= 0.99
    assert len(clean) == len(m)


def test_range_noise_moves_points_along_rays():
    m = generate_map(SceneSpec("plane", {"size_x": 4.0, "size_y": 4.0}, density=20), 0)
    pose = PoseSE3(translation=[0, 0, 1])
    clean = simulate_scan(m, SpatialIndex(m), pose, SensorModel(rays=100, seed=4))
    noisy = simulate_scan(m, SpatialIndex(m), pose, SensorModel(rays=100, seed=4, range_noise_sigma=0.05))
    cos = np.einsum("ij,ij->i", clean.points, noisy.points)
    cos /= np.linalg.norm(clean.points, axis=1) * np.linalg.norm(noisy.points, axis=1)
    assert np.allclose(cos, 1.0)
    assert not np.allclose(clean.points, noisy.points)


def test_sequence_and_priors():
    m = generate_map(SceneSpec("room", {"length": 6.0, "width": 4.0, "height": 3.0}, density=20), 0)
    index = SpatialIndex(m)
    traj = straight_trajectory(PoseSE3(translation=[-1, 0, 1]), [0.5, 0, 0], 1.0, 5)
    seq = simulate_sequence(m, index, traj, SensorModel(rays=300, seed=10))
    assert len(seq) == len(traj)
    assert np.array_equal(seq[2][1].points, simulate_scan(m, index, traj.poses[2], SensorModel(rays=300, seed=12)).points)
    rel = relative_motions(traj)
    assert rel[0] is None and np.allclose(rel[1].t, [0.1, 0, 0])
    exact = noisy_priors(traj, 0.0, 0)
    assert all(np.allclose(a.matrix(), b.matrix()) for a, b in zip(exact[1:], rel[1:]))
    noisy = noisy_priors(traj, 0.01, 0)
    assert noisy[0] is None and not np.allclose(noisy[1].t, rel[1].t)
    assert np.allclose(noisy_priors(traj, 0.01, 0)[3].t, noisy[3].t)


def test_synthesize_is_deterministic():
    spec = SceneSpec("corridor", {"length": 10.0, "width": 2.0, "height": 3.0}, density=20)
    traj = straight_trajectory(PoseSE3(translation=[2, 0, 1.5]), [1, 0, 0], 0.4, 10)
    a = synthesize(spec, SensorModel(rays=200), traj, 0.01, seed=5)
    b = synthesize(spec, SensorModel(rays=200), traj, 0.01, seed=5)
    assert np.array_equal(a.map_cloud.points, b.map_cloud.points)
    assert all(np.array_equal(x[1].points, y[1].points) for x, y in zip(a.scans, b.scans))
    assert np.allclose(a.priors[2].t, b.priors[2].t)
    assert len(set(derive_seeds(5))) == 3
