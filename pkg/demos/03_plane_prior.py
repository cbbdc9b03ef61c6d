"""Fuse a relative-motion prior on a flat ground plane.

A single plane observes only z, roll and pitch. ICP alone cannot move x, y
or yaw away from its starting guess, so a wrong guess stays wrong. With the
prior factor, the missing axes take their value from the prior while the
plane still fixes the rest.

Run: python3 demos/03_plane_prior.py
"""

from pathlib import Path

import numpy as np

from degenloc import (
    FusionProblem,
    PoseSE3,
    PriorFactor,
    compose,
    find_correspondences,
    joint_optimize,
    label_histogram,
    local_coordinates,
    prior_weights,
    scan_confidence,
    simulate_scan,
    solve_registration,
)
from degenloc.config import load_config
from degenloc.pointcloud import SpatialIndex
from degenloc.scenes import generate_map

cfg = load_config(Path(__file__).resolve().parent.parent / "configs" / "plane.toml")
plane = generate_map(cfg.scene, seed=cfg.seed)
index = SpatialIndex(plane)

previous = PoseSE3.from_xyz_rpy(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
motion = PoseSE3.from_xyz_rpy(0.3, 0.1, 0.0, 0.0, 0.0, 0.05)
truth = compose(previous, motion)
scan = simulate_scan(plane, index, truth, cfg.sensor)

# start from the previous pose, as if the motion were unknown
icp = solve_registration(scan, plane, index, previous, cfg.registration)

pairs = find_correspondences(scan, index, plane, previous, cfg.registration.max_dist)
hist, _, _ = label_histogram(pairs, previous)
conf = scan_confidence(hist)
prior = PriorFactor.from_pose(motion, prior_weights(conf))
problem = FusionProblem(
    pairs, prior, init=previous, reference_pose=previous,
    source=scan, target=plane, target_index=index, confidence=conf,
)
fused = joint_optimize(problem, cfg.registration)

print("confidence:", {k: round(v, 2) for k, v in conf.as_dict().items()})
for name, pose in (("ICP only", icp.pose), ("ICP + prior", fused.pose)):
    e = local_coordinates(truth, pose)
    print(f"{name:12s} xy error {np.linalg.norm(e[3:5]) * 100:6.2f} cm, yaw error {np.degrees(abs(e[2])):.3f} deg, z error {abs(e[5]) * 1000:.3f} mm")
