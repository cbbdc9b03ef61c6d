"""Spot the unobservable direction in a long corridor.

Walls, floor and ceiling pin down y, z and all rotations, but nothing in the
scan resists sliding along the corridor axis. Two views of that fact agree:
the weakest eigenvector of the alignment matrix points along x, and almost no
correspondence votes for x, so its confidence collapses.

Run: python3 demos/02_corridor_degeneracy.py
"""

from pathlib import Path

from degenloc import (
    alignment_matrix,
    degeneracy_report,
    find_correspondences,
    label_histogram,
    scan_confidence,
    simulate_scan,
)
from degenloc.config import load_config
from degenloc.pointcloud import SpatialIndex
from degenloc.registration import AXIS_NAMES
from degenloc.scenes import generate_map

cfg = load_config(Path(__file__).resolve().parent.parent / "configs" / "corridor.toml")
corridor = generate_map(cfg.scene, seed=cfg.seed)
index = SpatialIndex(corridor)
pose = cfg.trajectory.build().poses[40]

scan = simulate_scan(corridor, index, pose, cfg.sensor)
pairs = find_correspondences(scan, index, corridor, pose, cfg.registration.max_dist)
align = alignment_matrix(pairs, pose)
hist, _, _ = label_histogram(pairs, pose)
conf = scan_confidence(hist)
report = degeneracy_report(align, conf)

evals, evecs = align.eig()
weakest = evecs[:, 0]
print(f"{len(pairs)} correspondences at x = {pose.translation[0]:.1f} m")
print(f"smallest eigenvalue {evals[0]:.3g}, largest {evals[-1]:.3g}")
print("weakest direction:", {n: round(float(v), 3) for n, v in zip(AXIS_NAMES, weakest) if abs(v) > 0.05})
print("label counts      :", dict(zip(AXIS_NAMES, hist.counts.tolist())))
print("confidence        :", {k: round(v, 3) for k, v in conf.as_dict().items()})
print("low-confidence axes:", report.low_confidence)
