"""Trajectory and map metrics on hand-made inputs.

Shows what ATE alignment absorbs (a rigid offset of the whole trajectory)
and what it does not (drift), and how the map outlier rate reacts to the
distance threshold.

Run: python3 demos/05_evaluation.py
"""

import numpy as np

from degenloc import PointCloud, PoseSE3, SpatialIndex, Trajectory, associate, ate, compose, map_outlier_rate

stamps = np.arange(50) * 0.1
gt = Trajectory(stamps, [PoseSE3.from_xyz_rpy(t, np.sin(t), 0.0, 0.0, 0.0, 0.0) for t in stamps])

offset = PoseSE3.from_xyz_rpy(2.0, -1.0, 0.5, 0.0, 0.0, 0.3)
shifted = Trajectory(stamps, [compose(offset, p) for p in gt.poses])
drifting = Trajectory(stamps, [PoseSE3(p.rotation, p.translation + [0.01 * k, 0, 0]) for k, p in enumerate(gt.poses)])

for name, est in (("rigid offset", shifted), ("linear drift", drifting)):
    raw = ate(associate(est, gt), align=False).rmse
    aligned = ate(associate(est, gt), align=True).rmse
    print(f"{name:12s} raw ATE {raw:.3f} m, aligned ATE {aligned:.3f} m")

rng = np.random.default_rng(0)
truth = PointCloud(np.column_stack([rng.uniform(-5, 5, (5000, 2)), np.zeros(5000)]))
index = SpatialIndex(truth)
built = PointCloud(truth.points[:2000] + [0, 0, 1] * rng.normal(0, 0.05, (2000, 1)))
for threshold in (0.02, 0.05, 0.1, 0.2):
    print(f"threshold {threshold:.2f} m: outlier rate {map_outlier_rate(built, index, threshold).outlier_fraction:.1%}")
