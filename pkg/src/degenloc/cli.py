"""Command-line entry point: ``degenloc {synth,register,localize,eval}``.

Exit codes: 0 success, 2 configuration or parse error, 3 registration
infeasible, 4 more than half of a sequence's scans failed.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as dio
from .config import ConfigError, InputSpec, RunConfig, load_config
from .errors import DegenlocError, InsufficientCorrespondences, MalformedFile
from .evaluation import DEFAULT_OUTLIER_THRESHOLD, associate, ate, build_map, map_outlier_rate
from .fusion import run_localization
from .liegroup import PoseSE3
from .observability import (
    NO_LABEL,
    degeneracy_report,
    label_histogram,
    observability_scan,
    scan_confidence,
)
from .pointcloud import PointCloud, SpatialIndex, estimate_normals
from .registration import RegistrationConfig, find_correspondences, solve_registration
from .scenes import synthesize
from .trajectory import Trajectory

log = logging.getLogger("degenloc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SEQUENCE = 4

SCAN_SUFFIXES = (".ply", ".pcd")
STAMPS_FILE = "stamps.csv"
REPORT_HEADER = [
    "timestamp", "status", "conf_x", "conf_y", "conf_z", "conf_roll", "conf_pitch", "conf_yaw",
    "min_eigenvalue", "iterations", "final_error", "converged", "correspondences", "prior_used",
]


class UsageError(Exception):
    """Bad command-line usage; maps to exit code 2."""


# ------------------------------------------------------------------ helpers

def _config(args) -> Optional[RunConfig]:
    if not getattr(args, "config", None):
        return None
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg: Optional[RunConfig]) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg is not None:
        return cfg.output_dir
    return Path("out")


def _with_normals(cloud: PointCloud) -> PointCloud:
    if cloud.normals is None or cloud.planarity is None:
        log.info("estimating normals for %d points", len(cloud))
        cloud = estimate_normals(cloud)
    return cloud


def _parse_pose(values) -> PoseSE3:
    if values is None:
        return PoseSE3.identity()
    if len(values) != 7:
        raise UsageError("--init takes 7 numbers: tx ty tz qx qy qz qw")
    return PoseSE3(values[3:], values[:3])


def _registration_cfg(args, cfg: Optional[RunConfig]) -> RegistrationConfig:
    reg = cfg.registration if cfg is not None else RegistrationConfig()
    overrides = {}
    for name in ("max_dist", "max_iterations"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    return replace(reg, **overrides) if overrides else reg


def _scan_files(scan_dir: Path) -> list[Path]:
    if not scan_dir.is_dir():
        raise ConfigError(f"scan directory {scan_dir} does not exist")
    return sorted(p for p in scan_dir.iterdir() if p.suffix.lower() in SCAN_SUFFIXES)


def _scan_stamps(scan_dir: Path, files: list[Path], gt: Optional[Trajectory]) -> list[float]:
    """Timestamps from ``stamps.csv``, else from ground truth of equal length, else the index."""
    stamp_file = scan_dir / STAMPS_FILE
    if stamp_file.exists():
        with open(stamp_file, newline="") as f:
            table = {row["file"]: float(row["timestamp"]) for row in csv.DictReader(f)}
        try:
            return [table[p.name] for p in files]
        except KeyError as exc:
            raise MalformedFile(f"{stamp_file}: no timestamp for {exc.args[0]}") from None
    if gt is not None and len(gt) == len(files):
        return [float(t) for t in gt.timestamps]
    return [float(i) for i in range(len(files))]


def _read_scan(path: Path) -> Optional[PointCloud]:
    try:
        return dio.load_cloud(path)
    except (DegenlocError, OSError, ValueError) as exc:
        log.warning("skipping unreadable scan %s: %s", path, exc)
        return None


def _read_trajectory(path) -> Trajectory:
    stamps, poses = dio.read_tum(path)
    return Trajectory(stamps, poses)


# ----------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    cfg = _config(args)
    if cfg is None:
        raise UsageError("synth needs --config")
    if cfg.scene is None:
        raise ConfigError("synth needs a [scene] section")
    out = _out_dir(args, cfg)
    traj = cfg.trajectory.build()
    run = synthesize(cfg.scene, cfg.sensor, traj, cfg.prior_sigma, cfg.seed, cfg.prior_rot_sigma)

    dio.write_ply(out / "map.ply", run.map_cloud)
    names = []
    for k, (_, scan) in enumerate(run.scans):
        name = f"{k:04d}.ply"
        dio.write_ply(out / "scans" / name, scan)
        names.append(name)
    dio.write_csv(out / "scans" / STAMPS_FILE, ["file", "timestamp"],
                  [[n, float(t)] for n, t in zip(names, traj.timestamps)])
    dio.write_tum(out / "gt_traj.txt", traj.timestamps, traj.poses)
    dio.write_priors(out / "priors.csv", traj.timestamps[1:], run.priors[1:])
    print(f"wrote {len(run.map_cloud)} map points and {len(run.scans)} scans to {out}")
    return EXIT_OK


def cmd_register(args) -> int:
    cfg = _config(args)
    reg = _registration_cfg(args, cfg)
    source = dio.load_cloud(args.source)
    target = _with_normals(dio.load_cloud(args.target))
    init = _parse_pose(args.init)
    index = SpatialIndex(target)
    result = solve_registration(source, target, index, init, reg)

    print(dio.pose_to_tum(0.0, result.pose))
    print(f"final_error {dio.fmt(result.final_error)}")
    print(f"iterations {result.iterations}")

    if args.report:
        out = Path(args.report)
        pairs = find_correspondences(source, index, target, init, reg.max_dist)
        hist, _, trans_labels = label_histogram(pairs, init)
        conf = scan_confidence(hist)
        report = degeneracy_report(result.alignment, conf, args.low_threshold)
        doc = {
            "pose": [float(v) for v in (*result.pose.translation, *result.pose.rotation)],
            "final_error": float(result.final_error),
            "iterations": result.iterations,
            "converged": bool(result.converged),
            "correspondences": result.correspondences_used,
            "degeneracy": report.to_dict(),
        }
        dio.write_json(out / "degeneracy.json", doc)
        per_point = np.full(len(source), NO_LABEL, dtype=np.int64)
        per_point[pairs.source_ids] = trans_labels
        dio.write_ply(out / "observability.ply", observability_scan(source.transformed(result.pose), per_point))
    return EXIT_OK


def _load_inputs(cfg: RunConfig, inp: InputSpec, use_prior: bool):
    map_cloud = _with_normals(dio.load_cloud(inp.map))
    gt = _read_trajectory(inp.ground_truth) if inp.ground_truth and Path(inp.ground_truth).exists() else None
    files = _scan_files(Path(inp.scans))
    stamps = _scan_stamps(Path(inp.scans), files, gt)
    scans = [(t, _read_scan(p)) for t, p in zip(stamps, files)]
    prior_path = inp.priors or cfg.prior_path
    priors = dio.read_priors(prior_path) if (use_prior and prior_path and Path(prior_path).exists()) else None
    initial = gt.poses[0] if gt is not None else PoseSE3.identity()
    return map_cloud, scans, priors, gt, initial


def _input_from_dir(d: Path) -> InputSpec:
    return InputSpec(scans=d / "scans", map=d / "map.ply", priors=d / "priors.csv", ground_truth=d / "gt_traj.txt")


def cmd_localize(args) -> int:
    cfg = _config(args)
    if args.input:
        inp = _input_from_dir(Path(args.input))
        base = cfg if cfg is not None else RunConfig(input=inp)
        cfg = replace(base, scene=None, input=inp)
    if cfg is None:
        raise UsageError("localize needs --config or --input")
    reg = _registration_cfg(args, cfg)
    out = _out_dir(args, cfg)
    use_prior = not args.no_prior
    obs_every = cfg.obs_every if args.obs_every is None else args.obs_every

    if cfg.scene is not None:
        traj = cfg.trajectory.build()
        run = synthesize(cfg.scene, cfg.sensor, traj, cfg.prior_sigma, cfg.seed, cfg.prior_rot_sigma)
        map_cloud, map_index, scans = run.map_cloud, run.map_index, run.scans
        priors, gt, initial = (run.priors if use_prior else None), traj, traj.poses[0]
        dio.write_ply(out / "map.ply", map_cloud)
        dio.write_tum(out / "gt_traj.txt", traj.timestamps, traj.poses)
    else:
        map_cloud, scans, priors, gt, initial = _load_inputs(cfg, cfg.input, use_prior)
        map_index = SpatialIndex(map_cloud)

    result = run_localization(map_cloud, scans, priors, reg, map_index, initial, use_prior=use_prior)
    est = result.trajectory
    dio.write_tum(out / "est_traj.txt", est.timestamps, est.poses)

    rows, conf_rows = [], []
    nan6 = [float("nan")] * 6
    for r in result.reports:
        conf = r.confidence.vector.tolist() if r.confidence is not None else nan6
        # columns run x, y, z, roll, pitch, yaw
        conf_xyz = [*conf[3:], *conf[:3]]
        rows.append([r.timestamp, r.status, *conf_xyz, float(r.min_eigenvalue), r.iterations,
                     float(r.final_error), int(r.converged), r.correspondences, int(r.prior_used)])
        conf_rows.append([r.timestamp, *conf_xyz])
    dio.write_csv(out / "report.csv", REPORT_HEADER, rows)
    dio.write_csv(out / "confidence.csv", dio.CONFIDENCE_HEADER, conf_rows)

    if obs_every > 0:
        for k, r in enumerate(result.reports):
            if k % obs_every or r.observed_points is None:
                continue
            cloud = PointCloud(r.observed_points, frame_id="map")
            dio.write_ply(out / "obs" / f"{k:04d}.ply", observability_scan(cloud, r.observed_labels))

    built = build_map([s for _, s in scans], est.poses)
    dio.write_ply(out / "built_map.ply", built)

    n, failed = len(result.reports), result.failures
    print(f"localized {n - failed}/{n} scans, trajectory written to {out / 'est_traj.txt'}")
    if gt is not None:
        err = ate(associate(est, gt), align=True)
        print(f"ate_rmse {dio.fmt(err.rmse)}")
    if n and failed > n / 2:
        log.error("%d of %d scans failed", failed, n)
        return EXIT_SEQUENCE
    return EXIT_OK


def cmd_eval(args) -> int:
    est = _read_trajectory(args.est)
    gt = _read_trajectory(args.gt)
    err = ate(associate(est, gt, args.max_dt), align=not args.no_align)
    metrics = {
        "ate_rmse": err.rmse,
        "ate_mean": err.mean,
        "ate_median": err.median,
        "ate_max": err.max,
        "aligned": err.aligned,
        "n_poses": len(err.errors),
        "threshold": args.threshold,
        "outlier_fraction": None,
        "n_points": 0,
    }
    if args.built and args.gt_map:
        built = dio.load_cloud(args.built)
        gt_map = dio.load_cloud(args.gt_map)
        quality = map_outlier_rate(built, SpatialIndex(gt_map), args.threshold)
        metrics["outlier_fraction"] = quality.outlier_fraction
        metrics["n_points"] = quality.points_evaluated
    elif args.built or args.gt_map:
        raise UsageError("--built and --gt-map must be given together")
    for key in ("ate_rmse", "outlier_fraction"):
        v = metrics[key]
        print(f"{key} {'n/a' if v is None else dio.fmt(v)}")
    out = _out_dir(args, None) if args.out else None
    if out is not None:
        dio.write_json(out / "metrics.json", metrics)
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="override the config seed")
    parser.add_argument("--config", default=default, help="TOML run configuration")
    parser.add_argument("--out", default=default, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degenloc", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic map, scans, ground truth and priors")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("register", help="align one scan to a target cloud")
    _global_flags(p, suppress=True)
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--init", type=float, nargs=7, metavar="V", help="initial pose tx ty tz qx qy qz qw")
    p.add_argument("--max-dist", dest="max_dist", type=float)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--report", help="directory for degeneracy.json and observability.ply")
    p.add_argument("--low-threshold", dest="low_threshold", type=float, default=0.5,
                   help="confidence below which an axis is reported (default 0.5)")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("localize", help="localize a scan sequence against a map")
    _global_flags(p, suppress=True)
    p.add_argument("--input", help="directory written by 'synth' (map.ply, scans/, priors.csv, gt_traj.txt)")
    p.add_argument("--no-prior", dest="no_prior", action="store_true", help="ICP only: no prior fusion")
    p.add_argument("--obs-every", dest="obs_every", type=int, help="export an observability scan every N scans (0: off)")
    p.add_argument("--max-dist", dest="max_dist", type=float)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="trajectory and map accuracy metrics")
    _global_flags(p, suppress=True)
    p.add_argument("--est", required=True, help="estimated trajectory (TUM)")
    p.add_argument("--gt", required=True, help="ground-truth trajectory (TUM)")
    p.add_argument("--built", help="built map (PLY/PCD)")
    p.add_argument("--gt-map", dest="gt_map", help="ground-truth map (PLY/PCD)")
    p.add_argument("--threshold", type=float, default=DEFAULT_OUTLIER_THRESHOLD)
    p.add_argument("--max-dt", dest="max_dt", type=float, default=0.02)
    p.add_argument("--no-align", dest="no_align", action="store_true")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InsufficientCorrespondences as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, UsageError, DegenlocError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
