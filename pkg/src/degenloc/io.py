"""Text file formats: ASCII PLY/PCD clouds, TUM trajectories and CSV tables.

All floats are written with 9 significant digits so that repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import MalformedFile, UnsupportedFormat
from .liegroup import PoseSE3
from .pointcloud import PointCloud

FLOAT_FMT = "%.9g"


def fmt(x: float) -> str:
    return FLOAT_FMT % x


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rounded(obj):
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    """Sorted-key JSON with floats rounded to the shared 9-digit precision."""
    atomic_write_text(path, json.dumps(_rounded(obj), indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------- clouds

def load_cloud(path, format: Optional[str] = None) -> PointCloud:
    """Read an ASCII PLY or PCD file. ``format`` defaults to the file suffix."""
    path = Path(path)
    fmt_name = (format or path.suffix.lstrip(".")).upper()
    if fmt_name == "PLY":
        return read_ply(path)
    if fmt_name == "PCD":
        return read_pcd(path)
    raise UnsupportedFormat(f"unsupported point-cloud format {fmt_name!r}")


def read_ply(path) -> PointCloud:
    with open(path, "r", encoding="ascii", errors="replace") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MalformedFile(f"{path}: missing 'ply' magic")
    n_vertex = None
    props: list[str] = []
    in_vertex = False
    end = None
    for i, line in enumerate(lines[1:], start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise UnsupportedFormat(f"{path}: only ASCII PLY is supported")
        elif tok[0] == "element":
            if len(tok) != 3:
                raise MalformedFile(f"{path}: bad element line {line!r}")
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                try:
                    n_vertex = int(tok[2])
                except ValueError:
                    raise MalformedFile(f"{path}: bad vertex count {tok[2]!r}") from None
            elif int(tok[2]) != 0:
                raise UnsupportedFormat(f"{path}: element {tok[1]!r} not supported")
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise UnsupportedFormat(f"{path}: list properties not supported")
            props.append(tok[-1])
        elif tok[0] == "end_header":
            end = i
            break
    if end is None or n_vertex is None:
        raise MalformedFile(f"{path}: incomplete header")
    for axis in "xyz":
        if axis not in props:
            raise MalformedFile(f"{path}: missing property {axis}")
    body = [ln for ln in lines[end + 1 :] if ln.strip()]
    if len(body) != n_vertex:
        raise MalformedFile(f"{path}: header declares {n_vertex} vertices, found {len(body)}")
    if n_vertex == 0:
        return PointCloud(np.zeros((0, 3)))
    try:
        data = np.loadtxt(_io.StringIO("\n".join(body)), ndmin=2)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    if data.shape[1] != len(props):
        raise MalformedFile(f"{path}: expected {len(props)} values per vertex, got {data.shape[1]}")
    col = {name: data[:, j] for j, name in enumerate(props)}
    pts = np.column_stack([col["x"], col["y"], col["z"]])
    normals = None
    if all(k in col for k in ("nx", "ny", "nz")):
        normals = np.column_stack([col["nx"], col["ny"], col["nz"]])
    colors = None
    if all(k in col for k in ("red", "green", "blue")):
        colors = np.column_stack([col["red"], col["green"], col["blue"]])
    planarity = col.get("planarity")
    return PointCloud(pts, normals, planarity, colors)


def write_ply(path, cloud: PointCloud) -> None:
    n = len(cloud)
    header = ["ply", "format ascii 1.0", f"element vertex {n}"]
    header += [f"property float {a}" for a in "xyz"]
    cols = [cloud.points]
    fmts = [FLOAT_FMT] * 3
    if cloud.normals is not None:
        header += [f"property float {a}" for a in ("nx", "ny", "nz")]
        cols.append(cloud.normals)
        fmts += [FLOAT_FMT] * 3
    if cloud.planarity is not None:
        header.append("property float planarity")
        cols.append(cloud.planarity[:, None])
        fmts.append(FLOAT_FMT)
    if cloud.colors is not None:
        header += [f"property uchar {c}" for c in ("red", "green", "blue")]
        cols.append(cloud.colors.astype(float))
        fmts += ["%d"] * 3
    header.append("end_header")
    buf = _io.StringIO()
    buf.write("\n".join(header) + "\n")
    if n:
        np.savetxt(buf, np.hstack(cols), fmt=fmts)
    atomic_write_text(path, buf.getvalue())


def read_pcd(path) -> PointCloud:
    with open(path, "r", encoding="ascii", errors="replace") as f:
        lines = f.read().splitlines()
    fields: list[str] = []
    n_points = None
    start = None
    for i, line in enumerate(lines):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        key = tok[0].upper()
        if key == "FIELDS":
            fields = tok[1:]
        elif key == "POINTS":
            n_points = int(tok[1])
        elif key == "DATA":
            if len(tok) < 2 or tok[1].lower() != "ascii":
                raise UnsupportedFormat(f"{path}: only ASCII PCD is supported")
            start = i + 1
            break
    if start is None or n_points is None or not fields:
        raise MalformedFile(f"{path}: incomplete PCD header")
    for axis in "xyz":
        if axis not in fields:
            raise MalformedFile(f"{path}: missing field {axis}")
    body = [ln for ln in lines[start:] if ln.strip()]
    if len(body) != n_points:
        raise MalformedFile(f"{path}: header declares {n_points} points, found {len(body)}")
    if n_points == 0:
        return PointCloud(np.zeros((0, 3)))
    try:
        data = np.loadtxt(_io.StringIO("\n".join(body)), ndmin=2)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    if data.shape[1] != len(fields):
        raise MalformedFile(f"{path}: expected {len(fields)} values per point")
    col = {name: data[:, j] for j, name in enumerate(fields)}
    pts = np.column_stack([col["x"], col["y"], col["z"]])
    normals = None
    if all(k in col for k in ("normal_x", "normal_y", "normal_z")):
        normals = np.column_stack([col["normal_x"], col["normal_y"], col["normal_z"]])
    return PointCloud(pts, normals)


# --------------------------------------------------------------- trajectories

def pose_to_tum(timestamp: float, pose: PoseSE3) -> str:
    vals = [timestamp, *pose.translation, *pose.rotation]
    return " ".join(fmt(v) for v in vals)


def write_tum(path, timestamps: Sequence[float], poses: Sequence[PoseSE3]) -> None:
    lines = [pose_to_tum(t, p) for t, p in zip(timestamps, poses)]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_tum(path) -> tuple[np.ndarray, list[PoseSE3]]:
    stamps, poses = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 8:
                raise MalformedFile(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            try:
                v = [float(x) for x in parts]
            except ValueError:
                raise MalformedFile(f"{path}:{lineno}: non-numeric field") from None
            stamps.append(v[0])
            poses.append(PoseSE3(v[4:8], v[1:4]))
    return np.asarray(stamps), poses


# ---------------------------------------------------------------------- tables

PRIOR_HEADER = ["timestamp", "dx", "dy", "dz", "qx", "qy", "qz", "qw"]
CONFIDENCE_HEADER = ["timestamp", "conf_x", "conf_y", "conf_z", "conf_roll", "conf_pitch", "conf_yaw"]


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, _csv_text(header, rows))


def write_priors(path, timestamps: Sequence[float], rel_poses: Sequence[PoseSE3]) -> None:
    rows = [
        [float(t), *map(float, p.translation), *map(float, p.rotation)]
        for t, p in zip(timestamps, rel_poses)
    ]
    write_csv(path, PRIOR_HEADER, rows)


def read_priors(path) -> dict[float, PoseSE3]:
    """Relative motions keyed by the timestamp of the scan they end at."""
    out: dict[float, PoseSE3] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [h for h in PRIOR_HEADER if h not in (reader.fieldnames or [])]
        if missing:
            raise MalformedFile(f"{path}: missing columns {missing}")
        for row in reader:
            try:
                v = {k: float(row[k]) for k in PRIOR_HEADER}
            except (TypeError, ValueError):
                raise MalformedFile(f"{path}: bad row {row}") from None
            out[v["timestamp"]] = PoseSE3(
                [v["qx"], v["qy"], v["qz"], v["qw"]], [v["dx"], v["dy"], v["dz"]]
            )
    return out
