import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from degenloc import io as dio
from degenloc.cli import main
from degenloc.pointcloud import PointCloud
from degenloc.scenes import SceneSpec, generate_map

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corridor_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corridor")
    assert run("synth", "--config", CONFIGS / "corridor.toml", "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def corridor_runs(corridor_dir, tmp_path_factory):
    base = tmp_path_factory.mktemp("corridor_runs")
    result = {}
    for name, extra in (("fused", []), ("icp", ["--no-prior"])):
        out = base / name
        assert run("localize", "--input", corridor_dir, "--out", out, *extra) == 0
        assert run("eval", "--est", out / "est_traj.txt", "--gt", corridor_dir / "gt_traj.txt",
                   "--built", out / "built_map.ply", "--gt-map", corridor_dir / "map.ply", "--out", out) == 0
        result[name] = out
    return result


def test_synth_writes_corridor_fixture(corridor_dir):
    scans = sorted((corridor_dir / "scans").glob("*.ply"))
    assert len(scans) == 101
    assert scans[0].name == "0000.ply" and scans[-1].name == "0100.ply"
    for name in ("map.ply", "gt_traj.txt", "priors.csv"):
        assert (corridor_dir / name).exists()
    assert len((corridor_dir / "gt_traj.txt").read_text().splitlines()) == 101
    with open(corridor_dir / "priors.csv") as f:
        assert len(list(csv.DictReader(f))) == 100
    assert dio.read_ply(corridor_dir / "map.ply").normals is not None


def test_synth_is_byte_identical(corridor_dir, tmp_path):
    assert run("synth", "--config", CONFIGS / "corridor.toml", "--out", tmp_path) == 0
    for path in corridor_dir.rglob("*"):
        if path.is_file():
            assert path.read_bytes() == (tmp_path / path.relative_to(corridor_dir)).read_bytes(), path


def test_synth_seed_flag_changes_output(tmp_path):
    cfg = tmp_path / "small.toml"
    cfg.write_text(
        '[scene]\nkind = "plane"\n[scene.dimensions]\nsize_x = 4.0\nsize_y = 4.0\n'
        "[trajectory]\nduration = 0.2\n[sensor]\nrays = 50\n"
    )
    assert run("synth", "--config", cfg, "--out", tmp_path / "a") == 0
    assert run("synth", "--config", cfg, "--out", tmp_path / "b", "--seed", "7") == 0
    assert run("--seed", "7", "synth", "--config", cfg, "--out", tmp_path / "c") == 0
    a, b, c = ((tmp_path / d / "map.ply").read_bytes() for d in "abc")
    assert a != b and b == c


def test_synth_missing_dimension_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[scene]\nkind = "corridor"\n[scene.dimensions]\nlength = 5.0\nheight = 3.0\n')
    assert run("synth", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "width" in capsys.readouterr().err


def test_synth_without_config_exits_2(tmp_path):
    assert run("synth", "--out", tmp_path) == 2


@pytest.fixture(scope="module")
def room_ply(tmp_path_factory):
    d = tmp_path_factory.mktemp("room")
    cloud = generate_map(SceneSpec("room", {"length": 6.0, "width": 4.0, "height": 3.0}, density=40), 0)
    dio.write_ply(d / "room.ply", PointCloud(cloud.points))
    return d / "room.ply"


def test_register_identical_clouds(room_ply, capsys):
    assert run("register", room_ply, room_ply) == 0
    lines = capsys.readouterr().out.splitlines()
    vals = np.array(lines[0].split(), dtype=float)
    assert np.allclose(vals[1:4], 0.0, atol=1e-9) and np.allclose(np.abs(vals[7]), 1.0)
    assert float(lines[1].split()[1]) <= 1e-12
    assert lines[2].startswith("iterations")


def test_register_plane_report_flags_x_and_y(tmp_path):
    plane = generate_map(SceneSpec("plane", {"size_x": 6.0, "size_y": 6.0}, density=50), 0)
    dio.write_ply(tmp_path / "target.ply", plane)
    dio.write_ply(tmp_path / "source.ply", PointCloud(plane.points[::3] + [0.05, 0.0, 0.1]))
    assert run("register", tmp_path / "source.ply", tmp_path / "target.ply", "--report", tmp_path / "rep") == 0
    doc = json.loads((tmp_path / "rep" / "degeneracy.json").read_text())
    assert {"x", "y"} <= set(doc["degeneracy"]["low_confidence"])
    assert doc["pose"][2] == pytest.approx(-0.1, abs=1e-3)
    obs = dio.read_ply(tmp_path / "rep" / "observability.ply")
    assert obs.colors is not None and np.all(obs.colors[:, 2] == 255)


def test_register_empty_source_exits_3(room_ply, tmp_path):
    dio.write_ply(tmp_path / "empty.ply", PointCloud(np.zeros((0, 3))))
    assert run("register", tmp_path / "empty.ply", room_ply) == 3


def test_register_unreadable_input_exits_2(room_ply, tmp_path):
    (tmp_path / "junk.ply").write_text("junk")
    assert run("register", tmp_path / "junk.ply", room_ply) == 2
    assert run("register", tmp_path / "missing.ply", room_ply) == 2


def test_localize_room_without_prior(tmp_path, capsys):
    assert run("localize", "--config", CONFIGS / "room.toml", "--out", tmp_path, "--no-prior") == 0
    assert run("eval", "--est", tmp_path / "est_traj.txt", "--gt", tmp_path / "gt_traj.txt", "--out", tmp_path) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["ate_rmse"] <= 0.01
    assert metrics["n_poses"] == 41
    with open(tmp_path / "report.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 41 and all(r["status"] == "ok" for r in rows)
    assert all(r["prior_used"] == "0" for r in rows)


def test_corridor_fusion_beats_icp_only(corridor_runs):
    fused = json.loads((corridor_runs["fused"] / "metrics.json").read_text())
    icp = json.loads((corridor_runs["icp"] / "metrics.json").read_text())
    assert fused["ate_rmse"] < icp["ate_rmse"]
    assert fused["outlier_fraction"] < icp["outlier_fraction"]
    assert fused["threshold"] == 0.1


def test_localize_outputs(corridor_runs):
    out = corridor_runs["fused"]
    assert len((out / "est_traj.txt").read_text().splitlines()) == 101
    with open(out / "confidence.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == dio.CONFIDENCE_HEADER
    assert all(float(r["conf_x"]) < 0.1 for r in rows)
    assert sorted(p.name for p in (out / "obs").glob("*.ply"))[:2] == ["0000.ply", "0010.ply"]
    assert len(list((out / "obs").glob("*.ply"))) == 11


def test_localize_is_deterministic(corridor_dir, corridor_runs, tmp_path):
    assert run("localize", "--input", corridor_dir, "--out", tmp_path) == 0
    for name in ("est_traj.txt", "report.csv", "confidence.csv"):
        assert (tmp_path / name).read_bytes() == (corridor_runs["fused"] / name).read_bytes()


def test_localize_skips_corrupt_scan(corridor_dir, tmp_path):
    data = tmp_path / "data"
    shutil.copytree(corridor_dir, data)
    (data / "scans" / "0050.ply").write_text("ply\nformat ascii 1.0\nelement vertex 9\n")
    assert run("localize", "--input", data, "--out", tmp_path / "out", "--obs-every", "0") == 0
    with open(tmp_path / "out" / "report.csv") as f:
        rows = list(csv.DictReader(f))
    assert rows[50]["status"].startswith("skipped")
    assert sum(r["status"] != "ok" for r in rows) == 1
    assert not (tmp_path / "out" / "obs").exists()


def test_localize_exit_4_when_most_scans_fail(corridor_dir, tmp_path):
    data = tmp_path / "data"
    shutil.copytree(corridor_dir, data)
    for path in sorted((data / "scans").glob("*.ply"))[:60]:
        path.write_text("broken")
    assert run("localize", "--input", data, "--out", tmp_path / "out") == 4


def test_localize_needs_a_source(tmp_path):
    assert run("localize", "--out", tmp_path) == 2


def test_eval_identity_and_threshold_limit(corridor_dir, corridor_runs, capsys):
    gt = corridor_dir / "gt_traj.txt"
    gmap = corridor_dir / "map.ply"
    assert run("eval", "--est", gt, "--gt", gt, "--built", gmap, "--gt-map", gmap) == 0
    out = capsys.readouterr().out
    assert "ate_rmse 0\n" in out and "outlier_fraction 0\n" in out
    icp = corridor_runs["icp"]
    assert run("eval", "--est", icp / "est_traj.txt", "--gt", gt, "--built", icp / "built_map.ply",
               "--gt-map", gmap, "--threshold", "1e9") == 0
    assert "outlier_fraction 0\n" in capsys.readouterr().out


def test_eval_unparsable_inputs_exit_2(tmp_path, corridor_dir):
    (tmp_path / "bad.txt").write_text("1 2 3\n")
    gt = corridor_dir / "gt_traj.txt"
    assert run("eval", "--est", tmp_path / "bad.txt", "--gt", gt) == 2
    assert run("eval", "--est", gt, "--gt", gt, "--built", tmp_path / "bad.txt", "--gt-map", tmp_path / "bad.txt") == 2
    assert run("eval", "--est", gt, "--gt", gt, "--built", corridor_dir / "map.ply") == 2
