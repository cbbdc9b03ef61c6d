import json

import numpy as np
import pytest

from degenloc import io as dio
from degenloc.errors import MalformedFile, UnsupportedFormat
from degenloc.liegroup import PoseSE3
from degenloc.pointcloud import PointCloud


def sample_cloud():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(20, 3))
    n = rng.normal(size=(20, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    n[3] = np.nan
    col = rng.integers(0, 256, (20, 3))
    return PointCloud(pts, n, rng.uniform(0, 1, 20), col)


def test_ply_roundtrip_to_nine_digits(tmp_path):
    c = sample_cloud()
    dio.write_ply(tmp_path / "a.ply", c)
    back = dio.load_cloud(tmp_path / "a.ply")
    assert np.allclose(back.points, c.points, rtol=1e-8, atol=1e-12)
    assert np.allclose(back.normals, c.normals, rtol=1e-8, equal_nan=True)
    assert np.allclose(back.planarity, c.planarity, rtol=1e-8)
    assert np.array_equal(back.colors, c.colors)
    dio.write_ply(tmp_path / "b.ply", back)
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()


def test_ply_points_only_and_empty(tmp_path):
    dio.write_ply(tmp_path / "e.ply", PointCloud(np.zeros((0, 3))))
    assert len(dio.read_ply(tmp_path / "e.ply")) == 0
    dio.write_ply(tmp_path / "p.ply", PointCloud([[1.0, 2.0, 3.0]]))
    back = dio.read_ply(tmp_path / "p.ply")
    assert back.normals is None and np.allclose(back.points, [[1, 2, 3]])


@pytest.mark.parametrize(
    "text",
    [
        "not a ply\n",
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 a 0\n",
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n",
    ],
)
def test_malformed_ply(tmp_path, text):
    (tmp_path / "bad.ply").write_text(text)
    with pytest.raises(MalformedFile):
        dio.read_ply(tmp_path / "bad.ply")


def test_binary_ply_and_unknown_suffix(tmp_path):
    (tmp_path / "b.ply").write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
    with pytest.raises(UnsupportedFormat):
        dio.read_ply(tmp_path / "b.ply")
    with pytest.raises(UnsupportedFormat):
        dio.load_cloud(tmp_path / "x.xyz")


def test_pcd_with_normals(tmp_path):
    text = (
        "VERSION .7\nFIELDS x y z normal_x normal_y normal_z\nSIZE 4 4 4 4 4 4\nTYPE F F F F F F\n"
        "COUNT 1 1 1 1 1 1\nWIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\n"
        "0 0 0 0 0 1\n1 2 3 1 0 0\n"
    )
    (tmp_path / "c.pcd").write_text(text)
    c = dio.load_cloud(tmp_path / "c.pcd")
    assert np.allclose(c.points, [[0, 0, 0], [1, 2, 3]])
    assert np.allclose(c.normals, [[0, 0, 1], [1, 0, 0]])


def test_tum_roundtrip(tmp_path):
    poses = [PoseSE3.from_xyz_rpy(i, -i, 0.5, 0.1 * i, 0, 0.2) for i in range(4)]
    stamps = [0.0, 0.1, 0.2, 0.3]
    dio.write_tum(tmp_path / "t.txt", stamps, poses)
    lines = (tmp_path / "t.txt").read_text().splitlines()
    assert len(lines) == 4 and all(len(line.split()) == 8 for line in lines)
    s, back = dio.read_tum(tmp_path / "t.txt")
    assert np.allclose(s, stamps)
    for a, b in zip(poses, back):
        assert np.allclose(a.matrix(), b.matrix(), atol=1e-8)


def test_tum_bad_line(tmp_path):
    (tmp_path / "t.txt").write_text("# header\n0 1 2 3 0 0 0\n")
    with pytest.raises(MalformedFile):
        dio.read_tum(tmp_path / "t.txt")


def test_priors_roundtrip_keyed_by_stamp(tmp_path):
    rels = [PoseSE3.from_rotvec([0, 0, 0.01], [0.1, 0, 0]), PoseSE3.from_rotvec([0, 0.02, 0], [0.1, 0.01, 0])]
    dio.write_priors(tmp_path / "p.csv", [0.1, 0.2], rels)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == ",".join(dio.PRIOR_HEADER)
    back = dio.read_priors(tmp_path / "p.csv")
    assert sorted(back) == [0.1, 0.2]
    assert np.allclose(back[0.2].matrix(), rels[1].matrix(), atol=1e-8)


def test_priors_missing_column(tmp_path):
    (tmp_path / "p.csv").write_text("timestamp,dx\n0,1\n")
    with pytest.raises(MalformedFile):
        dio.read_priors(tmp_path / "p.csv")


def test_json_rounded_and_sorted(tmp_path):
    dio.write_json(tmp_path / "m.json", {"b": 1 / 3, "a": [np.float64(2 / 3), np.int64(4)], "c": None})
    text = (tmp_path / "m.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    doc = json.loads(text)
    assert doc["b"] == 0.333333333 and doc["a"] == [0.666666667, 4]


def test_atomic_write_leaves_no_temp_files(tmp_path):
    dio.atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
