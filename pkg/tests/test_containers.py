import numpy as np
import pytest

from chimrom import containers
from chimrom.errors import IoError


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    fields = {"T_air": rng.standard_normal((5, 8)),
              "T_pcm": rng.standard_normal((3, 8)),
              "u_air": rng.standard_normal((5, 9))}
    path = tmp_path / "snap.chrd"
    containers.write_snapshot(path, (8, 5, 3, 2), 12.5, 600.0, 45.0, 22.3, fields)
    back = containers.read_snapshot(path)
    assert back["dims"] == (8, 5, 3, 2)
    assert back["time"] == 12.5 and back["gs"] == 600.0
    assert back["t_room"] == 22.3
    for name, arr in fields.items():
        assert np.array_equal(back["fields"][name], arr)


def test_snapshot_write_is_deterministic(tmp_path):
    fields = {"T_air": np.linspace(0, 1, 12).reshape(3, 4)}
    p1, p2 = tmp_path / "a.chrd", tmp_path / "b.chrd"
    containers.write_snapshot(p1, (4, 3, 0, 0), 1.0, 600.0, 45.0, 22.0, fields)
    containers.write_snapshot(p2, (4, 3, 0, 0), 1.0, 600.0, 45.0, 22.0, fields)
    assert containers.sha256_file(p1) == containers.sha256_file(p2)


def test_basis_round_trip(tmp_path):
    phi = np.linalg.qr(np.random.default_rng(1).standard_normal((40, 6)))[0]
    sigma = np.sort(np.random.default_rng(2).uniform(0, 5, 10))[::-1]
    path = tmp_path / "basis.chrb"
    containers.write_basis(path, 2, phi, sigma, (8, 3, 1, 1), "ab" * 32)
    back = containers.read_basis(path)
    assert back["window"] == 2
    assert back["manifest_hash"] == "ab" * 32
    assert np.array_equal(back["phi"], phi)
    assert np.array_equal(back["sigma"], sigma)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.chrd"
    path.write_bytes(b"NOPE" + b"\0" * 64)
    with pytest.raises(IoError):
        containers.read_snapshot(path)


def test_kind_mismatch_rejected(tmp_path):
    path = tmp_path / "m.chrd"
    containers.write_matrix(path, "f", np.eye(3))
    with pytest.raises(IoError):
        containers.read_snapshot(path)


def test_dump_container_csv(tmp_path):
    path = tmp_path / "m.chrd"
    containers.write_matrix(path, "vf", np.array([[0.0, 1.5], [2.5, 0.0]]))
    out = tmp_path / "m.csv"
    containers.dump_container_csv(path, out)
    header, rows = containers.read_units_csv(out)
    assert header == ["block", "row", "col", "value"]
    assert ["vf", "0", "1", "1.5"] in rows


def test_measurements_csv_round_trip(tmp_path):
    times = np.array([0.0, 30.0, 60.0])
    vals = np.arange(9.0).reshape(3, 3) + 0.125
    ids = ["s001", "s002", "s003"]
    path = tmp_path / "meas.csv"
    containers.write_measurements_csv(path, times, vals, ids)
    t2, v2, ids2 = containers.read_measurements_csv(path)
    assert np.array_equal(t2, times)
    assert np.array_equal(v2, vals)
    assert ids2 == ids
    # units comment line present
    assert path.read_text().startswith("# units:")


def test_vtk_writer_shapes(tmp_path):
    path = tmp_path / "f.vtk"
    containers.write_vtk_rectilinear(path, np.linspace(0, 1, 4), np.linspace(0, 2, 3),
                                     {"T": np.arange(6.0).reshape(2, 3)})
    text = path.read_text()
    assert "RECTILINEAR_GRID" in text and "CELL_DATA 6" in text
    with pytest.raises(IoError):
        containers.write_vtk_rectilinear(path, np.linspace(0, 1, 4),
                                         np.linspace(0, 2, 3),
                                         {"T": np.zeros((3, 3))})


def test_manifest_round_trip(tmp_path):
    payload = {"b": 2, "a": [1, 2], "hash": "ff" * 32}
    path = tmp_path / "manifest.json"
    containers.write_manifest(path, payload)
    assert containers.read_manifest(path) == payload
