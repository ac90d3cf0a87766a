"""File formats: the CHRD binary container, CSV conventions, VTK export.

One little-endian container serves snapshots, reduced bases and generic
matrices; every writer is deterministic (no timestamps) so fixed-seed reruns
produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import IoError

MAGIC = b"CHRD"
VERSION = 1
KIND_SNAPSHOT = 1
KIND_BASIS = 2
KIND_MATRIX = 3

_HEAD = struct.Struct("<4sHH")
_BLOCK_HEAD = struct.Struct("<8sII")


def _write_block(fh, name: str, array: np.ndarray):
    data = np.ascontiguousarray(array, dtype="<f8")
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2:
        raise IoError(f"block {name!r} must be 1D or 2D")
    fh.write(_BLOCK_HEAD.pack(name.encode("ascii").ljust(8, b"\0"),
                              data.shape[0], data.shape[1]))
    fh.write(data.tobytes())


def _read_block(fh):
    head = fh.read(_BLOCK_HEAD.size)
    if len(head) < _BLOCK_HEAD.size:
        raise IoError("truncated block header")
    raw_name, ny, nx = _BLOCK_HEAD.unpack(head)
    payload = fh.read(8 * ny * nx)
    if len(payload) < 8 * ny * nx:
        raise IoError("truncated block payload")
    arr = np.frombuffer(payload, dtype="<f8").reshape(ny, nx).copy()
    return raw_name.rstrip(b"\0").decode("ascii"), arr


def _check_head(fh, expect_kind: int, path) -> None:
    head = fh.read(_HEAD.size)
    if len(head) < _HEAD.size:
        raise IoError(f"{path}: not a CHRD file (short header)")
    magic, version, kind = _HEAD.unpack(head)
    if magic != MAGIC:
        raise IoError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise IoError(f"{path}: unsupported container version {version}")
    if kind != expect_kind:
        raise IoError(f"{path}: container kind {kind}, expected {expect_kind}")


def write_snapshot(path, dims: tuple[int, int, int, int], time: float,
                   gs: float, theta_deg: float, t_room: float,
                   fields: dict[str, np.ndarray]) -> None:
    """dims = (nx, ny_air, ny_pcm, ny_glass); fields keyed by block name."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, KIND_SNAPSHOT))
        fh.write(struct.pack("<IIII", *dims))
        fh.write(struct.pack("<dddd", time, gs, theta_deg, t_room))
        fh.write(struct.pack("<I", len(fields)))
        for name in sorted(fields):
            _write_block(fh, name, fields[name])


def read_snapshot(path):
    path = Path(path)
    if not path.exists():
        raise IoError(f"snapshot file not found: {path}")
    with open(path, "rb") as fh:
        _check_head(fh, KIND_SNAPSHOT, path)
        dims = struct.unpack("<IIII", fh.read(16))
        time, gs, theta, t_room = struct.unpack("<dddd", fh.read(32))
        (n_blocks,) = struct.unpack("<I", fh.read(4))
        fields = {}
        for _ in range(n_blocks):
            name, arr = _read_block(fh)
            fields[name] = arr
    return {"dims": dims, "time": time, "gs": gs, "theta_deg": theta,
            "t_room": t_room, "fields": fields}


def write_basis(path, window: int, phi: np.ndarray, sigma: np.ndarray,
                dims: tuple[int, int, int, int], manifest_hash: str) -> None:
    path = Path(path)
    phi = np.ascontiguousarray(phi, dtype="<f8")
    sigma = np.ascontiguousarray(sigma, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, KIND_BASIS))
        fh.write(struct.pack("<IIII", window, phi.shape[1], phi.shape[0],
                             sigma.size))
        fh.write(struct.pack("<IIII", *dims))
        fh.write(manifest_hash.encode("ascii").ljust(64, b"\0")[:64])
        fh.write(phi.tobytes())
        fh.write(sigma.tobytes())


def read_basis(path):
    path = Path(path)
    if not path.exists():
        raise IoError(f"basis file not found: {path}")
    with open(path, "rb") as fh:
        _check_head(fh, KIND_BASIS, path)
        window, n_modes, n_rows, n_sv = struct.unpack("<IIII", fh.read(16))
        dims = struct.unpack("<IIII", fh.read(16))
        manifest_hash = fh.read(64).rstrip(b"\0").decode("ascii")
        phi = np.frombuffer(fh.read(8 * n_rows * n_modes),
                            dtype="<f8").reshape(n_rows, n_modes).copy()
        sigma = np.frombuffer(fh.read(8 * n_sv), dtype="<f8").copy()
    return {"window": window, "phi": phi, "sigma": sigma, "dims": dims,
            "manifest_hash": manifest_hash}


def write_matrix(path, name: str, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, KIND_MATRIX))
        fh.write(struct.pack("<I", 1))
        _write_block(fh, name, array)


def read_matrix(path):
    path = Path(path)
    if not path.exists():
        raise IoError(f"matrix file not found: {path}")
    with open(path, "rb") as fh:
        _check_head(fh, KIND_MATRIX, path)
        (n_blocks,) = struct.unpack("<I", fh.read(4))
        blocks = dict(_read_block(fh) for _ in range(n_blocks))
    return blocks


def dump_container_csv(path, out_path) -> str:
    """Long-format CSV (block,row,col,value) of any CHRD container."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEAD.size)
        if len(head) < _HEAD.size or head[:4] != MAGIC:
            raise IoError(f"{path}: not a CHRD container")
        _, _, kind = _HEAD.unpack(head)
    if kind == KIND_SNAPSHOT:
        blocks = read_snapshot(path)["fields"]
    elif kind == KIND_BASIS:
        data = read_basis(path)
        blocks = {"phi": data["phi"], "sigma": data["sigma"]}
    else:
        blocks = read_matrix(path)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "row", "col", "value"])
        for name in sorted(blocks):
            arr = np.atleast_2d(blocks[name])
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    writer.writerow([name, i, j, repr(float(arr[i, j]))])
    return str(out_path)


# ---------------------------------------------------------------------------
# CSV conventions


def write_units_csv(path, header: list[str], rows, units: str) -> None:
    """CSV with a leading '# units:' comment line."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# units: {units}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_units_csv(path):
    path = Path(path)
    if not path.exists():
        raise IoError(f"CSV not found: {path}")
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    rows = list(reader)
    if not rows:
        raise IoError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_measurements_csv(path, times, values: np.ndarray, sensor_ids) -> None:
    """Measurement series: t_seconds then one column per sensor id."""
    header = ["t_seconds"] + list(sensor_ids)
    rows = [[repr(float(t))] + [repr(float(v)) for v in row]
            for t, row in zip(times, values)]
    write_units_csv(path, header, rows, "t_seconds s, readings degC")


def read_measurements_csv(path):
    header, rows = read_units_csv(path)
    if not header or header[0] != "t_seconds":
        raise IoError(f"{path}: first column must be t_seconds")
    ids = header[1:]
    data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != len(ids) + 1:
        raise IoError(f"{path}: ragged measurement table")
    return data[:, 0], data[:, 1:], ids


# ---------------------------------------------------------------------------
# Manifests and hashing


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise IoError(f"manifest not found: {path}")
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# VTK export (legacy ASCII rectilinear grid, cell data)


def write_vtk_rectilinear(path, x_faces, y_faces, cell_fields: dict[str, np.ndarray],
                          title: str = "chimrom") -> None:
    x = np.asarray(x_faces, dtype=np.float64)
    y = np.asarray(y_faces, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET RECTILINEAR_GRID\n")
        fh.write(f"DIMENSIONS {x.size} {y.size} 1\n")
        fh.write(f"X_COORDINATES {x.size} double\n")
        fh.write(" ".join(f"{v:.9g}" for v in x) + "\n")
        fh.write(f"Y_COORDINATES {y.size} double\n")
        fh.write(" ".join(f"{v:.9g}" for v in y) + "\n")
        fh.write("Z_COORDINATES 1 double\n0\n")
        n_cells = (x.size - 1) * (y.size - 1)
        fh.write(f"CELL_DATA {n_cells}\n")
        for name in sorted(cell_fields):
            arr = np.asarray(cell_fields[name], dtype=np.float64)
            if arr.shape != (y.size - 1, x.size - 1):
                raise IoError(f"VTK field {name!r} shape {arr.shape} does not "
                              f"match grid {(y.size - 1, x.size - 1)}")
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(" ".join(f"{v:.9g}" for v in row) for row in arr))
            fh.write("\n")
