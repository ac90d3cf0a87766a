"""Sparse-sensor temperature reconstruction.

Observation operator from sensor-disk footprints, cross-Gramian assembly,
least-squares reconstruction through an orthogonal factorization,
observability constant, the a-priori error bound and error metrics.

Sensor-set presets S1 (22 = 6 air + 16 PCM), S2 (135) and S3 (203) ship as
editable CSVs under chimrom/data/. The published figures show positions only
graphically, so the presets are plausible uniform layouts (S1's PCM sensors
form the 4x4 grid the data-filling step needs); S1 is a subset of S2, S2 of
S3.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DomainError, GeometryError, IllPosedError
from .grid import MultiDomainMesh
from .physics import KELVIN
from .rom import ReducedBasis, truncation_error

SENSOR_DIAMETER = 0.01


@dataclass(frozen=True)
class Sensor:
    sensor_id: str
    domain: str          # air | pcm | glass
    x: float
    y: float
    diameter: float = SENSOR_DIAMETER
    provenance: str = "measured"   # measured | filled


@dataclass(frozen=True)
class SensorSet:
    sensors: tuple

    def __post_init__(self):
        ids = [s.sensor_id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate sensor ids")

    def __len__(self):
        return len(self.sensors)

    @property
    def ids(self):
        return [s.sensor_id for s in self.sensors]

    def subset(self, provenance: str) -> "SensorSet":
        return SensorSet(tuple(s for s in self.sensors
                               if s.provenance == provenance))

    def count(self, domain: str) -> int:
        return sum(1 for s in self.sensors if s.domain == domain)


@dataclass
class MeasurementSeries:
    times: np.ndarray          # strictly increasing (s)
    values: np.ndarray         # (nt, m) degC
    sensor_ids: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if np.any(np.diff(self.times) <= 0.0):
            raise DomainError("measurement times must be strictly increasing")
        if self.values.shape != (self.times.size, len(self.sensor_ids)):
            raise DomainError("measurement table shape mismatch")


# ---------------------------------------------------------------------------
# sensor presets


def _preset_sensors(name: str):
    """Programmatic layouts behind the shipped CSVs (see write_preset_csvs)."""
    s1_air = [(0.50, 0.150), (0.70, 0.150), (0.90, 0.150),
              (0.70, 0.270), (0.70, 0.030), (0.98, 0.150)]
    s1_pcm = [(x, y) for x in (0.125, 0.375, 0.625, 0.875)
              for y in (-0.024, -0.018, -0.012, -0.006)]
    s1 = ([("air", x, y, "measured") for x, y in s1_air]
          + [("pcm", x, y, "measured") for x, y in s1_pcm])
    if name == "S1":
        rows = s1
    elif name in ("S2", "S3"):
        cols9 = np.linspace(0.1, 0.9, 9)
        fill = [("pcm", x, y, "filled") for x in cols9
                for y in np.linspace(-0.025, -0.005, 5)]
        for x in cols9:
            for off in (0.004, 0.012, 0.024):
                fill.append(("air", float(x), 0.3 - off, "filled"))
                fill.append(("air", float(x), off, "filled"))
            fill.append(("air", float(x), 0.15, "filled"))
        fill += [("air", 0.95, y, "filled")
                 for y in (0.05, 0.10, 0.15, 0.20, 0.25)]
        rows = s1 + fill                      # 22 + 45 + 63 + 5 = 135
        if name == "S3":
            cols8 = np.linspace(0.15, 0.85, 8)
            extra = [("pcm", float(x), y, "filled") for x in cols8
                     for y in (-0.0275, -0.015, -0.0025)]
            extra += [("air", float(x), y, "filled") for x in cols8
                      for y in (0.008, 0.06, 0.125, 0.22, 0.28)]
            extra += [("air", 0.97, y, "filled")
                      for y in (0.075, 0.125, 0.175, 0.225)]
            rows = rows + extra               # 135 + 24 + 40 + 4 = 203
    else:
        raise ConfigError(f"unknown sensor preset {name!r}")
    return [Sensor(f"{name.lower()}_{k:03d}", dom, float(x), float(y),
                   SENSOR_DIAMETER, prov)
            for k, (dom, x, y, prov) in enumerate(rows)]


def load_sensor_preset(name: str) -> SensorSet:
    """Named preset from packaged CSV data (falls back to the generator)."""
    try:
        with resources.files("chimrom.data").joinpath(
                f"sensors_{name.lower()}.csv").open() as fh:
            return read_sensor_csv(fh)
    except FileNotFoundError:
        return SensorSet(tuple(_preset_sensors(name)))


def write_preset_csvs(directory) -> list:
    """Materialize the S1/S2/S3 preset CSVs (used to build package data)."""
    paths = []
    for name in ("S1", "S2", "S3"):
        path = Path(directory) / f"sensors_{name.lower()}.csv"
        write_sensor_csv(path, SensorSet(tuple(_preset_sensors(name))))
        paths.append(path)
    return paths


def write_sensor_csv(path, sensors: SensorSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "domain", "x", "y", "diameter", "provenance"])
        for s in sensors.sensors:
            writer.writerow([s.sensor_id, s.domain, repr(s.x), repr(s.y),
                             repr(s.diameter), s.provenance])


def read_sensor_csv(path_or_file) -> SensorSet:
    if hasattr(path_or_file, "read"):
        rows = list(csv.reader(path_or_file))
    else:
        with open(path_or_file, newline="") as fh:
            rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expect = ["id", "domain", "x", "y", "diameter", "provenance"]
    if header != expect:
        raise ConfigError(f"sensor CSV header must be {expect}")
    sensors = [Sensor(r[0], r[1], float(r[2]), float(r[3]), float(r[4]), r[5])
               for r in body]
    return SensorSet(tuple(sensors))


# ---------------------------------------------------------------------------
# observation operator


@dataclass
class ObservationOperator:
    """Sparse N x m map: column j holds the area weights of sensor j's disk."""

    w: sp.csc_matrix
    sensor_ids: list

    @property
    def m(self) -> int:
        return self.w.shape[1]

    def observe(self, state_vec: np.ndarray) -> np.ndarray:
        return self.w.T @ state_vec


def _disk_cell_weights(mesh_dom, x0, y0, radius, subsamples=24):
    """Cell-area overlap weights for one disk via midpoint subsampling."""
    ax, ay = mesh_dom.axis_x, mesh_dom.axis_y
    i_lo = max(0, int(np.searchsorted(ax.faces, x0 - radius) - 1))
    i_hi = min(ax.n_cells - 1, int(np.searchsorted(ax.faces, x0 + radius)))
    j_lo = max(0, int(np.searchsorted(ay.faces, y0 - radius) - 1))
    j_hi = min(ay.n_cells - 1, int(np.searchsorted(ay.faces, y0 + radius)))
    cells, weights = [], []
    for j in range(j_lo, j_hi + 1):
        ys = ay.faces[j] + (np.arange(subsamples) + 0.5) * ay.widths[j] / subsamples
        for i in range(i_lo, i_hi + 1):
            xs = ax.faces[i] + (np.arange(subsamples) + 0.5) * ax.widths[i] / subsamples
            inside = ((xs[None, :] - x0) ** 2 + (ys[:, None] - y0) ** 2
                      <= radius ** 2)
            frac = inside.mean()
            if frac > 0.0:
                cells.append((j, i))
                weights.append(frac * ax.widths[i] * ay.widths[j])
    return cells, np.asarray(weights)


def build_observation_operator(sensors: SensorSet,
                               mesh: MultiDomainMesh) -> ObservationOperator:
    """Disk-footprint area weights, normalized per sensor column."""
    offsets = {"air": 0, "pcm": mesh.air.n_cells,
               "glass": mesh.air.n_cells + mesh.pcm.n_cells}
    n_state = mesh.n_state
    rows, cols, vals = [], [], []
    for col, s in enumerate(sensors.sensors):
        dom = mesh.domain(s.domain)
        x_lo, x_hi, y_lo, y_hi = dom.extents()
        if not (x_lo <= s.x <= x_hi and y_lo <= s.y <= y_hi):
            raise GeometryError(
                f"sensor {s.sensor_id} at ({s.x}, {s.y}) lies outside the "
                f"{s.domain} domain")
        cells, weights = _disk_cell_weights(dom, s.x, s.y, 0.5 * s.diameter)
        if weights.sum() <= 0.0:
            raise GeometryError(f"sensor {s.sensor_id} covers no cells")
        weights = weights / weights.sum()
        nx = dom.axis_x.n_cells
        for (j, i), wgt in zip(cells, weights):
            rows.append(offsets[s.domain] + j * nx + i)
            cols.append(col)
            vals.append(wgt)
    w = sp.csc_matrix((vals, (rows, cols)), shape=(n_state, len(sensors)))
    return ObservationOperator(w=w, sensor_ids=sensors.ids)


# ---------------------------------------------------------------------------
# least squares machinery


def cross_gramian(w_op: ObservationOperator, phi: np.ndarray) -> np.ndarray:
    """G = W^T Phi, the m x n map from mode coefficients to readings."""
    if w_op.w.shape[0] != phi.shape[0]:
        raise DomainError(
            f"operator rows {w_op.w.shape[0]} != basis rows {phi.shape[0]}")
    return np.asarray(w_op.w.T @ phi)


def reconstruct(readings: np.ndarray, gramian: np.ndarray, phi: np.ndarray,
                rcond: float = 1e-12):
    """Least-squares coefficients and full-field reconstruction.

    Solves min_c ||l - G c|| through an orthogonal factorization (SVD),
    mathematically the normal equations (G^T G) c = G^T l but better
    conditioned. Raises when G is numerically rank deficient.
    """
    readings = np.asarray(readings, dtype=np.float64)
    u, s, vt = np.linalg.svd(gramian, full_matrices=False)
    if s[0] == 0.0 or (s.size < gramian.shape[1]) or (s[-1] < rcond * s[0]):
        raise IllPosedError(
            f"rank-deficient cross-Gramian: S_hat_n = {s[-1] if s.size else 0.0:.3e}")
    coeff = vt.T @ ((u.T @ readings) / s)
    return coeff, phi @ coeff


def inf_sup_constant(gramian: np.ndarray, phi: np.ndarray = None) -> float:
    """Observability constant: the smallest singular value of G.

    Valid as the inf-sup ratio because the basis is orthonormal
    (||Phi c|| = ||c||). Fewer sensors than modes means a guaranteed null
    space, so the constant is exactly zero.
    """
    m, n = gramian.shape
    if m < n:
        return 0.0
    s = np.linalg.svd(gramian, compute_uv=False)
    return float(s[-1])


def apriori_bound(e_phi: np.ndarray, s_hat: np.ndarray):
    """Pointwise bound e_p(n) = E_phi(n) / S_hat(n) and its minimizer.

    Curves must share the mode axis (index k -> n = k + 1). Zero
    observability yields an infinite bound at that n; ties break toward
    fewer modes.
    """
    e_phi = np.asarray(e_phi, dtype=np.float64)
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if e_phi.shape != s_hat.shape:
        raise DomainError("bound curves must share the mode axis")
    with np.errstate(divide="ignore"):
        e_p = np.where(s_hat > 0.0, e_phi / np.where(s_hat > 0, s_hat, 1.0),
                       np.inf)
    best = int(np.argmin(e_p))          # argmin returns the first minimum
    return e_p, best + 1


def bound_curves(basis: ReducedBasis, w_op: ObservationOperator,
                 n_max: int = None):
    """(n, E_phi, S_hat, e_p) arrays for n = 1..n_max."""
    n_cap = min(basis.n_modes, w_op.m if w_op is not None else basis.n_modes)
    n_max = n_cap if n_max is None else min(n_max, basis.n_modes)
    ns = np.arange(1, n_max + 1)
    e_phi = np.array([truncation_error(basis.sigma, n) for n in ns])
    if w_op is None:
        return ns, e_phi, None, None
    g_full = cross_gramian(w_op, basis.phi[:, :n_max])
    s_hat = np.array([inf_sup_constant(g_full[:, :n]) for n in ns])
    e_p, _ = apriori_bound(e_phi, s_hat)
    return ns, e_phi, s_hat, e_p


def select_modes(basis: ReducedBasis, w_op: ObservationOperator,
                 n_max: int = None) -> int:
    """A-priori-bound minimizer (the default mode count)."""
    ns, _, _, e_p = bound_curves(basis, w_op, n_max)
    if e_p is None or not np.any(np.isfinite(e_p)):
        raise IllPosedError("no observable mode count for this sensor set")
    return int(ns[np.argmin(e_p)])


def relative_error(t_star: np.ndarray, t_gt: np.ndarray, dims=None):
    """Relative L2 reconstruction error in percent, evaluated in kelvin.

    Returns (total, air, pcm) percentages; the per-domain split needs
    ``dims`` = (nx, ny_air, ny_pcm, ny_glass).
    """
    t_star = np.asarray(t_star, dtype=np.float64)
    t_gt = np.asarray(t_gt, dtype=np.float64)
    if t_star.shape != t_gt.shape:
        raise DomainError("reconstruction/ground-truth shape mismatch")

    def rel(a, b):
        return 100.0 * np.linalg.norm(a - b) / np.linalg.norm(b + KELVIN)

    total = rel(t_star, t_gt)
    if dims is None:
        return total, None, None
    nx, ny_a, ny_p, _ = dims
    na, np_ = ny_a * nx, ny_p * nx
    air = rel(t_star[:na], t_gt[:na])
    pcm = rel(t_star[na:na + np_], t_gt[na:na + np_])
    return total, air, pcm


def synthetic_measurements(w_op: ObservationOperator, state_vectors,
                           times) -> MeasurementSeries:
    """Sample stacked temperature states at the sensor disks."""
    vals = np.vstack([w_op.observe(np.asarray(v)) for v in state_vectors])
    return MeasurementSeries(times=np.asarray(times, dtype=float),
                             values=vals, sensor_ids=list(w_op.sensor_ids))
