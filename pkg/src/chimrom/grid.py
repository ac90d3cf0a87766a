"""Multi-domain structured anisotropic staggered meshes.

The chimney channel is axis aligned: x runs along the channel (inlet at
x=0, outlet at x=L), y is wall-normal. The PCM plate occupies
y in [-H_pcm, 0], the air gap [0, H_air] and the glass cover
[H_air, H_air + H_glass]. All three layers share the same x axis, so the
interface index maps are plain column identities. Inclination enters only
through the rotated gravity vector (see physics), never the mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

_UNIFORM_BETA = 1e-8


@dataclass(frozen=True)
class Axis1D:
    """One mesh direction: cell faces, derived centers and widths (m)."""

    faces: np.ndarray
    centers: np.ndarray = field(init=False)
    widths: np.ndarray = field(init=False)

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=np.float64)
        if faces.ndim != 1 or faces.size < 2:
            raise ConfigError("axis needs at least two faces")
        widths = np.diff(faces)
        if np.any(widths <= 0.0):
            raise ConfigError("axis faces must be strictly increasing")
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "centers", 0.5 * (faces[:-1] + faces[1:]))
        object.__setattr__(self, "widths", widths)

    @property
    def n_cells(self) -> int:
        return self.centers.size

    @property
    def length(self) -> float:
        return float(self.faces[-1] - self.faces[0])


def build_tanh_axis(n_cells: int, length: float, beta: float,
                    clustering: str = "both-walls", origin: float = 0.0) -> Axis1D:
    """Wall-concentrated hyperbolic-tangent axis.

    ``both-walls`` clusters cells at both ends,
    ``one-wall`` at the origin end. ``beta`` below ~1e-8 degenerates to a
    uniform spacing (the analytic beta -> 0 limit).
    """
    if n_cells < 2:
        raise ConfigError(f"n_cells must be >= 2, got {n_cells}")
    if not np.isfinite(length) or length <= 0.0:
        raise ConfigError(f"axis length must be positive, got {length}")
    if not np.isfinite(beta) or beta <= 0.0:
        raise ConfigError(f"stretch factor beta must be positive, got {beta}")
    if clustering not in ("both-walls", "one-wall"):
        raise ConfigError(f"unknown clustering mode {clustering!r}")

    j = np.arange(n_cells + 1, dtype=np.float64)
    if clustering == "both-walls":
        s = 2.0 * j / n_cells - 1.0
        if beta < _UNIFORM_BETA:
            xi = 0.5 * (1.0 + s)
        else:
            xi = 0.5 * (1.0 + np.tanh(beta * s) / np.tanh(beta))
    else:
        s = j / n_cells - 1.0
        if beta < _UNIFORM_BETA:
            xi = 1.0 + s
        else:
            xi = 1.0 + np.tanh(beta * s) / np.tanh(beta)
    xi[0], xi[-1] = 0.0, 1.0
    return Axis1D(origin + length * xi)


def solve_beta_for_min_width(n_cells: int, length: float, target_min_width: float,
                             clustering: str = "both-walls",
                             beta_max: float = 20.0, tol: float = 1e-12) -> float:
    """Bisect for the stretch factor whose smallest cell equals the target.

    The minimum width decreases monotonically with beta, so bisection on
    [~0, beta_max] is robust. Raises if the target exceeds the uniform width
    (no clustering can enlarge the smallest cell).
    """
    if target_min_width <= 0.0:
        raise ConfigError("target minimum width must be positive")
    uniform = length / n_cells
    if target_min_width > uniform * (1.0 + 1e-12):
        raise ConfigError(
            f"target width {target_min_width:g} exceeds uniform width {uniform:g}")

    def min_width(beta):
        # saturated tanh collapses near-wall faces; treat as "below target"
        try:
            return float(build_tanh_axis(n_cells, length, beta, clustering).widths.min())
        except ConfigError:
            return 0.0

    lo, hi = _UNIFORM_BETA, 1.0
    while min_width(hi) > target_min_width:
        lo = hi
        hi *= 1.6
        if hi > beta_max:
            raise ConfigError(
                f"target width {target_min_width:g} not reachable with beta <= {beta_max}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if min_width(mid) > target_min_width:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DomainMesh:
    """Structured 2D mesh of one material layer."""

    tag: str  # glass | air | pcm
    axis_x: Axis1D
    axis_y: Axis1D
    theta_deg: float = 0.0

    def __post_init__(self):
        if self.tag not in ("glass", "air", "pcm"):
            raise ConfigError(f"unknown domain tag {self.tag!r}")

    @property
    def shape(self) -> tuple[int, int]:
        """(ny, nx) cell-count shape; fields are stored row-major in y."""
        return (self.axis_y.n_cells, self.axis_x.n_cells)

    @property
    def n_cells(self) -> int:
        return self.axis_x.n_cells * self.axis_y.n_cells

    def cell_areas(self) -> np.ndarray:
        """Cell areas (m^2 per unit depth), shape (ny, nx)."""
        return np.outer(self.axis_y.widths, self.axis_x.widths)

    def extents(self) -> tuple[float, float, float, float]:
        return (float(self.axis_x.faces[0]), float(self.axis_x.faces[-1]),
                float(self.axis_y.faces[0]), float(self.axis_y.faces[-1]))


@dataclass(frozen=True)
class MultiDomainMesh:
    """The three coupled layers plus interface column maps."""

    glass: DomainMesh
    air: DomainMesh
    pcm: DomainMesh
    air_glass_map: np.ndarray  # air column -> glass column
    air_pcm_map: np.ndarray    # air column -> pcm column

    def __post_init__(self):
        for name, m in (("air_glass_map", self.air_glass_map),
                        ("air_pcm_map", self.air_pcm_map)):
            arr = np.asarray(m)
            if sorted(arr.tolist()) != list(range(arr.size)):
                raise DomainError(f"{name} is not a bijection")
        if not (np.allclose(self.air.axis_x.faces, self.glass.axis_x.faces)
                and np.allclose(self.air.axis_x.faces, self.pcm.axis_x.faces)):
            raise DomainError("layers must share coincident x face lines")
        if not np.isclose(self.air.axis_y.faces[-1], self.glass.axis_y.faces[0]):
            raise DomainError("air-glass interface faces do not coincide")
        if not np.isclose(self.air.axis_y.faces[0], self.pcm.axis_y.faces[-1]):
            raise DomainError("air-pcm interface faces do not coincide")

    def domain(self, tag: str) -> DomainMesh:
        return {"glass": self.glass, "air": self.air, "pcm": self.pcm}[tag]

    @property
    def n_state(self) -> int:
        """Stacked temperature unknown count (air + pcm + glass)."""
        return self.air.n_cells + self.pcm.n_cells + self.glass.n_cells


def build_case_mesh(nx: int, length: float,
                    air_ny: int, air_gap: float,
                    pcm_ny: int, pcm_thickness: float,
                    glass_ny: int, glass_thickness: float,
                    theta_deg: float,
                    beta_x: float = _UNIFORM_BETA,
                    air_beta: float = 1.8,
                    pcm_beta: float = 1.2,
                    glass_beta: float = _UNIFORM_BETA) -> MultiDomainMesh:
    """Assemble the glass-air-PCM stack with a shared along-channel axis."""
    ax = build_tanh_axis(nx, length, beta_x, "both-walls")
    air = DomainMesh("air", ax, build_tanh_axis(air_ny, air_gap, air_beta,
                                                "both-walls"), theta_deg)
    pcm = DomainMesh("pcm", ax, build_tanh_axis(pcm_ny, pcm_thickness, pcm_beta,
                                                "both-walls", origin=-pcm_thickness),
                     theta_deg)
    glass = DomainMesh("glass", ax, build_tanh_axis(glass_ny, glass_thickness,
                                                    glass_beta, "both-walls",
                                                    origin=air_gap), theta_deg)
    ident = np.arange(nx)
    return MultiDomainMesh(glass=glass, air=air, pcm=pcm,
                           air_glass_map=ident, air_pcm_map=ident.copy())


def _bracket_weights(src_centers: np.ndarray, targets: np.ndarray):
    """Bracketing indices and linear weights, extrapolating past end centers.

    Unclamped weights keep the interpolation exact for affine fields all the
    way to the domain edge where coarse centers fall outside the span of fine
    centers.
    """
    idx = np.searchsorted(src_centers, targets) - 1
    idx = np.clip(idx, 0, src_centers.size - 2)
    w = (targets - src_centers[idx]) / (src_centers[idx + 1] - src_centers[idx])
    return idx, w


def interpolate_to_mesh(values: np.ndarray, src: DomainMesh, dst: DomainMesh) -> np.ndarray:
    """Bilinear transfer of cell-centered values between same-extent meshes."""
    if src.extents() != dst.extents():
        if not np.allclose(src.extents(), dst.extents(), rtol=1e-12, atol=1e-12):
            raise DomainError(
                f"extent mismatch: src {src.extents()} vs dst {dst.extents()}")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != src.shape:
        raise DomainError(f"field shape {values.shape} != mesh shape {src.shape}")

    ix, wx = _bracket_weights(src.axis_x.centers, dst.axis_x.centers)
    iy, wy = _bracket_weights(src.axis_y.centers, dst.axis_y.centers)
    wx = wx[None, :]
    wy = wy[:, None]
    v00 = values[np.ix_(iy, ix)]
    v01 = values[np.ix_(iy, ix + 1)]
    v10 = values[np.ix_(iy + 1, ix)]
    v11 = values[np.ix_(iy + 1, ix + 1)]
    return ((1 - wy) * ((1 - wx) * v00 + wx * v01)
            + wy * ((1 - wx) * v10 + wx * v11))


def mesh_report(mesh: MultiDomainMesh) -> str:
    """Plain-text mesh summary for the discretization-study CLI."""
    lines = ["domain  nx  ny   dx_min      dx_max      dy_min      dy_max"]
    for tag in ("glass", "air", "pcm"):
        m = mesh.domain(tag)
        lines.append(
            f"{tag:6s} {m.axis_x.n_cells:3d} {m.axis_y.n_cells:3d} "
            f"{m.axis_x.widths.min():.5e} {m.axis_x.widths.max():.5e} "
            f"{m.axis_y.widths.min():.5e} {m.axis_y.widths.max():.5e}")
    return "\n".join(lines)
