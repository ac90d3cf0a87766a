"""Surface-to-surface long-wave exchange between absorber plate and glass.

View factors come from the 2D crossed-strings construction; the channel
cross-section is a convex enclosure, so strings are never occluded. All
elements are kept in a consistent counterclockwise ordering around the
enclosure, under which the crossed strings are always the endpoint-index-equal
pairs. The net-radiation solve is the classic radiosity fixed point of the
outgoing/incoming fluxes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, GeometryError
from .physics import KELVIN, STEFAN_BOLTZMANN


@dataclass(frozen=True)
class RadiationSurface:
    """Ordered surface elements: segment endpoints (m), emissivity, T (degC)."""

    p0: np.ndarray        # (n, 2)
    p1: np.ndarray        # (n, 2)
    emissivity: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        p0 = np.atleast_2d(np.asarray(self.p0, dtype=np.float64))
        p1 = np.atleast_2d(np.asarray(self.p1, dtype=np.float64))
        eps = np.broadcast_to(np.asarray(self.emissivity, dtype=np.float64),
                              (p0.shape[0],)).copy()
        temp = np.broadcast_to(np.asarray(self.temperature, dtype=np.float64),
                               (p0.shape[0],)).copy()
        if np.any(np.linalg.norm(p1 - p0, axis=1) <= 0.0):
            raise GeometryError("zero-length radiation element")
        if np.any(eps <= 0.0) or np.any(eps > 1.0):
            raise GeometryError("emissivities must lie in (0, 1]")
        for name, val in (("p0", p0), ("p1", p1), ("emissivity", eps),
                          ("temperature", temp)):
            object.__setattr__(self, name, val)

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.p1 - self.p0, axis=1)

    @property
    def n_elements(self) -> int:
        return self.p0.shape[0]

    @staticmethod
    def from_wall(x_faces, y: float, emissivity, temperature,
                  direction: int = +1) -> "RadiationSurface":
        """Elements along a horizontal wall at height y; direction -1 reverses
        the traversal (used to keep the enclosure counterclockwise)."""
        x = np.asarray(x_faces, dtype=np.float64)
        if direction < 0:
            x = x[::-1]
        p0 = np.column_stack([x[:-1], np.full(x.size - 1, y)])
        p1 = np.column_stack([x[1:], np.full(x.size - 1, y)])
        eps = np.asarray(emissivity, dtype=np.float64)
        temp = np.asarray(temperature, dtype=np.float64)
        if direction < 0:
            eps = eps[::-1] if eps.ndim else eps
            temp = temp[::-1] if temp.ndim else temp
        return RadiationSurface(p0, p1, eps, temp)


def concatenate_surfaces(*parts: RadiationSurface) -> RadiationSurface:
    return RadiationSurface(
        np.vstack([p.p0 for p in parts]),
        np.vstack([p.p1 for p in parts]),
        np.concatenate([p.emissivity for p in parts]),
        np.concatenate([p.temperature for p in parts]),
    )


@dataclass(frozen=True)
class ViewFactorMatrix:
    """Dense F[j, i] = fraction of energy leaving j arriving at i."""

    f: np.ndarray
    areas: np.ndarray  # element lengths per unit depth

    def row_sums(self) -> np.ndarray:
        return self.f.sum(axis=1)


def _crossed_strings(p0: np.ndarray, p1: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """All-pairs crossed-strings view factors for CCW-ordered elements."""
    def dist(a, b):
        return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)

    crossed = dist(p0, p0) + dist(p1, p1)
    uncrossed = dist(p0, p1) + dist(p1, p0)
    f = (crossed - uncrossed) / (2.0 * lengths[:, None])
    np.fill_diagonal(f, 0.0)
    return np.clip(f, 0.0, None)


def view_factors_strings(upper: RadiationSurface, lower: RadiationSurface,
                         side_closure: bool = False,
                         closure_emissivity: float = 1.0,
                         closure_temperature: float = 0.0) -> tuple[ViewFactorMatrix, RadiationSurface]:
    """View factors between two facing horizontal walls.

    Returns the matrix together with the combined, consistently ordered
    surface set: [lower..., upper..., left closure, right closure]. With
    side_closure the two open ends become single re-radiating elements and
    every row sums to one.
    """
    y_lo = float(lower.p0[0, 1])
    y_hi = float(upper.p0[0, 1])
    if not y_hi > y_lo:
        raise GeometryError("upper wall must lie above lower wall")

    # enforce counterclockwise traversal: lower +x, upper -x
    def oriented(surface, sign):
        xs = np.concatenate([surface.p0[:, 0], surface.p1[:, 0]])
        increasing = surface.p1[0, 0] > surface.p0[0, 0]
        if (sign > 0) == increasing:
            return surface
        return RadiationSurface(surface.p1[::-1], surface.p0[::-1],
                                surface.emissivity[::-1], surface.temperature[::-1])

    lo = oriented(lower, +1)
    hi = oriented(upper, -1)
    parts = [lo, hi]
    if side_closure:
        x_min = float(min(lo.p0[:, 0].min(), lo.p1[:, 0].min()))
        x_max = float(max(lo.p0[:, 0].max(), lo.p1[:, 0].max()))
        right = RadiationSurface(np.array([[x_max, y_lo]]), np.array([[x_max, y_hi]]),
                                 closure_emissivity, closure_temperature)
        left = RadiationSurface(np.array([[x_min, y_hi]]), np.array([[x_min, y_lo]]),
                                closure_emissivity, closure_temperature)
        parts = [lo, right, hi, left]
    combined = concatenate_surfaces(*parts)
    f = _crossed_strings(combined.p0, combined.p1, combined.lengths)
    return ViewFactorMatrix(f=f, areas=combined.lengths), combined


@dataclass(frozen=True)
class NetRadiationResult:
    q_net: np.ndarray       # W/m^2 leaving each element (long-wave net)
    iterations: int
    residuals: np.ndarray   # max |delta q_net| per iteration


def solve_net_radiation(surfaces: RadiationSurface, fmat: ViewFactorMatrix,
                        shortwave_incident=None,
                        tol: float = 1e-5, max_iter: int = 10000) -> NetRadiationResult:
    """Fixed-point radiosity solve for the per-element net flux.

    q_out = eps sigma T^4 + (1 - eps) q_in and q_in = F q_out, iterated until
    max |delta q_net| <= tol. ``shortwave_incident`` (W/m^2, optional) is the
    transmitted solar flux absorbed with the element emissivity; it bypasses
    the long-wave iteration and is subtracted from the returned net flux.
    """
    eps = surfaces.emissivity
    t4 = (surfaces.temperature + KELVIN) ** 4
    emitted = eps * STEFAN_BOLTZMANN * t4
    q_out = emitted.copy()
    q_net = emitted.copy()
    residuals = []
    for it in range(1, max_iter + 1):
        q_in = fmat.f @ q_out
        q_out = emitted + (1.0 - eps) * q_in
        q_net_new = q_out - q_in
        res = float(np.max(np.abs(q_net_new - q_net)))
        residuals.append(res)
        q_net = q_net_new
        if res <= tol:
            break
    else:
        raise ConvergenceError(
            f"net-radiation iteration stalled at residual {residuals[-1]:.3e} "
            f"after {max_iter} iterations", residual=residuals[-1])
    if shortwave_incident is not None:
        q_net = q_net - eps * np.asarray(shortwave_incident, dtype=np.float64)
    return NetRadiationResult(q_net=q_net, iterations=it,
                              residuals=np.asarray(residuals))
