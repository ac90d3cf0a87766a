"""Scheme kernels: WENO3 face reconstruction and blended-BDF time weights."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

WENO_EPS = 1e-6
BDF1 = (1.0, -1.0, 0.0, 0.0)
BDF2 = (1.5, -2.0, 0.5, 0.0)
BDF3 = (11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0)


def weno3_weights(phi_uu, phi_u, phi_d, eps: float = WENO_EPS):
    """Nonlinear weights (w0, w1) for the upwind-ordered 3-cell stencil.

    phi_uu is the upwind-upwind cell, phi_u the upwind cell adjacent to the
    face, phi_d the downwind cell. w0 weighs the one-sided extrapolation
    sub-stencil, w1 the central one; optimal linear weights are (1/3, 2/3).
    """
    phi_uu = np.asarray(phi_uu, dtype=np.float64)
    phi_u = np.asarray(phi_u, dtype=np.float64)
    phi_d = np.asarray(phi_d, dtype=np.float64)
    b0 = (phi_u - phi_uu) ** 2
    b1 = (phi_d - phi_u) ** 2
    a0 = (1.0 / 3.0) / (eps + b0) ** 2
    a1 = (2.0 / 3.0) / (eps + b1) ** 2
    s = a0 + a1
    return a0 / s, a1 / s


def weno3_face(phi_m, phi_c, phi_p, upwind_from_left: bool = True,
               eps: float = WENO_EPS):
    """WENO3 face value from the (phi_{i-1}, phi_i, phi_{i+1}) stencil.

    With flow from the left the reconstructed face is i+1/2; otherwise the
    stencil mirrors and the face is i-1/2. Uniform spacing assumed (the
    solver carries its own metric-aware variant with the same weights).
    """
    if upwind_from_left:
        uu, u, d = phi_m, phi_c, phi_p
    else:
        uu, u, d = phi_p, phi_c, phi_m
    uu = np.asarray(uu, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    w0, w1 = weno3_weights(uu, u, d, eps)
    s0 = 1.5 * u - 0.5 * uu
    s1 = 0.5 * (u + d)
    return w0 * s0 + w1 * s1


def bdf_coeffs(blend=(0.52, 0.48)):
    """Four-level blended BDF2/BDF3 time-derivative weights (per 1/dt)."""
    w2, w3 = blend
    if abs(w2 + w3 - 1.0) > 1e-12:
        raise ConfigError("BDF blend weights must sum to 1")
    return tuple(w2 * c2 + w3 * c3 for c2, c3 in zip(BDF2, BDF3))


def bdf_ladder(levels_available: int, blend=(0.52, 0.48)):
    """Startup ladder: backward Euler, then BDF2, then the blended scheme.

    ``levels_available`` counts usable history states at the current uniform
    step size; the ladder restarts whenever dt changes.
    """
    if levels_available <= 1:
        return BDF1
    if levels_available == 2:
        return BDF2
    return bdf_coeffs(blend)
