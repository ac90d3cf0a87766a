"""Material models and source terms.

PCM enthalpy-porosity closures, effective specific heat, property blending,
Boussinesq buoyancy, glass volumetric absorption, the room-temperature energy
balance and the exterior natural-convection coefficient. Everything here is a
pure function over frozen property records, so the solver can call them from
any worker.

Units: temperatures in degC unless noted, lengths m, powers W. Specific heat
records follow the RT42 data-sheet convention (kJ/kg K, latent heat kJ/kg);
callers that need SI joules multiply by 1e3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

GRAVITY = 9.81
STEFAN_BOLTZMANN = 5.670374419e-8
KELVIN = 273.15


@dataclass(frozen=True)
class PcmProperties:
    """Phase-change-material record (RT42 by default).

    ``cp_coeffs`` holds three quartic branches (A, B, C, D, E) in kJ/kg K,
    evaluated as A*T^4 + B*T^3 + C*T^2 + D*T + E with T in degC, on the
    ranges T < t1, t1 <= T <= t2, T > t2 (t1 < t2 after sorting).
    """

    t_sol: float = 37.0
    t_liq: float = 43.0
    h_pc: float = 165.0           # kJ/kg
    rho_sol: float = 880.0
    rho_liq: float = 760.0
    lam: float = 0.20             # W/m K, phase-independent per the data sheet
    mu: float = 0.0235            # Pa s
    beta: float = 5.0e-4          # 1/K
    cp_coeffs: tuple = ()         # 3 x (A..E)
    t1: float = 37.0
    t2: float = 43.0
    c_mushy: float = 1.0e5
    eps_mushy: float = 1.0e-4

    def __post_init__(self):
        if not self.t_sol < self.t_liq:
            raise ConfigError("solidus must lie below liquidus")
        if min(self.rho_sol, self.rho_liq, self.lam, self.mu) <= 0.0:
            raise ConfigError("PCM densities, conductivity and viscosity must be positive")
        if not self.t1 < self.t2:
            raise ConfigError("cp breakpoints must satisfy t1 < t2")
        if len(self.cp_coeffs) != 3 or any(len(b) != 5 for b in self.cp_coeffs):
            raise ConfigError("cp_coeffs needs three (A..E) branches")


@dataclass(frozen=True)
class AirGlassProperties:
    """Constant air properties (dry air at ~300 K film) and glass data."""

    rho: float = 1.1614           # kg/m3
    c: float = 1007.0             # J/kg K
    lam: float = 0.0263           # W/m K
    mu: float = 1.846e-5          # Pa s
    beta: float = 1.0 / (22.0 + KELVIN)
    rho_glass: float = 2500.0
    c_glass: float = 840.0
    lam_glass: float = 1.0
    s_glass: float = 20.0         # 1/m extinction coefficient
    h_glass: float = 0.006        # m glass thickness
    tau_glass: float = 0.78       # short-wave transmittance
    eps_glass: float = 0.85
    eps_plate: float = 0.95

    def __post_init__(self):
        for name in ("rho", "c", "lam", "mu", "beta", "rho_glass", "c_glass",
                     "lam_glass", "s_glass", "h_glass"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        for name in ("eps_glass", "eps_plate", "tau_glass"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1]")

    @property
    def nu(self) -> float:
        return self.mu / self.rho

    @property
    def alpha(self) -> float:
        return self.lam / (self.rho * self.c)

    @property
    def prandtl(self) -> float:
        return self.nu / self.alpha


@dataclass(frozen=True)
class RoomModel:
    """Lumped room energy balance: I_r dT/dt = G_S - C_1 (T - T_amb)."""

    inertia: float = 188.5e3      # J/m2 K
    exchange: float = 55.0        # W/m2 K
    t_amb: float = 22.0           # degC

    def __post_init__(self):
        if self.inertia <= 0.0 or self.exchange <= 0.0:
            raise ConfigError("room inertia and exchange coefficient must be positive")


@dataclass(frozen=True)
class GsSchedule:
    """Piecewise-constant irradiation: value_i applies while t < until_i.

    The last segment must end at +inf.
    """

    segments: tuple = ((np.inf, 600.0),)

    def __post_init__(self):
        ends = [s[0] for s in self.segments]
        if ends != sorted(ends) or ends[-1] != np.inf:
            raise ConfigError("schedule segment ends must increase and finish at +inf")

    def value(self, t: float) -> float:
        for until, gs in self.segments:
            if t < until:
                return float(gs)
        return float(self.segments[-1][1])

    @staticmethod
    def charging(gs: float, charge_end_s: float = np.inf) -> "GsSchedule":
        if np.isinf(charge_end_s):
            return GsSchedule(((np.inf, gs),))
        return GsSchedule(((charge_end_s, gs), (np.inf, 0.0)))


# ---------------------------------------------------------------------------
# PCM closures


def liquid_fraction(t, props: PcmProperties):
    """Melt fraction: 0 below solidus, linear ramp, 1 above liquidus."""
    t = np.asarray(t, dtype=np.float64)
    f = (t - props.t_sol) / (props.t_liq - props.t_sol)
    return np.clip(f, 0.0, 1.0)


def mushy_momentum_coeff(f_pc, props: PcmProperties):
    """Carman-Kozeny-type damping coefficient C_M (1-f)^2 / (f^3 + eps)."""
    f = np.asarray(f_pc, dtype=np.float64)
    return props.c_mushy * (1.0 - f) ** 2 / (f ** 3 + props.eps_mushy)


def effective_cp(t, props: PcmProperties):
    """Piecewise-quartic effective specific heat (kJ/kg K)."""
    t = np.asarray(t, dtype=np.float64)
    branches = [np.polyval(b, t) for b in props.cp_coeffs]
    return np.select([t < props.t1, t <= props.t2], branches[:2], branches[2])


def blended_pcm_property(f_pc, solid_value: float, liquid_value: float):
    """Linear solid/liquid blend by melt fraction."""
    f = np.asarray(f_pc, dtype=np.float64)
    return (1.0 - f) * solid_value + f * liquid_value


@dataclass(frozen=True)
class CpValidation:
    """Outcome of the specific-heat sanity sweep."""

    positive: bool
    latent_integral: float        # kJ/kg recovered between solidus and liquidus
    latent_rel_error: float
    ok: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ok", self.positive and abs(self.latent_rel_error) <= 0.20)


def validate_cp(props: PcmProperties, t_lo: float = 20.0, t_hi: float = 60.0) -> CpValidation:
    """Check Cp positivity on [t_lo, t_hi] and the latent-heat integral.

    The integral of (Cp - baseline) across the melting range should recover
    the latent heat within 20%; the baseline is the mean of the two outer
    branches evaluated at the breakpoints. Coefficient sets that fail are
    data errata, not usable presets.
    """
    sweep = np.arange(t_lo, t_hi + 1e-9, 0.1)
    positive = bool(np.all(effective_cp(sweep, props) > 0.0))
    base = 0.5 * (float(np.polyval(props.cp_coeffs[0], props.t1))
                  + float(np.polyval(props.cp_coeffs[2], props.t2)))
    tq = np.linspace(props.t_sol, props.t_liq, 20001)
    integral = float(np.trapezoid(effective_cp(tq, props) - base, tq))
    rel = (integral - props.h_pc) / props.h_pc
    return CpValidation(positive=positive, latent_integral=integral, latent_rel_error=rel)


def _latent_bump_branches(base_kj: float, h_pc: float, t_sol: float, t_liq: float):
    """Quartic latent bump integrating exactly to h_pc over the melt range."""
    tm = 0.5 * (t_sol + t_liq)
    half = 0.5 * (t_liq - t_sol)
    peak = h_pc * 15.0 / (16.0 * half)
    p = np.polynomial.Polynomial
    s = p([-tm, 1.0]) / half
    bump = peak * (1.0 - s ** 2) ** 2 + base_kj
    mid = tuple(bump.coef[::-1])  # descending A..E
    flat = (0.0, 0.0, 0.0, 0.0, base_kj)
    return (flat, mid, flat)


def rt42(preset: str = "RT42") -> PcmProperties:
    """Named RT42 presets.

    ``RT42`` carries the data-sheet scalar properties with a quartic latent
    bump for Cp (2 kJ/kg K baseline, exact 165 kJ/kg latent integral).
    ``RT42-table1`` carries the published piecewise-quartic Cp coefficients
    verbatim with sorted breakpoints; it fails validate_cp (values explode to
    ~1e6 and go negative inside the melting range) and is retained only so the
    erratum stays reproducible.
    """
    if preset == "RT42":
        return PcmProperties(cp_coeffs=_latent_bump_branches(2.0, 165.0, 37.0, 43.0),
                             t1=37.0, t2=43.0)
    if preset == "RT42-table1":
        table = (
            (5.22e-2, -2.46e-1, 6.54e-1, -2.86e-1, 3.80e0),
            (-2.46e0, 6.29e1, -6.00e2, 2.52e3, -3.94e3),
            (1.00e0, -4.14e1, 6.43e2, -4.44e3, 1.15e4),
        )
        return PcmProperties(cp_coeffs=table, t1=32.5, t2=39.0)
    raise ConfigError(f"unknown PCM preset {preset!r}")


# ---------------------------------------------------------------------------
# Forcing terms


def buoyancy_force(t, t_ref: float, theta_deg: float, rho: float, beta: float):
    """Boussinesq force density (N/m^3) in channel-aligned coordinates.

    Returns (along-channel, wall-normal) components
    rho g beta (T - T_ref) (sin theta, cos theta).
    """
    t = np.asarray(t, dtype=np.float64)
    th = np.deg2rad(theta_deg)
    mag = rho * GRAVITY * beta * (t - t_ref)
    return mag * np.sin(th), mag * np.cos(th)


def glass_attenuated_flux(y, gs: float, props: AirGlassProperties):
    """Short-wave flux Theta_g(y) = G_S exp(-S_g (H_g - y)), y local in glass."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < -1e-12) or np.any(y > props.h_glass + 1e-12):
        raise DomainError("y outside the glass layer")
    return gs * np.exp(-props.s_glass * (props.h_glass - y))


def glass_absorption_sources(faces_y, gs: float, props: AirGlassProperties):
    """Per-cell volumetric source (W/m^3) from the attenuation-flux divergence.

    ``faces_y`` are ascending local face coordinates in [0, H_g]; the cell
    source telescopes so the column total is always G_S (1 - exp(-S_g H_g)).
    """
    theta = glass_attenuated_flux(faces_y, gs, props)
    widths = np.diff(np.asarray(faces_y, dtype=np.float64))
    if np.any(widths <= 0.0):
        raise DomainError("glass faces must be strictly increasing")
    return np.diff(theta) / widths


def room_temperature(t, room: RoomModel, schedule: GsSchedule):
    """Exact exponential solution of the room balance at time(s) t >= 0."""
    times = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(times < 0.0):
        raise DomainError("negative time in room-temperature query")
    tau = room.inertia / room.exchange
    order = np.argsort(times, kind="stable")
    out = np.empty_like(times)
    t_cur, temp = 0.0, room.t_amb
    seg = 0
    for k in order:
        target = times[k]
        while True:
            until, gs = schedule.segments[seg]
            t_eq = room.t_amb + gs / room.exchange
            step_end = min(until, target)
            temp_at = t_eq + (temp - t_eq) * np.exp(-(step_end - t_cur) / tau)
            if until <= target:
                temp, t_cur = temp_at, until
                seg += 1
            else:
                out[k] = temp_at
                break
    return out if np.ndim(t) else float(out[0])


def external_htc(t_g: float, t_room: float, theta_deg: float, plate_length: float,
                 air: AirGlassProperties, floor: float = 2.0) -> float:
    """Laminar inclined-plate natural-convection coefficient (W/m^2 K).

    Churchill-Chu laminar form with the gravity component g cos(theta); the
    correlation choice is config-swappable at the call site. A floor keeps a
    minimal exterior film when the plate is at room temperature.
    """
    if plate_length <= 0.0:
        raise ConfigError("plate length must be positive")
    dt = abs(t_g - t_room)
    ra = (GRAVITY * np.cos(np.deg2rad(theta_deg)) * air.beta * dt
          * plate_length ** 3 / (air.nu * air.alpha))
    nu = 0.68 + 0.670 * ra ** 0.25 / (1.0 + (0.492 / air.prandtl) ** (9.0 / 16.0)) ** (4.0 / 9.0)
    return max(nu * air.lam / plate_length, floor)
