import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chimrom import physics
from chimrom.errors import ConfigError, DomainError
from chimrom.physics import (AirGlassProperties, GsSchedule, RoomModel,
                             blended_pcm_property, buoyancy_force,
                             effective_cp, external_htc,
                             glass_absorption_sources, glass_attenuated_flux,
                             liquid_fraction, mushy_momentum_coeff,
                             room_temperature, rt42, validate_cp)

RT42 = rt42()


# ---------------------------------------------------------------------------
# liquid fraction


def test_liquid_fraction_paper_range():
    assert liquid_fraction(37.0, RT42) == 0.0
    assert liquid_fraction(40.0, RT42) == pytest.approx(0.5)
    for delta in (1e-9, 0.1, 5.0):
        assert liquid_fraction(43.0 + delta, RT42) == 1.0


@given(st.floats(-50.0, 150.0), st.floats(-50.0, 150.0))
@settings(max_examples=80, deadline=None)
def test_liquid_fraction_monotone_bounded(t1, t2):
    f1, f2 = liquid_fraction(t1, RT42), liquid_fraction(t2, RT42)
    assert 0.0 <= f1 <= 1.0
    if t1 <= t2:
        assert f1 <= f2


def test_liquid_fraction_continuity():
    t = np.linspace(30.0, 50.0, 20001)
    f = liquid_fraction(t, RT42)
    assert np.abs(np.diff(f)).max() < 2e-4  # no jumps at the breakpoints


# ---------------------------------------------------------------------------
# mushy momentum coefficient


def test_mushy_extremes():
    assert mushy_momentum_coeff(1.0, RT42) == 0.0
    assert mushy_momentum_coeff(0.0, RT42) == pytest.approx(1e9)


def test_mushy_monotone_sweep():
    f = np.linspace(0.0, 1.0, 100)
    c = mushy_momentum_coeff(f, RT42)
    assert np.all(np.diff(c) < 0.0)
    mid = mushy_momentum_coeff(0.5, RT42)
    assert 0.0 < mid < 1e9


# ---------------------------------------------------------------------------
# effective specific heat


def test_table1_coefficients_loaded_verbatim():
    table = rt42("RT42-table1")
    assert table.cp_coeffs[0][0] == pytest.approx(5.22e-2)
    assert table.cp_coeffs[0] == pytest.approx((5.22e-2, -2.46e-1, 6.54e-1, -2.86e-1, 3.80))
    assert table.cp_coeffs[1] == pytest.approx((-2.46, 6.29e1, -6.00e2, 2.52e3, -3.94e3))
    assert table.cp_coeffs[2] == pytest.approx((1.00, -4.14e1, 6.43e2, -4.44e3, 1.15e4))
    assert (table.t1, table.t2) == (32.5, 39.0)  # sorted breakpoints


def test_table1_coefficients_flagged_as_erratum():
    # published coefficients fail both the positivity sweep and the
    # latent-heat integral; the validator must say so
    report = validate_cp(rt42("RT42-table1"))
    assert not report.positive
    assert not report.ok
    assert abs(report.latent_rel_error) > 0.2


def test_default_cp_latent_heat_integral():
    report = validate_cp(RT42)
    assert report.positive and report.ok
    assert report.latent_integral == pytest.approx(165.0, rel=1e-6)


def test_default_cp_positive_sweep():
    t = np.arange(20.0, 60.0 + 1e-9, 0.1)
    assert np.all(effective_cp(t, RT42) > 0.0)


def test_cp_branches_continuous_at_breakpoints():
    for tb in (RT42.t1, RT42.t2):
        below, above = effective_cp(tb - 1e-9, RT42), effective_cp(tb + 1e-9, RT42)
        assert below == pytest.approx(above, abs=1e-6)


# ---------------------------------------------------------------------------
# property blending


def test_blend_pure_phases_and_midpoint():
    assert blended_pcm_property(0.0, RT42.rho_sol, RT42.rho_liq) == 880.0
    assert blended_pcm_property(1.0, RT42.rho_sol, RT42.rho_liq) == 760.0
    assert blended_pcm_property(0.5, RT42.rho_sol, RT42.rho_liq) == pytest.approx(820.0)


# ---------------------------------------------------------------------------
# buoyancy


def test_buoyancy_zero_at_reference():
    fx, fy = buoyancy_force(22.0, 22.0, 45.0, 1.1614, 3.4e-3)
    assert fx == 0.0 and fy == 0.0


def test_buoyancy_angle_ratio_and_magnitude():
    fx30, _ = buoyancy_force(32.0, 22.0, 30.0, 1.1614, 3.4e-3)
    fx60, _ = buoyancy_force(32.0, 22.0, 60.0, 1.1614, 3.4e-3)
    assert fx30 / fx60 == pytest.approx(1.0 / np.sqrt(3.0))
    for theta in (30.0, 45.0, 60.0):
        fx, fy = buoyancy_force(32.0, 22.0, theta, 1.1614, 3.4e-3)
        mag = np.hypot(fx, fy)
        assert mag == pytest.approx(1.1614 * 9.81 * 3.4e-3 * 10.0)


# ---------------------------------------------------------------------------
# glass absorption

AIR = AirGlassProperties()


def test_glass_attenuation_surface_and_depth():
    assert glass_attenuated_flux(AIR.h_glass, 600.0, AIR) == pytest.approx(600.0)
    # direct evaluation with S_g = 20 1/m, H_g = 0.006 m
    assert glass_attenuated_flux(0.0, 600.0, AIR) / 600.0 == pytest.approx(
        np.exp(-0.12), abs=1e-9)
    with pytest.raises(DomainError):
        glass_attenuated_flux(0.01, 600.0, AIR)


def test_glass_absorption_telescopes_exactly():
    for faces in (np.linspace(0.0, 0.006, 5), np.array([0.0, 0.001, 0.0045, 0.006])):
        src = glass_absorption_sources(faces, 600.0, AIR)
        total = float(np.sum(src * np.diff(faces)))
        assert total == pytest.approx(600.0 * (1.0 - np.exp(-0.12)), rel=1e-14)
        assert np.all(src > 0.0)


# ---------------------------------------------------------------------------
# room model

ROOM = RoomModel()


def test_room_initial_and_steady_state():
    sched = GsSchedule.charging(600.0)
    assert room_temperature(0.0, ROOM, sched) == pytest.approx(22.0)
    assert room_temperature(5e6, ROOM, sched) == pytest.approx(22.0 + 600.0 / 55.0)


def test_room_time_constant_identity():
    sched = GsSchedule.charging(600.0)
    tau = 188.5e3 / 55.0
    assert tau == pytest.approx(3427.27, abs=0.01)
    expect = 22.0 + (600.0 / 55.0) * (1.0 - np.exp(-1.0))
    assert room_temperature(tau, ROOM, sched) == pytest.approx(expect, rel=1e-12)


def test_room_ode_residual_finite_difference():
    sched = GsSchedule.charging(600.0, charge_end_s=3000.0)
    h = 1e-3
    for t in (10.0, 500.0, 2500.0, 3500.0, 8000.0):
        tm, tp = room_temperature(t - h, ROOM, sched), room_temperature(t + h, ROOM, sched)
        dt_dt = (tp - tm) / (2.0 * h)
        resid = ROOM.inertia * dt_dt - sched.value(t) + ROOM.exchange * (
            room_temperature(t, ROOM, sched) - ROOM.t_amb)
        assert abs(resid) < 1e-8 * 600.0 + 1e-6


def test_room_discharge_decays_to_ambient():
    sched = GsSchedule.charging(600.0, charge_end_s=1800.0)
    t_peak = room_temperature(1800.0, ROOM, sched)
    assert room_temperature(1e7, ROOM, sched) == pytest.approx(22.0)
    assert room_temperature(2400.0, ROOM, sched) < t_peak


def test_room_rejects_negative_time():
    with pytest.raises(DomainError):
        room_temperature(-1.0, ROOM, GsSchedule.charging(600.0))


def test_room_vector_queries_match_scalar():
    sched = GsSchedule.charging(600.0, charge_end_s=900.0)
    ts = np.array([0.0, 450.0, 900.0, 1800.0, 100.0])
    vec = room_temperature(ts, ROOM, sched)
    for t, v in zip(ts, vec):
        assert v == pytest.approx(room_temperature(float(t), ROOM, sched))


# ---------------------------------------------------------------------------
# exterior heat-transfer coefficient


def test_htc_floor_at_zero_difference():
    assert external_htc(22.0, 22.0, 45.0, 1.0, AIR) == 2.0


def test_htc_monotone_sweep():
    hs = [external_htc(22.0 + d, 22.0, 45.0, 1.0, AIR) for d in np.linspace(0, 60, 40)]
    assert np.all(np.diff(hs) >= 0.0)


def test_htc_inclination_projection_identity():
    # Ra scales with g cos(theta): recompute Nu from scaled Ra and compare
    d = 30.0
    ra_ratio = np.cos(np.deg2rad(60.0)) / np.cos(np.deg2rad(30.0))
    pr_term = (1.0 + (0.492 / AIR.prandtl) ** (9 / 16)) ** (4 / 9)
    ra30 = (physics.GRAVITY * np.cos(np.deg2rad(30.0)) * AIR.beta * d / (AIR.nu * AIR.alpha))
    nu30 = 0.68 + 0.670 * ra30 ** 0.25 / pr_term
    nu60 = 0.68 + 0.670 * (ra30 * ra_ratio) ** 0.25 / pr_term
    assert external_htc(52.0, 22.0, 60.0, 1.0, AIR) / external_htc(52.0, 22.0, 30.0, 1.0, AIR) \
        == pytest.approx(nu60 / nu30, rel=1e-12)


def test_preset_and_schedule_validation():
    with pytest.raises(ConfigError):
        rt42("RT99")
    with pytest.raises(ConfigError):
        GsSchedule(((1000.0, 600.0), (500.0, 0.0)))
