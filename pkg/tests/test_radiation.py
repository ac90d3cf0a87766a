import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chimrom.errors import GeometryError
from chimrom.physics import KELVIN, STEFAN_BOLTZMANN
from chimrom.radiation import (RadiationSurface, ViewFactorMatrix,
                               solve_net_radiation, view_factors_strings)


def _strip(x0, x1, y, eps=1.0, temp=20.0):
    return RadiationSurface(np.array([[x0, y]]), np.array([[x1, y]]), eps, temp)


def _wall(x_faces, y, eps=1.0, temp=20.0):
    x = np.asarray(x_faces, dtype=float)
    return RadiationSurface(np.column_stack([x[:-1], np.full(x.size - 1, y)]),
                            np.column_stack([x[1:], np.full(x.size - 1, y)]),
                            eps, temp)


def test_opposed_unit_strips_closed_form():
    fm, _ = view_factors_strings(_strip(0, 1, 1.0), _strip(0, 1, 0.0))
    assert fm.f[0, 1] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-12)
    assert fm.f[1, 0] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-12)


@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.2, 3.0), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_reciprocity_random_geometries(n_lo, n_hi, gap, seed):
    rng = np.random.default_rng(seed)
    lo_faces = np.cumsum(np.concatenate([[0.0], rng.uniform(0.1, 1.0, n_lo)]))
    hi_faces = np.cumsum(np.concatenate([[0.0], rng.uniform(0.1, 1.0, n_hi)]))
    fm, _ = view_factors_strings(_wall(hi_faces, gap), _wall(lo_faces, 0.0),
                                 side_closure=True, closure_temperature=20.0)
    a = fm.areas
    assert np.abs(a[:, None] * fm.f - (a[:, None] * fm.f).T).max() < 1e-12
    assert np.all(fm.f >= 0.0)


def test_closed_enclosure_row_sums():
    fm, _ = view_factors_strings(_wall(np.linspace(0, 2, 9), 0.4),
                                 _wall(np.linspace(0, 2, 7), 0.0),
                                 side_closure=True, closure_temperature=20.0)
    assert np.allclose(fm.row_sums(), 1.0, atol=1e-10)


def test_open_pair_row_sums_below_one():
    fm, _ = view_factors_strings(_strip(0, 1, 0.5), _strip(0, 1, 0.0))
    assert np.all(fm.row_sums() <= 1.0 + 1e-12)


def test_refinement_consistency_of_aggregate_factor():
    # doubling the element count changes the strip-to-strip aggregate by <1e-3
    def aggregate(n):
        faces = np.linspace(0.0, 1.0, n + 1)
        fm, _ = view_factors_strings(_wall(faces, 1.0), _wall(faces, 0.0))
        a = fm.areas[:n]
        f_lower_to_upper = fm.f[:n, n:]
        return float((a @ f_lower_to_upper.sum(axis=1)) / a.sum())

    assert abs(aggregate(8) - aggregate(16)) < 1e-3
    assert aggregate(16) == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-3)


def test_zero_length_element_rejected():
    with pytest.raises(GeometryError):
        _strip(0.5, 0.5, 0.0)


def test_isothermal_enclosure_zero_net():
    fm, combined = view_factors_strings(_wall(np.linspace(0, 1, 5), 0.3, eps=0.85),
                                        _wall(np.linspace(0, 1, 5), 0.0, eps=0.95),
                                        side_closure=True,
                                        closure_temperature=20.0)
    res = solve_net_radiation(combined, fm, tol=1e-13)
    assert np.abs(res.q_net).max() < 1e-9


def test_infinite_parallel_black_plates_identity():
    # F = 1 closure between two elements
    surf = RadiationSurface(np.array([[0.0, 0.0], [1.0, 1.0]]),
                            np.array([[1.0, 0.0], [0.0, 1.0]]),
                            np.array([1.0, 1.0]), np.array([100.0, 0.0]))
    fm = ViewFactorMatrix(f=np.array([[0.0, 1.0], [1.0, 0.0]]),
                          areas=np.array([1.0, 1.0]))
    res = solve_net_radiation(surf, fm, tol=1e-12)
    exact = STEFAN_BOLTZMANN * ((100.0 + KELVIN) ** 4 - KELVIN ** 4)
    assert res.q_net[0] == pytest.approx(exact, rel=1e-12)
    assert res.q_net[1] == pytest.approx(-exact, rel=1e-12)


def test_gray_enclosure_power_balance():
    fm, combined = view_factors_strings(
        _wall(np.linspace(0, 1, 7), 0.3, eps=0.85, temp=35.0),
        _wall(np.linspace(0, 1, 7), 0.0, eps=0.95, temp=70.0),
        side_closure=True, closure_temperature=22.0)
    res = solve_net_radiation(combined, fm, tol=1e-13)
    total = float(np.sum(fm.areas * res.q_net))
    scale = float(np.sum(np.abs(fm.areas * res.q_net)))
    assert abs(total) <= 1e-9 * scale


def test_iteration_contraction_residuals():
    fm, combined = view_factors_strings(
        _wall(np.linspace(0, 1, 5), 0.3, eps=0.4, temp=30.0),
        _wall(np.linspace(0, 1, 5), 0.0, eps=0.6, temp=80.0),
        side_closure=True, closure_temperature=22.0)
    res = solve_net_radiation(combined, fm, tol=1e-12)
    tail = res.residuals[max(1, int(0.1 * res.residuals.size)):]
    assert np.all(np.diff(tail) <= 1e-15)


def test_swap_wall_temperatures_antisymmetric():
    # radiosity is linear in sigma T^4, so with equal wall emissivities and
    # the closure held at the fourth-power mean the swap flips q_net exactly
    lo_t, hi_t = 70.0, 30.0
    t_c = ((0.5 * ((lo_t + KELVIN) ** 4 + (hi_t + KELVIN) ** 4)) ** 0.25) - KELVIN
    fm, c1 = view_factors_strings(_wall(np.linspace(0, 1, 5), 0.3, eps=0.8, temp=hi_t),
                                  _wall(np.linspace(0, 1, 5), 0.0, eps=0.8, temp=lo_t),
                                  side_closure=True, closure_temperature=t_c)
    _, c2 = view_factors_strings(_wall(np.linspace(0, 1, 5), 0.3, eps=0.8, temp=lo_t),
                                 _wall(np.linspace(0, 1, 5), 0.0, eps=0.8, temp=hi_t),
                                 side_closure=True, closure_temperature=t_c)
    r1 = solve_net_radiation(c1, fm, tol=1e-13).q_net
    r2 = solve_net_radiation(c2, fm, tol=1e-13).q_net
    n = 4
    # same-wall sign flip plus mirrored equality between the two walls
    assert np.allclose(r1[:n], -r2[:n], atol=1e-9)
    assert np.allclose(r1[:n], r2[n + 1:2 * n + 1], atol=1e-9)


def test_shortwave_absorption_offsets_net():
    surf = RadiationSurface(np.array([[0.0, 0.0], [1.0, 1.0]]),
                            np.array([[1.0, 0.0], [0.0, 1.0]]),
                            np.array([0.95, 0.85]), np.array([20.0, 20.0]))
    fm = ViewFactorMatrix(f=np.array([[0.0, 1.0], [1.0, 0.0]]),
                          areas=np.array([1.0, 1.0]))
    base = solve_net_radiation(surf, fm, tol=1e-12).q_net
    lit = solve_net_radiation(surf, fm, shortwave_incident=np.array([468.0, 0.0]),
                              tol=1e-12).q_net
    assert lit[0] == pytest.approx(base[0] - 0.95 * 468.0)
    assert lit[1] == pytest.approx(base[1])
