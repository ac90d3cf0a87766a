import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chimrom.errors import ConfigError
from chimrom.numerics import (BDF2, BDF3, bdf_coeffs, bdf_ladder, weno3_face,
                              weno3_weights)


def test_weno_constant_consistency():
    assert weno3_face(3.0, 3.0, 3.0) == pytest.approx(3.0, abs=1e-14)


def test_weno_linear_exactness():
    assert weno3_face(0.0, 1.0, 2.0) == pytest.approx(1.5, abs=1e-12)
    assert weno3_face(0.0, 1.0, 2.0, upwind_from_left=False) == pytest.approx(0.5, abs=1e-12)


def test_weno_step_biases_smooth_substencil():
    w0, w1 = weno3_weights(0.0, 0.0, 1.0)
    assert w0 > 0.9
    val = weno3_face(0.0, 0.0, 1.0)
    assert 0.0 <= val <= 1.0
    assert val == pytest.approx(0.0, abs=1e-4)


def test_weno_weights_convex():
    w0, w1 = weno3_weights(0.2, 0.9, 1.4)
    assert w0 >= 0.0 and w1 >= 0.0
    assert w0 + w1 == pytest.approx(1.0)


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(0, 10))
@settings(max_examples=200, deadline=None)
def test_weno_monotone_data_no_overshoot(base, d1, d2):
    # monotone increasing stencil: face value stays inside the data range
    a, b, c = base, base + d1, base + d1 + d2
    rng = max(abs(a), abs(b), abs(c), 1.0)
    val = weno3_face(a, b, c)
    assert a - 1e-8 * rng <= val <= c + 1e-8 * rng


def test_weno_third_order_on_smooth_data():
    # reconstruct face point values from exact cell averages of sin with the
    # order-preserving eps ~ h^2 scaling (plain eps loses order at extrema)
    errs = []
    for n in (32, 64, 128):
        h = 1.0 / n
        faces = np.arange(n + 1) * h
        k = 2 * np.pi
        avg = (np.cos(k * faces[:-1]) - np.cos(k * faces[1:])) / (k * h)
        face_val = weno3_face(avg[:-2], avg[1:-1], avg[2:], eps=h * h)
        exact = np.sin(k * faces[2:-1])
        errs.append(np.abs(face_val - exact).max())
    assert np.log2(errs[1] / errs[2]) > 2.5
    assert errs[0] / errs[2] > 30.0


def test_weno_linear_weights_reconstruction_third_order():
    # underlying optimal-weight reconstruction (-1, 5, 2)/6 is cleanly O(h^3)
    errs = []
    for n in (16, 32, 64):
        h = 1.0 / n
        faces = np.arange(n + 1) * h
        k = 2 * np.pi
        avg = (np.cos(k * faces[:-1]) - np.cos(k * faces[1:])) / (k * h)
        rec = (-avg[:-2] + 5.0 * avg[1:-1] + 2.0 * avg[2:]) / 6.0
        errs.append(np.abs(rec - np.sin(k * faces[2:-1])).max())
    orders = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(orders) > 2.8


def test_bdf_blend_matches_hand_blend():
    c = bdf_coeffs((0.52, 0.48))
    assert c == pytest.approx((1.66, -2.48, 0.98, -0.16), abs=1e-12)
    for ci, c2, c3 in zip(c, BDF2, BDF3):
        assert ci == pytest.approx(0.52 * c2 + 0.48 * c3)


def test_bdf_consistency_zero_sum_and_first_order():
    c = bdf_coeffs()
    assert sum(c) == pytest.approx(0.0, abs=1e-14)
    # exact derivative of phi = t at t = 3 dt with levels 3,2,1,0
    levels = np.array([3.0, 2.0, 1.0, 0.0])
    assert float(np.dot(c, levels)) == pytest.approx(1.0, abs=1e-12)


def test_bdf_constant_sequence_annihilated():
    c = bdf_coeffs()
    assert float(np.dot(c, np.full(4, 7.3))) == pytest.approx(0.0, abs=1e-12)


def test_bdf_ladder_startup():
    assert bdf_ladder(1) == (1.0, -1.0, 0.0, 0.0)
    assert bdf_ladder(2) == (1.5, -2.0, 0.5, 0.0)
    assert bdf_ladder(3) == bdf_coeffs()
    assert bdf_ladder(9) == bdf_coeffs()


def test_bdf_rejects_bad_blend():
    with pytest.raises(ConfigError):
        bdf_coeffs((0.6, 0.6))
