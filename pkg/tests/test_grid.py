import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chimrom.errors import ConfigError, DomainError
from chimrom.grid import (Axis1D, build_case_mesh, build_tanh_axis,
                          interpolate_to_mesh, mesh_report,
                          solve_beta_for_min_width)


def test_tanh_axis_uniform_limit():
    ax = build_tanh_axis(2, 1.0, 1e-12)
    assert np.allclose(ax.faces, [0.0, 0.5, 1.0])


@given(n=st.integers(2, 80), beta=st.floats(1e-6, 8.0), length=st.floats(0.01, 10.0))
@settings(max_examples=60, deadline=None)
def test_tanh_axis_widths_telescope_and_monotone(n, beta, length):
    ax = build_tanh_axis(n, length, beta)
    assert np.all(ax.widths > 0.0)
    assert np.all(np.diff(ax.faces) > 0.0)
    assert abs(ax.widths.sum() - length) <= 1e-12 * length


def test_tanh_axis_symmetry_and_wall_minimum():
    ax = build_tanh_axis(32, 1.0, 2.5)
    assert np.allclose(ax.widths, ax.widths[::-1])
    assert ax.widths.argmin() in (0, 31)
    one = build_tanh_axis(32, 1.0, 2.5, clustering="one-wall")
    assert one.widths.argmin() == 0


def test_tanh_axis_invalid_config():
    with pytest.raises(ConfigError):
        build_tanh_axis(1, 1.0, 1.0)
    with pytest.raises(ConfigError):
        build_tanh_axis(8, -1.0, 1.0)
    with pytest.raises(ConfigError):
        build_tanh_axis(8, 1.0, 0.0)


def test_beta_solve_hits_paper_m3_wall_resolution():
    # Table-3 style target: 64 cells over the 0.3 m gap, 3.8e-4 m wall cell
    beta = solve_beta_for_min_width(64, 0.3, 3.8e-4)
    ax = build_tanh_axis(64, 0.3, beta)
    assert ax.widths.min() == pytest.approx(3.8e-4, rel=1e-6)


def test_beta_solve_monotone_oracle():
    # bisection is justified by monotone min-width vs beta
    betas = np.linspace(0.2, 6.0, 25)
    widths = [build_tanh_axis(24, 1.0, b).widths.min() for b in betas]
    assert np.all(np.diff(widths) < 0.0)


def test_beta_solve_rejects_unreachable_target():
    with pytest.raises(ConfigError):
        solve_beta_for_min_width(10, 1.0, 0.2)  # above uniform width


def _mesh(nx, ny, beta=1e-9):
    from chimrom.grid import DomainMesh
    return DomainMesh("air", build_tanh_axis(nx, 1.0, beta),
                      build_tanh_axis(ny, 0.5, beta))


def test_interpolate_constant_and_affine_exact():
    src, dst = _mesh(17, 9, beta=1.1), _mesh(8, 5, beta=0.7)
    const = np.full(src.shape, 3.7)
    assert np.allclose(interpolate_to_mesh(const, src, dst), 3.7)
    xs, ys = src.axis_x.centers[None, :], src.axis_y.centers[:, None]
    xd, yd = dst.axis_x.centers[None, :], dst.axis_y.centers[:, None]
    affine = 1.0 + 2.0 * xs - 0.5 * ys
    out = interpolate_to_mesh(affine, src, dst)
    assert np.allclose(out, 1.0 + 2.0 * xd - 0.5 * yd, atol=1e-12)


def test_interpolate_quadratic_second_order():
    # brute-force error measurement on two mesh pairs: halving h must shrink
    # the fine->coarse max error by at least 3.5x
    errs = []
    for n in (16, 32):
        fine, coarse = _mesh(2 * n, 2 * n), _mesh(5, 5)
        f = fine.axis_x.centers[None, :] ** 2 * np.ones((2 * n, 1))
        out = interpolate_to_mesh(f, fine, coarse)
        exact = coarse.axis_x.centers[None, :] ** 2 * np.ones((5, 1))
        errs.append(np.abs(out - exact).max())
    assert errs[0] / errs[1] >= 3.5


def test_interpolate_linearity_property():
    rng = np.random.default_rng(7)
    src, dst = _mesh(12, 7), _mesh(9, 11)
    f, g = rng.standard_normal(src.shape), rng.standard_normal(src.shape)
    a, b = 1.3, -0.6
    lhs = interpolate_to_mesh(a * f + b * g, src, dst)
    rhs = a * interpolate_to_mesh(f, src, dst) + b * interpolate_to_mesh(g, src, dst)
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_interpolate_extent_mismatch():
    from chimrom.grid import DomainMesh
    src = _mesh(8, 8)
    dst = DomainMesh("air", build_tanh_axis(8, 2.0, 1e-9), build_tanh_axis(8, 0.5, 1e-9))
    with pytest.raises(DomainError):
        interpolate_to_mesh(np.zeros(src.shape), src, dst)


def test_case_mesh_paper_extents_and_interface_maps():
    mesh = build_case_mesh(nx=24, length=1.0, air_ny=12, air_gap=0.3,
                           pcm_ny=6, pcm_thickness=0.03,
                           glass_ny=3, glass_thickness=0.006, theta_deg=45.0)
    assert mesh.air.extents() == (0.0, 1.0, 0.0, 0.3)
    assert mesh.pcm.extents()[2] == pytest.approx(-0.03)
    assert mesh.glass.extents()[3] == pytest.approx(0.306)
    # interface maps compose to identity
    inv = np.argsort(mesh.air_pcm_map)
    assert np.array_equal(mesh.air_pcm_map[inv], np.arange(24))
    assert "air" in mesh_report(mesh)


def test_axis_rejects_nonmonotone_faces():
    with pytest.raises(ConfigError):
        Axis1D(np.array([0.0, 0.2, 0.2, 1.0]))
