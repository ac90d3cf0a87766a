import numpy as np
import pytest
import scipy.sparse as sp

from chimrom.errors import ConvergenceError
from chimrom.linsolve import bicgstab, jacobi_preconditioner


def poisson2d(n):
    """SPD 5-point Laplacian on an n x n grid (Dirichlet)."""
    main = 4.0 * np.ones(n * n)
    side = -np.ones(n * n - 1)
    side[np.arange(1, n * n) % n == 0] = 0.0
    updown = -np.ones(n * n - n)
    return sp.diags([main, side, side, updown, updown],
                    [0, 1, -1, n, -n], format="csr")


def test_identity_operator_single_iteration():
    b = np.arange(1.0, 6.0)
    x, info = bicgstab(lambda v: v, b, tol=1e-12)
    assert np.allclose(x, b)
    assert info.iterations <= 1


def test_zero_rhs_returns_zero_immediately():
    x, info = bicgstab(lambda v: 2.0 * v, np.zeros(7))
    assert np.all(x == 0.0)
    assert info.iterations == 0


def test_poisson_vs_direct_solve_oracle():
    n = 32
    a = poisson2d(n)
    rng = np.random.default_rng(3)
    b = rng.standard_normal(n * n)
    x, info = bicgstab(a.dot, b, tol=1e-10, max_iter=1000,
                       precond=jacobi_preconditioner(a.diagonal()))
    x_direct = sp.linalg.spsolve(a.tocsc(), b)
    assert info.iterations < 200
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert np.abs(x - x_direct).max() < 1e-8


def test_nonsymmetric_convection_diffusion():
    n = 24
    a = poisson2d(n).tolil()
    # add an upwind convection bias
    for i in range(1, n * n):
        if i % n:
            a[i, i - 1] += -1.5
            a[i, i] += 1.5
    a = a.tocsr()
    b = np.ones(n * n)
    x, info = bicgstab(a.dot, b, tol=1e-10, max_iter=2000,
                       precond=jacobi_preconditioner(a.diagonal()))
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_warm_start_reduces_iterations():
    n = 24
    a = poisson2d(n)
    b = np.sin(np.linspace(0, 7, n * n))
    x_cold, info_cold = bicgstab(a.dot, b, tol=1e-10, max_iter=1000)
    x_warm, info_warm = bicgstab(a.dot, b, x0=x_cold, tol=1e-10, max_iter=1000)
    assert info_warm.iterations <= 1


def test_max_iter_exhaustion_raises_with_diagnostics():
    a = poisson2d(16)
    b = np.ones(256)
    with pytest.raises(ConvergenceError) as err:
        bicgstab(a.dot, b, tol=1e-14, max_iter=2)
    assert "residual" in str(err.value)
    assert err.value.diagnostics["iterations"] == 2
