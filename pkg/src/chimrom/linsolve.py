"""Preconditioned BiCGSTAB over callable linear operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    restarts: int


def bicgstab(apply_a, b, x0=None, tol: float = 1e-9, max_iter: int = 500,
             precond=None):
    """Solve A x = b to a relative residual ||A x - b|| / ||b|| <= tol.

    ``apply_a`` maps a vector to A @ vector; ``precond`` (optional) applies an
    approximate inverse. A rho-breakdown triggers one restart from the current
    iterate before failing with diagnostics.
    """
    b = np.asarray(b, dtype=np.float64)
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, 0)
    if precond is None:
        def precond(v):
            return v

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply_a(x)
    res = float(np.linalg.norm(r))
    if res <= tol * norm_b:
        return x, SolveInfo(0, res / norm_b, 0)

    restarts = 0
    r_shadow = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    breakdown = 1e-30

    it = 0
    while it < max_iter:
        it += 1
        rho = float(r_shadow @ r)
        if abs(rho) < breakdown * max(res ** 2, 1e-300):
            if restarts >= 1:
                raise ConvergenceError(
                    f"BiCGSTAB breakdown (rho ~ 0) after {it} iterations, "
                    f"residual {res / norm_b:.3e}",
                    iterations=it, residual=res / norm_b, restarts=restarts)
            restarts += 1
            r = b - apply_a(x)
            r_shadow = r.copy()
            rho_old = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            rho = float(r_shadow @ r)
        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = precond(p)
        v = apply_a(p_hat)
        denom = float(r_shadow @ v)
        if denom == 0.0:
            if restarts >= 1:
                raise ConvergenceError(
                    f"BiCGSTAB alpha breakdown after {it} iterations, "
                    f"residual {res / norm_b:.3e}",
                    iterations=it, residual=res / norm_b, restarts=restarts)
            restarts += 1
            r = b - apply_a(x)
            r_shadow = r.copy()
            rho_old = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        alpha = rho / denom
        s = r - alpha * v
        res = float(np.linalg.norm(s))
        if res <= tol * norm_b:
            x = x + alpha * p_hat
            return x, SolveInfo(it, res / norm_b, restarts)
        s_hat = precond(s)
        t = apply_a(s_hat)
        tt = float(t @ t)
        omega = float(t @ s) / tt if tt > 0.0 else 0.0
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        res = float(np.linalg.norm(r))
        if res <= tol * norm_b:
            return x, SolveInfo(it, res / norm_b, restarts)
        if omega == 0.0:
            if restarts >= 1:
                raise ConvergenceError(
                    f"BiCGSTAB omega breakdown after {it} iterations, "
                    f"residual {res / norm_b:.3e}",
                    iterations=it, residual=res / norm_b, restarts=restarts)
            restarts += 1
            r = b - apply_a(x)
            r_shadow = r.copy()
            rho_old = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        rho_old = rho

    raise ConvergenceError(
        f"BiCGSTAB exceeded {max_iter} iterations, residual {res / norm_b:.3e}",
        iterations=max_iter, residual=res / norm_b, restarts=restarts)


def jacobi_preconditioner(diagonal: np.ndarray):
    """Pointwise inverse-diagonal preconditioner."""
    inv = 1.0 / np.asarray(diagonal, dtype=np.float64)

    def apply(v):
        return inv * v

    return apply


def ilu_preconditioner(mat, drop_tol: float = 1e-5, fill_factor: float = 12.0):
    """Incomplete-LU preconditioner (SuperLU); falls back to Jacobi on failure."""
    import scipy.sparse.linalg as spla
    try:
        ilu = spla.spilu(mat.tocsc(), drop_tol=drop_tol, fill_factor=fill_factor)
        return ilu.solve
    except RuntimeError:
        return jacobi_preconditioner(mat.diagonal())
