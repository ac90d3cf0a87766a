"""Forward full-order model.

Unsteady incompressible Navier-Stokes + energy on a staggered anisotropic
mesh: WENO3 convection, central diffusion, blended BDF2/BDF3 stepping with a
startup ladder, SIMPLEC pressure correction, ILU-preconditioned BiCGSTAB
solves, coupled glass-air-PCM energy with conjugate interfaces and net
surface radiation, and run diagnostics.

Layout conventions per fluid domain of shape (ny, nx):
u (ny, nx+1) on x-faces, v (ny+1, nx) on y-faces, P and T (ny, nx) on cells.
x runs along the channel (inlet x=0), y wall-normal. Pressures are gauge
(relative to P0 = 1 atm).

Two scheme details keep the per-step fixed point fast and are transparent at
convergence: matrix sparsity layouts are recorded once and replayed
(value-only reassembly), and the WENO weights/upwind orientations are frozen
once per step from the time-extrapolated predictor state (an O(dt^2)-lagged
evaluation, consistent with the second-order stepping).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ConvergenceError, DomainError, NumericError
from .grid import DomainMesh, MultiDomainMesh, interpolate_to_mesh
from .linsolve import bicgstab, ilu_preconditioner
from .numerics import bdf_ladder
from .physics import (AirGlassProperties, GsSchedule, PcmProperties, RoomModel,
                      blended_pcm_property, buoyancy_force, effective_cp,
                      external_htc, glass_absorption_sources, liquid_fraction,
                      mushy_momentum_coeff, room_temperature)
from .radiation import (RadiationSurface, concatenate_surfaces,
                        solve_net_radiation, view_factors_strings)

P_ATM = 101325.0


# ---------------------------------------------------------------------------
# sparse machinery: fixed-pattern CSR and a record/replay value tape


class _Pattern:
    """Precomputed COO -> CSR reduction for a fixed sparsity layout."""

    def __init__(self, n: int, rows: np.ndarray, cols: np.ndarray):
        order = np.lexsort((cols, rows))
        rs, cs = rows[order], cols[order]
        new = np.ones(rs.size, dtype=bool)
        new[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
        starts = np.flatnonzero(new)
        self.order = order
        self.starts = starts
        indices = cs[starts]
        urows = rs[starts]
        indptr = np.searchsorted(urows, np.arange(n + 1)).astype(np.int32)
        self.mat = sp.csr_matrix((np.zeros(starts.size),
                                  indices.astype(np.int32), indptr), shape=(n, n))
        self.diag_slots = np.flatnonzero(urows == indices)
        self._ones = np.ones(n)

    def assemble(self, vals: np.ndarray) -> sp.csr_matrix:
        self.mat.data[:] = np.add.reduceat(vals[self.order], self.starts)
        return self.mat

    def diagonal(self) -> np.ndarray:
        return self.mat.data[self.diag_slots]

    def row_sums(self) -> np.ndarray:
        return self.mat @ self._ones


class _Tape:
    """Value accumulator whose entry layout is recorded once and replayed.

    Assembly code calls add() in a deterministic order; after the first pass
    the (row, col) layout is frozen, so later passes only rewrite the value
    buffer and re-reduce into the cached CSR pattern.
    """

    def __init__(self):
        self.recording = True
        self._rows, self._cols, self._vals0 = [], [], []
        self.shapes, self.offsets = [], []
        self._pos = 0
        self.buf = None
        self.zero_idx = None
        self.pattern = None
        self._slot = 0

    def begin(self):
        self._slot = 0

    def add(self, rows, cols, vals):
        if self.recording:
            r, c, v = np.broadcast_arrays(rows, cols, vals)
            self._rows.append(r.ravel().astype(np.int64))
            self._cols.append(c.ravel().astype(np.int64))
            self._vals0.append(np.array(v, dtype=np.float64).ravel())
            self.shapes.append(r.shape)
            self.offsets.append(self._pos)
            self._pos += r.size
        else:
            shape = self.shapes[self._slot]
            off = self.offsets[self._slot]
            n = int(np.prod(shape))
            self.buf[off:off + n] = np.broadcast_to(
                np.asarray(vals, dtype=np.float64), shape).ravel()
            self._slot += 1

    def finalize(self, n_rows: int, dirichlet_rows=None) -> sp.csr_matrix:
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals0)
        if dirichlet_rows is not None and len(dirichlet_rows):
            dr = np.asarray(dirichlet_rows, dtype=np.int64)
            self.zero_idx = np.flatnonzero(np.isin(rows, dr))
            vals[self.zero_idx] = 0.0
            rows = np.concatenate([rows, dr])
            cols = np.concatenate([cols, dr])
            vals = np.concatenate([vals, np.ones(dr.size)])
        self.buf = vals
        self.pattern = _Pattern(n_rows, rows, cols)
        self.recording = False
        del self._rows, self._cols, self._vals0
        return self.pattern.assemble(self.buf)

    def replay(self) -> sp.csr_matrix:
        if self.zero_idx is not None:
            self.buf[self.zero_idx] = 0.0
        return self.pattern.assemble(self.buf)


# ---------------------------------------------------------------------------
# WENO3 convection: per-step frozen weights, value-only flux assembly


class ConvAxis:
    """Static geometry for interior-face convection along the last axis.

    node_x (n,) transported-node positions; face_x (n-1,) flux-face
    positions, face k sitting between nodes k and k+1.
    """

    def __init__(self, node_x: np.ndarray, face_x: np.ndarray):
        self.node_x = node_x
        self.face_x = face_x
        n = node_x.size
        k = np.arange(n - 1)
        self.n = n
        self.km1 = np.clip(k - 1, 0, n - 1)
        self.kp2 = np.clip(k + 2, 0, n - 1)
        self.h = node_x[1:] - node_x[:-1]
        self.du = np.where(k > 0, node_x[k] - node_x[self.km1], 1.0)
        self.duu = np.where(k < n - 2, node_x[self.kp2] - node_x[k + 1], 1.0)
        self.r1p = (face_x - node_x[:-1]) / self.h
        self.r0p = np.where(k > 0, (face_x - node_x[k]) / self.du, 0.0)
        self.r1n = (face_x - node_x[1:]) / (node_x[:-1] - node_x[1:])
        self.r0n = np.where(k < n - 2, (face_x - node_x[k + 1]) / (-self.duu), 0.0)
        self.has_uu_pos = k > 0
        self.has_uu_neg = k < n - 2
        self.offsets = [self.km1, k, k + 1, self.kp2]


def weno_face_table(axis: ConvAxis, phi: np.ndarray, mflux: np.ndarray,
                    eps: float) -> np.ndarray:
    """Face-value coefficients (..., n-1, 4) on node offsets (k-1 .. k+2).

    Smoothness weights and the upwind orientation come from ``phi`` and the
    sign of ``mflux``; inactive slots hold structural zeros so the sparsity
    layout never changes.
    """
    k = np.arange(axis.n - 1)
    pos = mflux >= 0.0

    slope_c = (phi[..., 1:] - phi[..., :-1]) / axis.h
    slope_u = (phi[..., k] - phi[..., axis.km1]) / axis.du
    b1 = (slope_c * axis.h) ** 2
    b0 = (slope_u * axis.h) ** 2
    a0 = (1.0 / 3.0) / (eps + b0) ** 2
    a1 = (2.0 / 3.0) / (eps + b1) ** 2
    w0p = np.where(axis.has_uu_pos, a0 / (a0 + a1), 0.0)
    w1p = 1.0 - w0p

    slope_uu = (phi[..., axis.kp2] - phi[..., k + 1]) / axis.duu
    b0 = (slope_uu * axis.h) ** 2
    a0 = (1.0 / 3.0) / (eps + b0) ** 2
    a1 = (2.0 / 3.0) / (eps + b1) ** 2
    w0n = np.where(axis.has_uu_neg, a0 / (a0 + a1), 0.0)
    w1n = 1.0 - w0n

    c = np.zeros(phi.shape[:-1] + (axis.n - 1, 4))
    c[..., 0] = np.where(pos, -w0p * axis.r0p, 0.0)
    c[..., 1] = np.where(pos, w0p * (1.0 + axis.r0p) + w1p * (1.0 - axis.r1p),
                         w1n * axis.r1n)
    c[..., 2] = np.where(pos, w1p * axis.r1p,
                         w0n * (1.0 + axis.r0n) + w1n * (1.0 - axis.r1n))
    c[..., 3] = np.where(pos, 0.0, -w0n * axis.r0n)
    return c


def apply_convection(tape: _Tape, row_ids: np.ndarray, node_ids: np.ndarray,
                     axis: ConvAxis, coeff: np.ndarray, mflux: np.ndarray,
                     defect: np.ndarray):
    """Flux-difference convection entries from a frozen coefficient table.

    Adds +m_f c to the cell left of each interior face and -m_f c to the
    right cell, and accumulates the net-outflow defect used by the
    constant-preserving linearization.
    """
    for s in range(4):
        cols = node_ids[..., axis.offsets[s]]
        mc = mflux * coeff[..., s]
        tape.add(row_ids[..., :-1], cols, mc)
        tape.add(row_ids[..., 1:], cols, -mc)
    defect[..., :-1] += mflux
    defect[..., 1:] -= mflux


def diffuse_axis(tape: _Tape, row_ids: np.ndarray, node_ids: np.ndarray,
                 node_x: np.ndarray, gamma_face: np.ndarray, area: np.ndarray):
    """Central two-point diffusion along the last axis (interior faces)."""
    dist = node_x[1:] - node_x[:-1]
    cond = gamma_face * area / dist
    left, right = row_ids[..., :-1], row_ids[..., 1:]
    tape.add(left, node_ids[..., :-1], cond)
    tape.add(left, node_ids[..., 1:], -cond)
    tape.add(right, node_ids[..., 1:], cond)
    tape.add(right, node_ids[..., :-1], -cond)


# ---------------------------------------------------------------------------
# state containers


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    t: np.ndarray

    def copy(self) -> "FlowField":
        return FlowField(self.u.copy(), self.v.copy(), self.p.copy(), self.t.copy())


@dataclass
class SolverState:
    time: float
    t_room: float
    air: FlowField
    pcm: FlowField
    glass_t: np.ndarray
    f_pc: np.ndarray
    history: list = field(default_factory=list)   # newest first
    levels: int = 0                               # usable same-dt history depth
    last_dt: float = 0.0

    def copy(self) -> "SolverState":
        st = SolverState(self.time, self.t_room, self.air.copy(),
                         self.pcm.copy(), self.glass_t.copy(),
                         self.f_pc.copy(), list(self.history), self.levels)
        st.last_dt = self.last_dt
        return st

    def check_finite(self):
        for name, arr in (("u_air", self.air.u), ("v_air", self.air.v),
                          ("p_air", self.air.p), ("t_air", self.air.t),
                          ("u_pcm", self.pcm.u), ("v_pcm", self.pcm.v),
                          ("t_pcm", self.pcm.t), ("t_glass", self.glass_t)):
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite values in {name}")


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 1.0
    t_end: float = 1800.0
    halve_until: float = 1800.0
    snapshot_every: float = 30.0
    outer_tol: float = 1e-6
    outer_max: int = 60
    lin_tol: float = 1e-9
    lin_max: int = 2000
    relax_momentum: float = 0.9
    relax_pressure: float = 1.0
    relax_energy: float = 0.95
    weno_eps: float = 1e-6
    bdf_blend: tuple = (0.52, 0.48)
    radiation_tol: float = 1e-5
    radiation_max: int = 10000

    def __post_init__(self):
        if abs(self.bdf_blend[0] + self.bdf_blend[1] - 1.0) > 1e-12:
            raise ConfigError("BDF blend weights must sum to 1")
        if self.outer_tol <= 0 or self.lin_tol <= 0:
            raise ConfigError("tolerances must be positive")

    @staticmethod
    def from_config(cfg) -> "SchemeConfig":
        s, t = cfg.section("solver"), cfg.section("time")
        return SchemeConfig(
            dt=t["dt_s"], t_end=t["t_end_s"], halve_until=t["halve_until_s"],
            snapshot_every=t["snapshot_every_s"],
            outer_tol=s["outer_tol"], outer_max=s["outer_max"],
            lin_tol=s["lin_tol"], lin_max=s["lin_max"],
            relax_momentum=s["relax_momentum"], relax_pressure=s["relax_pressure"],
            relax_energy=s["relax_energy"], weno_eps=s["weno_eps"],
            bdf_blend=(s["bdf_w2"], s["bdf_w3"]),
            radiation_tol=s["radiation_tol"], radiation_max=s["radiation_max"])


def _normalized_residual(mat: sp.csr_matrix, rhs: np.ndarray, x: np.ndarray) -> float:
    r = rhs - mat @ x
    top = float(np.abs(r).max()) if r.size else 0.0
    if top == 0.0:
        return 0.0
    scale = max(float(np.abs(mat.diagonal() * x).max()),
                float(np.abs(rhs).max()), 1e-30)
    return top / scale


def _relax_system(pattern: _Pattern, rhs: np.ndarray, x: np.ndarray, alpha: float):
    """Implicit under-relaxation applied in place to an assembled system."""
    if alpha >= 1.0:
        return rhs
    slots = pattern.diag_slots
    diag = pattern.mat.data[slots]
    extra = diag * (1.0 / alpha - 1.0)
    pattern.mat.data[slots] = diag + extra
    return rhs + extra * x


# ---------------------------------------------------------------------------
# single-domain momentum + SIMPLEC machinery


class FluidDomain:
    """Momentum predictor and SIMPLEC correction for one flow layer.

    bc_x = "open" gives the chimney inlet/outlet treatment (boundary-face
    half-CV momentum with prescribed face pressures anchoring the level);
    "wall" closes the box. ``lid_u`` sets the top-wall tangential velocity
    (cavity benchmark mode).
    """

    def __init__(self, mesh: DomainMesh, rho: float, mu: float,
                 bc_x: str = "wall", lid_u: float = 0.0,
                 pin_pressure: bool = False):
        self.mesh = mesh
        self.rho_ref = rho
        self.mu_ref = mu
        self.bc_x = bc_x
        self.lid_u = lid_u
        self.pin_pressure = pin_pressure
        ax, ay = mesh.axis_x, mesh.axis_y
        self.xc, self.xf, self.dx = ax.centers, ax.faces, ax.widths
        self.yc, self.yf, self.dy = ay.centers, ay.faces, ay.widths
        self.ny, self.nx = mesh.shape
        self.dxu = np.empty(self.nx + 1)
        self.dxu[1:-1] = self.xc[1:] - self.xc[:-1]
        self.dxu[0] = self.xc[0] - self.xf[0]
        self.dxu[-1] = self.xf[-1] - self.xc[-1]
        self.dyv = np.empty(self.ny + 1)
        self.dyv[1:-1] = self.yc[1:] - self.yc[:-1]
        self.dyv[0] = self.yc[0] - self.yf[0]
        self.dyv[-1] = self.yf[-1] - self.yc[-1]
        self.n_u = self.ny * (self.nx + 1)
        self.n_v = (self.ny + 1) * self.nx
        self.n_p = self.ny * self.nx
        self.uid = np.arange(self.n_u).reshape(self.ny, self.nx + 1)
        self.vid = np.arange(self.n_v).reshape(self.ny + 1, self.nx)
        self.pid = np.arange(self.n_p).reshape(self.ny, self.nx)
        # convection axes: u nodes sit on xf x yc, v nodes on xc x yf
        self.ax_u_x = ConvAxis(self.xf, self.xc)
        self.ax_u_y = ConvAxis(self.yc, self.yf[1:-1])
        self.ax_v_x = ConvAxis(self.xc, self.xf[1:-1])
        self.ax_v_y = ConvAxis(self.yf, self.yc)
        self.tape_u = _Tape()
        self.tape_v = _Tape()
        self.tape_p = _Tape()
        self.du = np.zeros((self.ny, self.nx + 1))
        self.dv = np.zeros((self.ny + 1, self.nx))

    # -- helpers ---------------------------------------------------------

    def face_mass_flux_x(self, u: np.ndarray) -> np.ndarray:
        return self.rho_ref * u * self.dy[:, None]

    def face_mass_flux_y(self, v: np.ndarray) -> np.ndarray:
        return self.rho_ref * v * self.dx[None, :]

    def continuity_imbalance(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        mx = self.face_mass_flux_x(u)
        my = self.face_mass_flux_y(v)
        return (mx[:, 1:] - mx[:, :-1]) + (my[1:, :] - my[:-1, :])

    def u_flux_faces(self, fl: FlowField):
        """Advecting mass fluxes through u-CV faces (x faces at cell
        centers, y faces at interior corner lines)."""
        ubar = 0.5 * (fl.u[:, :-1] + fl.u[:, 1:])
        mfx = self.rho_ref * ubar * self.dy[:, None]
        wl = (self.xc[1:] - self.xf[1:-1]) / (self.xc[1:] - self.xc[:-1])
        v_corner = np.empty((self.ny + 1, self.nx + 1))
        v_corner[:, 1:-1] = wl[None, :] * fl.v[:, :-1] + (1 - wl)[None, :] * fl.v[:, 1:]
        v_corner[:, 0] = fl.v[:, 0]
        v_corner[:, -1] = fl.v[:, -1]
        mfy = self.rho_ref * v_corner[1:-1, :] * self.dxu[None, :]
        return mfx, mfy

    def v_flux_faces(self, fl: FlowField):
        vbar = 0.5 * (fl.v[:-1, :] + fl.v[1:, :])
        mfy = self.rho_ref * vbar * self.dx[None, :]
        wb = (self.yc[1:] - self.yf[1:-1]) / (self.yc[1:] - self.yc[:-1])
        u_corner = np.empty((self.ny + 1, self.nx + 1))
        u_corner[1:-1, :] = wb[:, None] * fl.u[:-1, :] + (1 - wb)[:, None] * fl.u[1:, :]
        u_corner[0, :] = fl.u[0, :]
        u_corner[-1, :] = fl.u[-1, :]
        mfx = self.rho_ref * u_corner[:, 1:-1] * self.dyv[:, None]
        return mfx, mfy

    def freeze_momentum_weights(self, fl: FlowField, eps: float) -> dict:
        """WENO tables for both velocity components at the given state."""
        mfx_u, mfy_u = self.u_flux_faces(fl)
        mfx_v, mfy_v = self.v_flux_faces(fl)
        return {"u_x": weno_face_table(self.ax_u_x, fl.u, mfx_u, eps),
                "u_y": weno_face_table(self.ax_u_y, fl.u.T, mfy_u.T, eps),
                "v_x": weno_face_table(self.ax_v_x, fl.v, mfx_v, eps),
                "v_y": weno_face_table(self.ax_v_y, fl.v.T, mfy_v.T, eps)}

    # -- momentum assembly -------------------------------------------------

    def assemble_u(self, fl: FlowField, rho_cells, mu_cells, damp_cells,
                   body_force: np.ndarray, bdf, dt: float, hist,
                   p_in_face: float, p_out_face: float, conv: dict):
        ny, nx = self.ny, self.nx
        tape = self.tape_u
        tape.begin()
        rhs = np.zeros((ny, nx + 1))
        defect = np.zeros((ny, nx + 1))
        uid = self.uid

        rho_u = self._to_u_faces(rho_cells)
        mu_u = self._to_u_faces(mu_cells)
        damp_u = self._to_u_faces(damp_cells)
        vol = self.dxu[None, :] * self.dy[:, None]

        c1, c2, c3, c4 = bdf
        inertia = rho_u * vol / dt
        diag = inertia * c1 + damp_u * vol
        rhs -= inertia * (c2 * hist[0]["u"] + c3 * hist[1]["u"] + c4 * hist[2]["u"])
        rhs += body_force * vol

        mfx, mfy = self.u_flux_faces(fl)
        apply_convection(tape, uid, uid, self.ax_u_x, conv["u_x"], mfx, defect)
        apply_convection(tape, uid.T, uid.T, self.ax_u_y, conv["u_y"], mfy.T,
                         defect.T)

        diffuse_axis(tape, uid, uid, self.xf, mu_cells,
                     self.dy[:, None] * np.ones((ny, nx)))
        mu_corner = self._mu_at_corners(mu_cells)
        diffuse_axis(tape, uid.T, uid.T, self.yc, mu_corner[1:-1, :].T,
                     (self.dxu[None, :] * np.ones((ny - 1, nx + 1))).T)

        # wall shear at y boundaries (no-slip; top may be a moving lid)
        half_b = self.yc[0] - self.yf[0]
        half_t = self.yf[-1] - self.yc[-1]
        cond_b = mu_u[0, :] * self.dxu / half_b
        cond_t = mu_u[-1, :] * self.dxu / half_t
        tape.add(uid[0, :], uid[0, :], cond_b)
        tape.add(uid[-1, :], uid[-1, :], cond_t)
        rhs[-1, :] += cond_t * self.lid_u

        rhs[:, 1:-1] += (fl.p[:, :-1] - fl.p[:, 1:]) * self.dy[:, None]

        if self.bc_x == "open":
            # boundary half-CV: prescribed face pressures, zero boundary
            # diffusive flux, upstream-value advection through the boundary
            rhs[:, 0] += (p_in_face - fl.p[:, 0]) * self.dy
            rhs[:, -1] += (fl.p[:, -1] - p_out_face) * self.dy
            m_in = self.rho_ref * fl.u[:, 0] * self.dy
            m_out = self.rho_ref * fl.u[:, -1] * self.dy
            defect[:, 0] += -m_in
            defect[:, -1] += m_out
            tape.add(uid[:, 0], uid[:, 0], -m_in)
            tape.add(uid[:, -1], uid[:, -1], m_out)

        tape.add(uid, uid, diag - defect)

        if tape.recording:
            dirichlet = (np.concatenate([uid[:, 0], uid[:, -1]])
                         if self.bc_x == "wall" else None)
            mat = tape.finalize(self.n_u, dirichlet)
        else:
            mat = tape.replay()
        if self.bc_x == "wall":
            flat = rhs.reshape(-1)
            flat[uid[:, 0]] = 0.0
            flat[uid[:, -1]] = 0.0
        return mat, rhs.ravel()

    def assemble_v(self, fl: FlowField, rho_cells, mu_cells, damp_cells,
                   body_force: np.ndarray, bdf, dt: float, hist, conv: dict):
        ny, nx = self.ny, self.nx
        tape = self.tape_v
        tape.begin()
        rhs = np.zeros((ny + 1, nx))
        defect = np.zeros((ny + 1, nx))
        vid = self.vid

        rho_v = self._to_v_faces(rho_cells)
        mu_v = self._to_v_faces(mu_cells)
        damp_v = self._to_v_faces(damp_cells)
        vol = self.dx[None, :] * self.dyv[:, None]

        c1, c2, c3, c4 = bdf
        inertia = rho_v * vol / dt
        diag = inertia * c1 + damp_v * vol
        rhs -= inertia * (c2 * hist[0]["v"] + c3 * hist[1]["v"] + c4 * hist[2]["v"])
        rhs += body_force * vol

        mfx, mfy = self.v_flux_faces(fl)
        apply_convection(tape, vid.T, vid.T, self.ax_v_y, conv["v_y"], mfy.T,
                         defect.T)
        apply_convection(tape, vid, vid, self.ax_v_x, conv["v_x"], mfx, defect)

        diffuse_axis(tape, vid.T, vid.T, self.yf, mu_cells.T,
                     (self.dx[None, :] * np.ones((ny, nx))).T)
        mu_corner = self._mu_at_corners(mu_cells)
        diffuse_axis(tape, vid, vid, self.xc, mu_corner[:, 1:-1],
                     self.dyv[:, None] * np.ones((ny + 1, nx - 1)))

        if self.bc_x == "wall":
            half_w = self.xc[0] - self.xf[0]
            half_e = self.xf[-1] - self.xc[-1]
            tape.add(vid[:, 0], vid[:, 0], mu_v[:, 0] * self.dyv / half_w)
            tape.add(vid[:, -1], vid[:, -1], mu_v[:, -1] * self.dyv / half_e)
        else:
            # open ends: zero x-gradient, advection by the boundary u
            u_w = np.empty(ny + 1)
            u_w[1:-1] = 0.5 * (fl.u[:-1, 0] + fl.u[1:, 0])
            u_w[0], u_w[-1] = fl.u[0, 0], fl.u[-1, 0]
            u_e = np.empty(ny + 1)
            u_e[1:-1] = 0.5 * (fl.u[:-1, -1] + fl.u[1:, -1])
            u_e[0], u_e[-1] = fl.u[0, -1], fl.u[-1, -1]
            m_w = self.rho_ref * u_w * self.dyv
            m_e = self.rho_ref * u_e * self.dyv
            defect[:, 0] += -m_w
            defect[:, -1] += m_e
            tape.add(vid[:, 0], vid[:, 0], -m_w)
            tape.add(vid[:, -1], vid[:, -1], m_e)

        tape.add(vid, vid, diag - defect)

        rhs[1:-1, :] += (fl.p[:-1, :] - fl.p[1:, :]) * self.dx[None, :]

        if tape.recording:
            dirichlet = np.concatenate([vid[0, :], vid[-1, :]])
            mat = tape.finalize(self.n_v, dirichlet)
        else:
            mat = tape.replay()
        flat = rhs.reshape(-1)
        flat[vid[0, :]] = 0.0
        flat[vid[-1, :]] = 0.0
        return mat, rhs.ravel()

    # -- face interpolation helpers ---------------------------------------

    def _to_u_faces(self, cells: np.ndarray) -> np.ndarray:
        out = np.empty((self.ny, self.nx + 1))
        out[:, 1:-1] = 0.5 * (cells[:, :-1] + cells[:, 1:])
        out[:, 0] = cells[:, 0]
        out[:, -1] = cells[:, -1]
        return out

    def _to_v_faces(self, cells: np.ndarray) -> np.ndarray:
        out = np.empty((self.ny + 1, self.nx))
        out[1:-1, :] = 0.5 * (cells[:-1, :] + cells[1:, :])
        out[0, :] = cells[0, :]
        out[-1, :] = cells[-1, :]
        return out

    def _mu_at_corners(self, mu_cells: np.ndarray) -> np.ndarray:
        out = np.empty((self.ny + 1, self.nx + 1))
        out[1:-1, 1:-1] = 0.25 * (mu_cells[:-1, :-1] + mu_cells[:-1, 1:]
                                  + mu_cells[1:, :-1] + mu_cells[1:, 1:])
        out[0, 1:-1] = 0.5 * (mu_cells[0, :-1] + mu_cells[0, 1:])
        out[-1, 1:-1] = 0.5 * (mu_cells[-1, :-1] + mu_cells[-1, 1:])
        out[:, 0] = out[:, 1]
        out[:, -1] = out[:, -2]
        out[0, 0] = mu_cells[0, 0]
        out[0, -1] = mu_cells[0, -1]
        out[-1, 0] = mu_cells[-1, 0]
        out[-1, -1] = mu_cells[-1, -1]
        return out

    # -- SIMPLEC -----------------------------------------------------------

    def simplec_coefficients(self, relax: float):
        """Face d-coefficients A_f / (aP/alpha - sum a_nb).

        The matrix off-diagonals store -a_nb (Patankar sign convention), so
        the denominator equals diag (1/alpha - 1) + row_sum.
        """
        pat_u, pat_v = self.tape_u.pattern, self.tape_v.pattern
        diag_u = pat_u.diagonal()
        den_u = diag_u * (1.0 / relax - 1.0) + pat_u.row_sums()
        den_u = np.maximum(den_u, 0.05 * np.abs(diag_u) / relax + 1e-300)
        self.du = self.dy[:, None] / den_u.reshape(self.ny, self.nx + 1)
        diag_v = pat_v.diagonal()
        den_v = diag_v * (1.0 / relax - 1.0) + pat_v.row_sums()
        den_v = np.maximum(den_v, 0.05 * np.abs(diag_v) / relax + 1e-300)
        self.dv = self.dx[None, :] / den_v.reshape(self.ny + 1, self.nx)
        if self.bc_x == "wall":
            self.du[:, 0] = 0.0
            self.du[:, -1] = 0.0
        self.dv[0, :] = 0.0
        self.dv[-1, :] = 0.0

    def assemble_pressure_correction(self, u_star, v_star):
        ny, nx = self.ny, self.nx
        pid = self.pid
        tape = self.tape_p
        tape.begin()
        rho = self.rho_ref
        a_e = rho * self.du[:, 1:-1] * self.dy[:, None]
        a_n = rho * self.dv[1:-1, :] * self.dx[None, :]
        tape.add(pid[:, :-1], pid[:, 1:], -a_e)
        tape.add(pid[:, 1:], pid[:, :-1], -a_e)
        tape.add(pid[:, :-1], pid[:, :-1], a_e)
        tape.add(pid[:, 1:], pid[:, 1:], a_e)
        tape.add(pid[:-1, :], pid[1:, :], -a_n)
        tape.add(pid[1:, :], pid[:-1, :], -a_n)
        tape.add(pid[:-1, :], pid[:-1, :], a_n)
        tape.add(pid[1:, :], pid[1:, :], a_n)
        if self.bc_x == "open":
            # fixed boundary pressures: ghost p' = 0 anchors the level
            tape.add(pid[:, 0], pid[:, 0], rho * self.du[:, 0] * self.dy)
            tape.add(pid[:, -1], pid[:, -1], rho * self.du[:, -1] * self.dy)
        rhs = -self.continuity_imbalance(u_star, v_star)
        if tape.recording:
            mat = tape.finalize(self.n_p, [0] if self.pin_pressure else None)
        else:
            mat = tape.replay()
        if self.pin_pressure:
            rhs.reshape(-1)[0] = 0.0
        return mat, rhs.ravel()

    def apply_correction(self, fl: FlowField, p_prime: np.ndarray, relax_p: float):
        pp = p_prime.reshape(self.ny, self.nx)
        fl.u[:, 1:-1] += self.du[:, 1:-1] * (pp[:, :-1] - pp[:, 1:])
        fl.v[1:-1, :] += self.dv[1:-1, :] * (pp[:-1, :] - pp[1:, :])
        if self.bc_x == "open":
            fl.u[:, 0] += self.du[:, 0] * (0.0 - pp[:, 0])
            fl.u[:, -1] += self.du[:, -1] * (pp[:, -1] - 0.0)
        fl.p += relax_p * pp


# ---------------------------------------------------------------------------
# coupled glass-air-PCM energy system


class EnergySystem:
    """Implicit coupled temperature solve over stacked air + PCM + glass."""

    def __init__(self, mesh, include_solids: bool = True):
        self.mesh = mesh
        self.include_solids = include_solids
        self.air, self.pcm, self.glass = mesh.air, mesh.pcm, mesh.glass
        self.na = self.air.n_cells
        self.np_ = self.pcm.n_cells if include_solids else 0
        self.ng = self.glass.n_cells if include_solids else 0
        self.n = self.na + self.np_ + self.ng
        self.aid = np.arange(self.na).reshape(self.air.shape)
        if include_solids:
            self.pid = self.na + np.arange(self.np_).reshape(self.pcm.shape)
            self.gid = self.na + self.np_ + np.arange(self.ng).reshape(self.glass.shape)
        self.ax_air_x = ConvAxis(self.air.axis_x.centers, self.air.axis_x.faces[1:-1])
        self.ax_air_y = ConvAxis(self.air.axis_y.centers, self.air.axis_y.faces[1:-1])
        if include_solids:
            self.ax_pcm_x = ConvAxis(self.pcm.axis_x.centers,
                                     self.pcm.axis_x.faces[1:-1])
            self.ax_pcm_y = ConvAxis(self.pcm.axis_y.centers,
                                     self.pcm.axis_y.faces[1:-1])
        self.tape = _Tape()

    def split(self, vec: np.ndarray):
        t_air = vec[:self.na].reshape(self.air.shape)
        if not self.include_solids:
            return t_air, None, None
        t_pcm = vec[self.na:self.na + self.np_].reshape(self.pcm.shape)
        t_glass = vec[self.na + self.np_:].reshape(self.glass.shape)
        return t_air, t_pcm, t_glass

    def stack(self, t_air, t_pcm=None, t_glass=None) -> np.ndarray:
        parts = [np.asarray(t_air).ravel()]
        if self.include_solids:
            parts += [np.asarray(t_pcm).ravel(), np.asarray(t_glass).ravel()]
        return np.concatenate(parts)

    def freeze_weights(self, t_air, t_pcm, air_fl, pcm_fl, air_dom, pcm_dom,
                       eps: float) -> dict:
        conv = {"air_x": weno_face_table(
                    self.ax_air_x, t_air,
                    air_dom.face_mass_flux_x(air_fl.u)[:, 1:-1], eps),
                "air_y": weno_face_table(
                    self.ax_air_y, t_air.T,
                    air_dom.face_mass_flux_y(air_fl.v)[1:-1, :].T, eps)}
        if self.include_solids:
            conv["pcm_x"] = weno_face_table(
                self.ax_pcm_x, t_pcm,
                pcm_dom.face_mass_flux_x(pcm_fl.u)[:, 1:-1], eps)
            conv["pcm_y"] = weno_face_table(
                self.ax_pcm_y, t_pcm.T,
                pcm_dom.face_mass_flux_y(pcm_fl.v)[1:-1, :].T, eps)
        return conv

    @staticmethod
    def _harmonic(ka, kb, da, db):
        return (da + db) / (da / ka + db / kb)

    def _domain_block(self, tape, ids, mesh: DomainMesh, rho_cap, lam_cells,
                      mfx, mfy, ax_x, ax_y, conv_x, conv_y, bdf, dt, hist_ts,
                      rhs, defect):
        """Interior transport terms for one domain (boundary terms are the
        caller's responsibility); returns the time-term diagonal."""
        ax, ay = mesh.axis_x, mesh.axis_y
        dx, dy = ax.widths, ay.widths
        vol = np.outer(dy, dx)
        c1, c2, c3, c4 = bdf
        inertia = rho_cap * vol / dt
        rhs -= inertia * (c2 * hist_ts[0] + c3 * hist_ts[1] + c4 * hist_ts[2])
        if mfx is not None:
            apply_convection(tape, ids, ids, ax_x, conv_x, mfx[:, 1:-1], defect)
            apply_convection(tape, ids.T, ids.T, ax_y, conv_y, mfy[1:-1, :].T,
                             defect.T)
        lam_fx = self._harmonic(lam_cells[:, :-1], lam_cells[:, 1:],
                                dx[:-1], dx[1:])
        diffuse_axis(tape, ids, ids, ax.centers, lam_fx,
                     dy[:, None] * np.ones_like(lam_fx))
        lam_fy = self._harmonic(lam_cells[:-1, :], lam_cells[1:, :],
                                dy[:-1, None], dy[1:, None])
        diffuse_axis(tape, ids.T, ids.T, ay.centers, lam_fy.T,
                     (dx[None, :] * np.ones_like(lam_fy)).T)
        return inertia * c1

    def assemble(self, t_vec_it, air_dom: FluidDomain, pcm_dom,
                 air_fl: FlowField, pcm_fl, rho_cap_air, rho_cap_pcm,
                 rho_cap_glass, lam_pcm_cells, lam_air: float, lam_glass: float,
                 bdf, dt, hist_vecs, t_room, h_ext, q_pcm_surf, q_glass_surf,
                 glass_source, conv: dict, bdy_dirichlet=None,
                 source_cells=None):
        """Unrelaxed coupled system; returns (csr, rhs).

        ``bdy_dirichlet`` optionally maps sides to boundary values for the
        air domain (MMS mode); otherwise the chimney boundary set applies.
        ``q_*_surf`` are net fluxes leaving the wall surfaces (W/m^2).
        """
        tape = self.tape
        tape.begin()
        rhs = np.zeros(self.n)
        hist_air = [self.split(h)[0] for h in hist_vecs]

        dx, dy_a = self.air.axis_x.widths, self.air.axis_y.widths
        xc_a, xf_a = self.air.axis_x.centers, self.air.axis_x.faces
        rhs_air = np.zeros(self.air.shape)
        defect_air = np.zeros(self.air.shape)
        cp_air = rho_cap_air / air_dom.rho_ref
        mfx = air_dom.face_mass_flux_x(air_fl.u) * cp_air
        mfy = air_dom.face_mass_flux_y(air_fl.v) * cp_air
        diag_air = self._domain_block(
            tape, self.aid, self.air, np.full(self.air.shape, rho_cap_air),
            np.full(self.air.shape, lam_air), mfx, mfy,
            self.ax_air_x, self.ax_air_y, conv["air_x"], conv["air_y"],
            bdf, dt, hist_air, rhs_air, defect_air)

        if bdy_dirichlet is None:
            # inlet x=0: Dirichlet T_room (diffusive half cell + inflow)
            cond_in = lam_air * dy_a / (xc_a[0] - xf_a[0])
            tape.add(self.aid[:, 0], self.aid[:, 0],
                     cond_in - np.minimum(mfx[:, 0], 0.0))
            rhs_air[:, 0] += (cond_in + np.maximum(mfx[:, 0], 0.0)) * t_room
            defect_air[:, 0] -= mfx[:, 0]
            # outlet x=L: zero-gradient temperature, advective outflow
            tape.add(self.aid[:, -1], self.aid[:, -1], mfx[:, -1])
            defect_air[:, -1] += mfx[:, -1]
        else:
            for side in ("west", "east", "south", "north"):
                self._air_dirichlet(tape, rhs_air, defect_air, side,
                                    bdy_dirichlet[side], lam_air, mfx, mfy)
        tape.add(self.aid, self.aid, diag_air - defect_air)
        rhs[:self.na] += rhs_air.ravel()
        if source_cells is not None:
            rhs[:self.na] += (source_cells * np.outer(dy_a, dx)).ravel()

        if not self.include_solids:
            mat = tape.finalize(self.n) if tape.recording else tape.replay()
            return mat, rhs

        hist_pcm = [self.split(h)[1] for h in hist_vecs]
        hist_glass = [self.split(h)[2] for h in hist_vecs]
        rhs_pcm = np.zeros(self.pcm.shape)
        defect_pcm = np.zeros(self.pcm.shape)
        # PCM convection advects face-mean rho cp_eff; velocities are tiny
        # until melt so the face averaging stays benign
        ny_p, nx_p = self.pcm.shape
        cap_x = np.empty((ny_p, nx_p + 1))
        cap_x[:, 1:-1] = 0.5 * (rho_cap_pcm[:, :-1] + rho_cap_pcm[:, 1:])
        cap_x[:, 0] = rho_cap_pcm[:, 0]
        cap_x[:, -1] = rho_cap_pcm[:, -1]
        cap_y = np.empty((ny_p + 1, nx_p))
        cap_y[1:-1, :] = 0.5 * (rho_cap_pcm[:-1, :] + rho_cap_pcm[1:, :])
        cap_y[0, :] = rho_cap_pcm[0, :]
        cap_y[-1, :] = rho_cap_pcm[-1, :]
        mfx_p = pcm_dom.face_mass_flux_x(pcm_fl.u) * cap_x / pcm_dom.rho_ref
        mfy_p = pcm_dom.face_mass_flux_y(pcm_fl.v) * cap_y / pcm_dom.rho_ref
        diag_pcm = self._domain_block(
            tape, self.pid, self.pcm, rho_cap_pcm, lam_pcm_cells, mfx_p, mfy_p,
            self.ax_pcm_x, self.ax_pcm_y, conv["pcm_x"], conv["pcm_y"],
            bdf, dt, hist_pcm, rhs_pcm, defect_pcm)
        tape.add(self.pid, self.pid, diag_pcm - defect_pcm)
        rhs[self.na:self.na + self.np_] += rhs_pcm.ravel()

        rhs_glass = np.zeros(self.glass.shape)
        diag_glass = self._domain_block(
            tape, self.gid, self.glass, rho_cap_glass,
            np.full(self.glass.shape, lam_glass), None, None, None, None,
            None, None, bdf, dt, hist_glass, rhs_glass,
            np.zeros(self.glass.shape))
        tape.add(self.gid, self.gid, diag_glass)
        vol_g = np.outer(self.glass.axis_y.widths, dx)
        rhs_glass += glass_source * vol_g
        # glass outer surface: Robin exchange with the room
        half_go = self.glass.axis_y.faces[-1] - self.glass.axis_y.centers[-1]
        cond_robin = dx / (1.0 / h_ext + half_go / lam_glass)
        tape.add(self.gid[-1, :], self.gid[-1, :], cond_robin)
        rhs_glass[-1, :] += cond_robin * t_room
        rhs[self.na + self.np_:] += rhs_glass.ravel()

        # conjugate links: air bottom <-> PCM top, air top <-> glass bottom
        half_ab = self.air.axis_y.centers[0] - self.air.axis_y.faces[0]
        half_pt = self.pcm.axis_y.faces[-1] - self.pcm.axis_y.centers[-1]
        u_ap = dx / (half_ab / lam_air + half_pt / lam_pcm_cells[-1, :])
        self._link(tape, self.aid[0, :], self.pid[-1, :], u_ap)
        half_at = self.air.axis_y.faces[-1] - self.air.axis_y.centers[-1]
        half_gb = self.glass.axis_y.centers[0] - self.glass.axis_y.faces[0]
        u_ag = dx / (half_at / lam_air + half_gb / lam_glass)
        self._link(tape, self.aid[-1, :], self.gid[0, :], u_ag)

        # net radiation leaves the solid surfaces
        rhs[self.pid[-1, :]] -= q_pcm_surf * dx
        rhs[self.gid[0, :]] -= q_glass_surf * dx

        mat = tape.finalize(self.n) if tape.recording else tape.replay()
        return mat, rhs

    def _air_dirichlet(self, tape, rhs_air, defect_air, side, t_b, lam_air,
                       mfx, mfy):
        """Half-cell Dirichlet diffusion + known-value advection (MMS mode)."""
        ax, ay = self.air.axis_x, self.air.axis_y
        if side in ("west", "east"):
            i = 0 if side == "west" else -1
            half = (ax.centers[0] - ax.faces[0]) if side == "west" \
                else (ax.faces[-1] - ax.centers[-1])
            cond = lam_air * ay.widths / half
            tape.add(self.aid[:, i], self.aid[:, i], cond)
            rhs_air[:, i] += cond * t_b
            m = mfx[:, i]
            sign = -1.0 if side == "west" else 1.0
            rhs_air[:, i] -= sign * m * t_b
            defect_air[:, i] += sign * m
        else:
            j = 0 if side == "south" else -1
            half = (ay.centers[0] - ay.faces[0]) if side == "south" \
                else (ay.faces[-1] - ay.centers[-1])
            cond = lam_air * ax.widths / half
            tape.add(self.aid[j, :], self.aid[j, :], cond)
            rhs_air[j, :] += cond * t_b
            m = mfy[0, :] if j == 0 else mfy[-1, :]
            sign = -1.0 if side == "south" else 1.0
            rhs_air[j, :] -= sign * m * t_b
            defect_air[j, :] += sign * m

    @staticmethod
    def _link(tape, ids_a, ids_b, u_link):
        tape.add(ids_a, ids_a, u_link)
        tape.add(ids_a, ids_b, -u_link)
        tape.add(ids_b, ids_b, u_link)
        tape.add(ids_b, ids_a, -u_link)


# ---------------------------------------------------------------------------
# forward model


@dataclass
class StepReport:
    time: float
    outer_iterations: int
    residual: float
    residuals: dict
    converged: bool


class ForwardModel:
    """Glass-air-PCM chimney model (SIMPLEC + coupled energy + radiation)."""

    def __init__(self, mesh: MultiDomainMesh, pcm: PcmProperties,
                 airglass: AirGlassProperties, room: RoomModel,
                 schedule: GsSchedule, scheme: SchemeConfig,
                 theta_deg: float, gravity: bool = True,
                 buoyancy_driver=None, drive_energy: bool = False):
        self.mesh = mesh
        self.pcm = pcm
        self.ag = airglass
        self.room = room
        self.schedule = schedule
        self.scheme = scheme
        self.theta = theta_deg
        self.gravity = gravity
        self.buoyancy_driver = buoyancy_driver   # callable t -> (T_air, T_pcm)
        self.drive_energy = drive_energy

        self.air_dom = FluidDomain(mesh.air, airglass.rho, airglass.mu,
                                   bc_x="open")
        self.pcm_dom = FluidDomain(mesh.pcm, pcm.rho_sol, pcm.mu, bc_x="wall",
                                   pin_pressure=True)
        self.energy = EnergySystem(mesh)

        nx = mesh.air.shape[1]
        xf = mesh.air.axis_x.faces
        self._encl_geom = (xf, float(mesh.air.axis_y.faces[0]),
                           float(mesh.air.axis_y.faces[-1]))
        dummy_lo = RadiationSurface.from_wall(xf, self._encl_geom[1],
                                              airglass.eps_plate, 20.0)
        dummy_hi = RadiationSurface.from_wall(xf, self._encl_geom[2],
                                              airglass.eps_glass, 20.0,
                                              direction=-1)
        self._fmat, _ = view_factors_strings(dummy_hi, dummy_lo,
                                             side_closure=True,
                                             closure_temperature=20.0)
        self._shortwave = np.zeros(2 * nx + 2)
        self._q_pcm = np.zeros(nx)
        self._q_glass = np.zeros(nx)
        self._q_closure = np.zeros(2)
        self._t_surf = None
        self._pc = {}
        self._pc_age = {}
        self._conv = None

    # -- linear solves -------------------------------------------------------

    def _solve(self, name: str, mat, rhs, x0, outer_res: float):
        """BiCGSTAB with a persistent ILU preconditioner (rebuilt when it
        degrades) and a tolerance scaled to the current outer residual."""
        pc = self._pc.get(name)
        if pc is None or self._pc_age.get(name, 0) > 60:
            pc = ilu_preconditioner(mat)
            self._pc[name] = pc
            self._pc_age[name] = 0
        # inexact fixed point: crude solves early, but always tight enough
        # (relative to ||b||) not to floor the outer residual target
        tol = max(self.scheme.lin_tol,
                  min(1e-4, 0.02 * outer_res, 0.05 * self.scheme.outer_tol))
        try:
            sol, info = bicgstab(mat.dot, rhs, x0=x0, tol=tol,
                                 max_iter=self.scheme.lin_max, precond=pc)
        except ConvergenceError:
            pc = ilu_preconditioner(mat)      # stale factorization: rebuild
            self._pc[name] = pc
            self._pc_age[name] = 0
            sol, info = bicgstab(mat.dot, rhs, x0=x0, tol=tol,
                                 max_iter=self.scheme.lin_max, precond=pc)
        self._pc_age[name] += 1 if info.iterations < 30 else 100
        return sol

    # -- radiation plumbing ----------------------------------------------------

    def _radiation_sources(self, t_air, t_pcm, t_glass, t_room, gs):
        """Net long-wave + absorbed short-wave on both wall surfaces."""
        nx = t_air.shape[1]
        xf, y_lo, y_hi = self._encl_geom
        half_ab = self.mesh.air.axis_y.centers[0] - y_lo
        half_pt = y_lo - self.mesh.pcm.axis_y.centers[-1]
        kf, kp = self.ag.lam / half_ab, self.pcm.lam / half_pt
        t_surf_pcm = (kf * t_air[0, :] + kp * t_pcm[-1, :]) / (kf + kp)
        half_at = y_hi - self.mesh.air.axis_y.centers[-1]
        half_gb = self.mesh.glass.axis_y.centers[0] - y_hi
        kf2, kg = self.ag.lam / half_at, self.ag.lam_glass / half_gb
        t_surf_glass = (kf2 * t_air[-1, :] + kg * t_glass[0, :]) / (kf2 + kg)

        lower = RadiationSurface.from_wall(xf, y_lo, self.ag.eps_plate,
                                           t_surf_pcm)
        upper = RadiationSurface.from_wall(xf, y_hi, self.ag.eps_glass,
                                           t_surf_glass, direction=-1)
        right = RadiationSurface(np.array([[xf[-1], y_lo]]),
                                 np.array([[xf[-1], y_hi]]), 1.0, t_room)
        left = RadiationSurface(np.array([[xf[0], y_hi]]),
                                np.array([[xf[0], y_lo]]), 1.0, t_room)
        combined = concatenate_surfaces(lower, right, upper, left)
        self._shortwave[:nx] = self.ag.tau_glass * gs
        result = solve_net_radiation(combined, self._fmat,
                                     shortwave_incident=self._shortwave,
                                     tol=self.scheme.radiation_tol,
                                     max_iter=self.scheme.radiation_max)
        q = result.q_net
        self._q_pcm = q[:nx]
        self._q_glass = q[nx + 1:2 * nx + 1][::-1]   # stored reversed (CCW)
        self._q_closure = np.array([q[nx], q[-1]])
        self._t_surf = (t_surf_pcm, t_surf_glass)
        return self._q_pcm, self._q_glass

    # -- state -------------------------------------------------------------------

    def initial_state(self) -> SolverState:
        (ny_a, nx), (ny_p, _), (ny_g, _) = (self.mesh.air.shape,
                                            self.mesh.pcm.shape,
                                            self.mesh.glass.shape)
        t0 = self.room.t_amb
        air = FlowField(np.zeros((ny_a, nx + 1)), np.zeros((ny_a + 1, nx)),
                        np.zeros((ny_a, nx)), np.full((ny_a, nx), t0))
        pcm = FlowField(np.zeros((ny_p, nx + 1)), np.zeros((ny_p + 1, nx)),
                        np.zeros((ny_p, nx)), np.full((ny_p, nx), t0))
        state = SolverState(time=0.0, t_room=t0, air=air, pcm=pcm,
                            glass_t=np.full((ny_g, nx), t0),
                            f_pc=np.zeros((ny_p, nx)))
        state.history = [self._levels_of(state)] * 3
        state.levels = 0
        return state

    @staticmethod
    def _levels_of(state: SolverState) -> dict:
        return {"air": {"u": state.air.u.copy(), "v": state.air.v.copy(),
                        "t": state.air.t.copy()},
                "pcm": {"u": state.pcm.u.copy(), "v": state.pcm.v.copy(),
                        "t": state.pcm.t.copy()},
                "glass_t": state.glass_t.copy()}

    def energy_vector(self, state: SolverState) -> np.ndarray:
        return self.energy.stack(state.air.t, state.pcm.t, state.glass_t)

    # -- boundary conditions ------------------------------------------------------

    def apply_boundary_conditions(self, state: SolverState):
        """Inlet/outlet closure: dynamic-head inlet pressure and the outlet
        mass-correction factor m_c. Returns (p_in_gauge, p_out_gauge, m_c)."""
        dy = self.mesh.air.axis_y.widths
        u_in, u_out = state.air.u[:, 0], state.air.u[:, -1]
        u_mean = float(np.sum(u_in * dy) / dy.sum())
        p_in_target = -0.5 * self.ag.rho * u_mean ** 2
        # damp the dynamic-head feedback inside the fixed point (the inlet
        # face response to p_in carries a large gain); converged value is
        # unchanged
        p_prev = getattr(self, "_p_in_iter", p_in_target)
        p_in = p_prev + 0.3 * (p_in_target - p_prev)
        self._p_in_iter = p_in
        p_out = 0.0
        m_into = float(np.sum(np.maximum(u_in, 0.0) * dy)
                       + np.sum(np.maximum(-u_out, 0.0) * dy))
        m_outof = float(np.sum(np.maximum(u_out, 0.0) * dy)
                        + np.sum(np.maximum(-u_in, 0.0) * dy))
        scale = max(float(np.abs(state.air.u).max()), 1.0) * dy.sum()
        if m_outof <= 1e-14 * scale:
            if m_into > 1e-9 * scale:
                raise NumericError("outlet mass flux vanished with nonzero inflow")
            m_c = 1.0
        else:
            # damped and clamped within the fixed point; m_c -> 1 at
            # convergence, so neither guard changes the converged state
            m_c = 1.0 + 0.5 * (m_into / m_outof - 1.0)
            m_c = float(np.clip(m_c, 0.2, 5.0))
        return p_in, p_out, m_c

    # -- material fields ------------------------------------------------------------

    def _material_fields(self, state: SolverState):
        f_pc = liquid_fraction(state.pcm.t, self.pcm)
        return {"f_pc": f_pc,
                "rho_pcm": blended_pcm_property(f_pc, self.pcm.rho_sol,
                                                self.pcm.rho_liq),
                "lam_pcm": np.full(state.pcm.t.shape, self.pcm.lam),
                "cp_pcm": effective_cp(state.pcm.t, self.pcm) * 1e3,
                "damp_pcm": mushy_momentum_coeff(f_pc, self.pcm)}

    # -- the outer iteration -----------------------------------------------------

    def outer_iteration(self, state: SolverState, dt: float, bdf, t_next: float,
                        collect_only: bool = False):
        """One SIMPLEC fixed-point pass; mutates ``state`` in place.

        The returned residual report is evaluated at entry (the normalized
        residual monitor the convergence criterion applies to).
        """
        sch = self.scheme
        gs = self.schedule.value(t_next)
        t_room = state.t_room
        res = {}

        if self._conv is None:
            self._freeze_step_weights(state)
        mats = self._material_fields(state)
        h_ext = external_htc(float(state.glass_t[-1, :].mean()), t_room,
                             self.theta, self.mesh.air.axis_x.length, self.ag)
        self._last_h_ext = h_ext
        q_pcm, q_glass = self._radiation_sources(state.air.t, state.pcm.t,
                                                 state.glass_t, t_room, gs)

        if self.buoyancy_driver is not None:
            t_drive_air, t_drive_pcm = self.buoyancy_driver(t_next)
        else:
            t_drive_air, t_drive_pcm = state.air.t, state.pcm.t
        t_ref = self.room.t_amb
        if self.gravity:
            fx_a, fy_a = buoyancy_force(t_drive_air, t_ref, self.theta,
                                        self.ag.rho, self.ag.beta)
            fx_p, fy_p = buoyancy_force(t_drive_pcm, t_ref, self.theta,
                                        mats["rho_pcm"], self.pcm.beta)
        else:
            fx_a = fy_a = np.zeros_like(state.air.t)
            fx_p = fy_p = np.zeros_like(state.pcm.t)

        p_in, p_out, m_c = self.apply_boundary_conditions(state)
        hist_air = [h["air"] for h in state.history]
        hist_pcm = [h["pcm"] for h in state.history]

        rho_air = np.full(state.air.t.shape, self.ag.rho)
        mu_air = np.full(state.air.t.shape, self.ag.mu)
        no_damp = np.zeros(state.air.t.shape)
        mu_pcm = np.full(state.pcm.t.shape, self.pcm.mu)

        for dom, fl, hist, fx, fy, rho_c, mu_c, damp, tag in (
                (self.air_dom, state.air, hist_air, fx_a, fy_a, rho_air,
                 mu_air, no_damp, "air"),
                (self.pcm_dom, state.pcm, hist_pcm, fx_p, fy_p,
                 mats["rho_pcm"], mu_pcm, mats["damp_pcm"], "pcm")):
            conv = self._conv[tag]
            mat_u, rhs_u = dom.assemble_u(fl, rho_c, mu_c, damp,
                                          dom._to_u_faces(fx), bdf, dt, hist,
                                          p_in, p_out, conv)
            res[f"u_{tag}"] = _normalized_residual(mat_u, rhs_u, fl.u.ravel())
            mat_v, rhs_v = dom.assemble_v(fl, rho_c, mu_c, damp,
                                          dom._to_v_faces(fy), bdf, dt, hist,
                                          conv)
            res[f"v_{tag}"] = _normalized_residual(mat_v, rhs_v, fl.v.ravel())
            if collect_only:
                continue
            dom.simplec_coefficients(sch.relax_momentum)
            rhs_u = _relax_system(dom.tape_u.pattern, rhs_u, fl.u.ravel(),
                                  sch.relax_momentum)
            u_new = self._solve(f"u_{tag}", mat_u, rhs_u, fl.u.ravel(),
                                res[f"u_{tag}"])
            rhs_v = _relax_system(dom.tape_v.pattern, rhs_v, fl.v.ravel(),
                                  sch.relax_momentum)
            v_new = self._solve(f"v_{tag}", mat_v, rhs_v, fl.v.ravel(),
                                res[f"v_{tag}"])
            fl.u = u_new.reshape(fl.u.shape)
            fl.v = v_new.reshape(fl.v.shape)

        if not collect_only:
            state.air.u[:, -1] *= m_c
        for dom, fl, tag in ((self.air_dom, state.air, "air"),
                             (self.pcm_dom, state.pcm, "pcm")):
            imbalance = dom.continuity_imbalance(fl.u, fl.v)
            mref = max(float(np.abs(dom.face_mass_flux_x(fl.u)).max()),
                       float(np.abs(dom.face_mass_flux_y(fl.v)).max()), 1e-30)
            top = float(np.abs(imbalance).max())
            res[f"continuity_{tag}"] = top / mref if top > 0 else 0.0
            if collect_only:
                continue
            mat_p, rhs_p = dom.assemble_pressure_correction(fl.u, fl.v)
            p_prime = self._solve(f"p_{tag}", mat_p, rhs_p, None,
                                  res[f"continuity_{tag}"])
            dom.apply_correction(fl, p_prime, sch.relax_pressure)

        t_vec = self.energy_vector(state)
        hist_vecs = [self.energy.stack(h["air"]["t"], h["pcm"]["t"],
                                       h["glass_t"]) for h in state.history]
        glass_src = self._glass_sources(gs)
        mat_t, rhs_t = self.energy.assemble(
            t_vec, self.air_dom, self.pcm_dom, state.air, state.pcm,
            self.ag.rho * self.ag.c, mats["rho_pcm"] * mats["cp_pcm"],
            np.full(state.glass_t.shape, self.ag.rho_glass * self.ag.c_glass),
            mats["lam_pcm"], self.ag.lam, self.ag.lam_glass, bdf, dt,
            hist_vecs, t_room, h_ext, q_pcm, q_glass, glass_src,
            self._conv["t"])
        res["t"] = _normalized_residual(mat_t, rhs_t, t_vec)
        if not collect_only:
            rhs_t = _relax_system(self.energy.tape.pattern, rhs_t, t_vec,
                                  sch.relax_energy)
            t_new = self._solve("t", mat_t, rhs_t, t_vec, res["t"])
            t_air, t_pcm, t_glass = self.energy.split(t_new)
            if self.drive_energy and self.buoyancy_driver is not None:
                t_air, t_pcm = self.buoyancy_driver(t_next)
            state.air.t = t_air.copy()
            state.pcm.t = t_pcm.copy()
            state.glass_t = t_glass.copy()
            state.f_pc = liquid_fraction(state.pcm.t, self.pcm)
        res["max"] = max(res.values())
        return res

    def _glass_sources(self, gs: float) -> np.ndarray:
        faces_local = self.mesh.glass.axis_y.faces - self.mesh.glass.axis_y.faces[0]
        col = glass_absorption_sources(faces_local, gs, self.ag)
        return np.repeat(col[:, None], self.mesh.glass.shape[1], axis=1)

    # -- stepping ------------------------------------------------------------------

    def effective_dt(self, t: float) -> float:
        base = self.scheme.dt
        return 0.5 * base if t < self.scheme.halve_until else base

    def _extrapolate_iterate(self, state: SolverState):
        """Linear-in-time predictor for the first outer iterate."""
        h0, h1 = state.history[0], state.history[1]
        for fl, tag in ((state.air, "air"), (state.pcm, "pcm")):
            fl.u = 2.0 * h0[tag]["u"] - h1[tag]["u"]
            fl.v = 2.0 * h0[tag]["v"] - h1[tag]["v"]
            fl.t = 2.0 * h0[tag]["t"] - h1[tag]["t"]
        state.glass_t = 2.0 * h0["glass_t"] - h1["glass_t"]

    def _freeze_step_weights(self, state: SolverState):
        eps = self.scheme.weno_eps
        self._conv = {
            "air": self.air_dom.freeze_momentum_weights(state.air, eps),
            "pcm": self.pcm_dom.freeze_momentum_weights(state.pcm, eps),
            "t": self.energy.freeze_weights(state.air.t, state.pcm.t,
                                            state.air, state.pcm,
                                            self.air_dom, self.pcm_dom, eps)}

    def _advance_substep(self, state: SolverState, dt: float) -> StepReport:
        if state.last_dt and not np.isclose(state.last_dt, dt):
            state.levels = 0          # dt changed: restart the BDF ladder
        t_next = state.time + dt
        bdf = bdf_ladder(state.levels + 1, self.scheme.bdf_blend)
        state.t_room = room_temperature(t_next, self.room, self.schedule)
        if state.levels >= 2:
            self._extrapolate_iterate(state)
        self._freeze_step_weights(state)
        dy_in = self.mesh.air.axis_y.widths
        u_mean0 = float(np.sum(state.air.u[:, 0] * dy_in) / dy_in.sum())
        self._p_in_iter = -0.5 * self.ag.rho * u_mean0 ** 2

        report = None
        res0 = None
        history = []
        for it in range(1, self.scheme.outer_max + 1):
            res = self.outer_iteration(state, dt, bdf, t_next)
            history.append(res["max"])
            if res["max"] < self.scheme.outer_tol:
                report = StepReport(t_next, it, res["max"], res, True)
                break
            res0 = res["max"] if res0 is None else res0
            if res["max"] > max(1e3 * res0, 1e3) or not np.isfinite(res["max"]):
                raise ConvergenceError(
                    f"outer iterations diverging at t={t_next:.3f}s "
                    f"(residual {res['max']:.3e})",
                    time=t_next, residual=res["max"], residuals=res,
                    history=history)
        if report is None:
            raise ConvergenceError(
                f"outer iterations stalled at t={t_next:.3f}s "
                f"(residual {res['max']:.3e} > {self.scheme.outer_tol:g})",
                time=t_next, residual=res["max"], residuals=res,
                history=history)

        state.history = [self._levels_of(state)] + state.history[:2]
        state.levels = min(state.levels + 1, 3)
        state.time = t_next
        state.last_dt = dt
        state.check_finite()
        return report

    def advance(self, state: SolverState) -> StepReport:
        """One nominal time step. A stalled fixed point retries the interval
        as 2 then 4 equal substeps (the BDF ladder restarts across any dt
        change) before aborting with diagnostics."""
        dt = self.effective_dt(state.time)
        backup = state.copy()
        last_err = None
        for attempt in range(3):
            n_sub = 2 ** attempt
            try:
                for _ in range(n_sub):
                    report = self._advance_substep(state, dt / n_sub)
                return report
            except ConvergenceError as err:
                last_err = err
                state.time = backup.time
                state.t_room = backup.t_room
                state.air = backup.air.copy()
                state.pcm = backup.pcm.copy()
                state.glass_t = backup.glass_t.copy()
                state.f_pc = backup.f_pc.copy()
                state.history = list(backup.history)
                state.levels = backup.levels
                state.last_dt = backup.last_dt
                self._pc = {}
        raise last_err

    # -- diagnostics -------------------------------------------------------------------

    def outlet_mean_velocity(self, state: SolverState, radius: float = 0.05) -> float:
        return outlet_mean_velocity(self.mesh.air, state.air.u, state.air.v,
                                    radius)

    def diagnostics_row(self, state: SolverState) -> dict:
        dy = self.mesh.air.axis_y.widths
        t_out = float(np.sum(state.air.t[:, -1] * dy) / dy.sum())
        areas_p = self.mesh.pcm.cell_areas()
        nus = self.nusselt(state)
        return {"t": state.time,
                "u_out": self.outlet_mean_velocity(state),
                "T_out": t_out,
                "T_pcm_mean": float((state.pcm.t * areas_p).sum() / areas_p.sum()),
                **nus}

    def nusselt(self, state: SolverState) -> dict:
        """Wall-integrated convective / net-radiative Nusselt numbers,
        normalized by lam_f dT_f / H with dT_f = wall mean minus inlet."""
        mesh = self.mesh
        dx = mesh.air.axis_x.widths
        length = mesh.air.axis_x.length
        height = mesh.air.axis_y.length
        lam_f = self.ag.lam
        t_in = state.t_room
        if self._t_surf is None:
            self._radiation_sources(state.air.t, state.pcm.t, state.glass_t,
                                    state.t_room,
                                    self.schedule.value(state.time))
        t_surf_pcm, t_surf_glass = self._t_surf

        half_ab = mesh.air.axis_y.centers[0] - mesh.air.axis_y.faces[0]
        q_conv_pcm = lam_f * (t_surf_pcm - state.air.t[0, :]) / half_ab
        half_at = mesh.air.axis_y.faces[-1] - mesh.air.axis_y.centers[-1]
        q_conv_glass = lam_f * (t_surf_glass - state.air.t[-1, :]) / half_at

        out = {}
        for wall, q_conv, q_rad, t_surf in (
                ("glass", q_conv_glass, self._q_glass, t_surf_glass),
                ("pcm", q_conv_pcm, self._q_pcm, t_surf_pcm)):
            dt_f = float(np.sum(t_surf * dx) / length) - t_in
            q_cond = lam_f * dt_f / height
            if abs(q_cond) < 1e-300:
                out[f"Nu_conv_{wall}"] = float("nan")
                out[f"Nu_rad_{wall}"] = float("nan")
                continue
            out[f"Nu_conv_{wall}"] = float(np.sum(q_conv * dx) / length / q_cond)
            out[f"Nu_rad_{wall}"] = float(np.sum(q_rad * dx) / length / q_cond)
        return out


def outlet_mean_velocity(air_mesh: DomainMesh, u: np.ndarray, v: np.ndarray,
                         radius: float = 0.05) -> float:
    """Area-weighted mean velocity magnitude near the outlet midplane."""
    xc, yc = air_mesh.axis_x.centers, air_mesh.axis_y.centers
    x0 = air_mesh.axis_x.faces[-1]
    y0 = 0.5 * (air_mesh.axis_y.faces[0] + air_mesh.axis_y.faces[-1])
    xx, yy = np.meshgrid(xc, yc)
    mask = (xx - x0) ** 2 + (yy - y0) ** 2 <= radius ** 2
    if not mask.any():
        raise ConfigError("no cells inside the outlet-velocity sampling disk")
    uc = 0.5 * (u[:, :-1] + u[:, 1:])
    vc = 0.5 * (v[:-1, :] + v[1:, :])
    speed = np.hypot(uc, vc)
    areas = air_mesh.cell_areas()
    return float((speed * areas)[mask].sum() / areas[mask].sum())


def rms_between(series_a, series_b, mesh_a: DomainMesh = None,
                mesh_b: DomainMesh = None) -> float:
    """Time-averaged per-snapshot RMS difference of two field series."""
    if len(series_a) != len(series_b):
        raise DomainError(f"series lengths differ: {len(series_a)} vs {len(series_b)}")
    if len(series_a) == 0:
        raise DomainError("empty series")
    vals = []
    for a, b in zip(series_a, series_b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            if mesh_a is None or mesh_b is None:
                raise DomainError("shape mismatch and no meshes to interpolate")
            b = interpolate_to_mesh(b, mesh_b, mesh_a)
        vals.append(float(np.sqrt(np.mean((a - b) ** 2))))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# forward run driver


@dataclass
class RunResult:
    times: np.ndarray
    diagnostics: list
    snapshot_times: list
    final_state: SolverState
    step_reports: list
    stored_fields: list = field(default_factory=list)


def run_forward(model: ForwardModel, snapshot_sink=None,
                state: SolverState = None, progress=None,
                store_fields_every: int = 0) -> RunResult:
    """March the model to t_end, emitting snapshots at the configured cadence.

    ``snapshot_sink(state, model)`` runs at t=0 and at every cadence hit;
    ``store_fields_every`` > 0 additionally keeps in-memory temperature
    vectors every that many steps (used by the re-estimation checks).
    """
    sch = model.scheme
    if state is None:
        state = model.initial_state()
    diag_rows = []
    reports = []
    snapshot_times = []
    stored = []

    def maybe_snapshot():
        k = round(state.time / sch.snapshot_every)
        if abs(state.time - k * sch.snapshot_every) < 1e-9 and (
                not snapshot_times or snapshot_times[-1] < state.time - 1e-9):
            snapshot_times.append(state.time)
            if snapshot_sink is not None:
                snapshot_sink(state, model)

    if sch.snapshot_every > 0:
        snapshot_times.append(0.0)
        if snapshot_sink is not None:
            snapshot_sink(state, model)

    step = 0
    while state.time < sch.t_end - 1e-9:
        report = model.advance(state)
        reports.append(report)
        diag_rows.append(model.diagnostics_row(state))
        step += 1
        if store_fields_every and step % store_fields_every == 0:
            stored.append((state.time, model.energy_vector(state)))
        maybe_snapshot()
        if progress is not None:
            progress(state, report)

    return RunResult(times=np.array([r["t"] for r in diag_rows]),
                     diagnostics=diag_rows, snapshot_times=snapshot_times,
                     final_state=state, step_reports=reports,
                     stored_fields=stored)


# ---------------------------------------------------------------------------
# verification drivers: manufactured solution and lid-driven cavity


class _SoloMesh:
    def __init__(self, air_mesh):
        self.air = air_mesh
        self.pcm = None
        self.glass = None


def run_scalar_mms(n: int, dt: float, t_end: float, *, length: float = 1.0,
                   height: float = 1.0, rho_c: float = 1.0, lam: float = 0.02,
                   u0: float = 0.6, omega: float = 0.0, weno_eps: float = None,
                   lin_tol: float = 1e-12):
    """Advance the manufactured advection-diffusion case on an n x n mesh.

    T*(x, y, t) = cos(w t) sin(pi x/L) sin(pi y/H) + 2, advected by a
    solenoidal velocity field; Dirichlet boundaries and the volumetric
    source come from the exact solution. Returns (T_num, T_exact, mesh).
    """
    from .grid import build_tanh_axis

    ax = build_tanh_axis(n, length, 1e-12)
    ay = build_tanh_axis(n, height, 1e-12)
    mesh = DomainMesh("air", ax, ay)
    kx, ky = np.pi / length, np.pi / height
    if abs(kx - ky) > 1e-12:
        raise ConfigError("the MMS velocity field needs a square domain")

    def exact(x, y, t):
        return np.cos(omega * t) * np.sin(kx * x) * np.sin(ky * y) + 2.0

    def vel_u(x, y):
        return u0 * np.sin(kx * x) * np.cos(ky * y)

    def vel_v(x, y):
        return -u0 * np.cos(kx * x) * np.sin(ky * y)

    def source(x, y, t):
        s = np.sin(kx * x) * np.sin(ky * y)
        c_t = np.cos(omega * t)
        ddt = -omega * np.sin(omega * t) * s
        tx = c_t * kx * np.cos(kx * x) * np.sin(ky * y)
        ty = c_t * ky * np.sin(kx * x) * np.cos(ky * y)
        lap = -c_t * (kx ** 2 + ky ** 2) * s
        return rho_c * (ddt + vel_u(x, y) * tx + vel_v(x, y) * ty) - lam * lap

    dom = FluidDomain(mesh, rho=1.0, mu=0.0, bc_x="wall")
    energy = EnergySystem(_SoloMesh(mesh), include_solids=False)

    xc, yc = ax.centers, ay.centers
    xx, yy = np.meshgrid(xc, yc)
    u_faces = vel_u(ax.faces[None, :], yc[:, None]) * np.ones((n, n + 1))
    v_faces = vel_v(xc[None, :], ay.faces[:, None]) * np.ones((n + 1, n))
    fl = FlowField(u_faces, v_faces, np.zeros((n, n)), exact(xx, yy, 0.0))

    t_vec = fl.t.ravel().copy()
    hist = [t_vec.copy()] * 3
    eps = weno_eps if weno_eps is not None else max((length / n) ** 2, 1e-12)

    t = 0.0
    levels = 0
    pc = [None]
    for _ in range(int(round(t_end / dt))):
        t_next = t + dt
        bdf = bdf_ladder(levels + 1)
        bdy = {"west": exact(ax.faces[0], yc, t_next),
               "east": exact(ax.faces[-1], yc, t_next),
               "south": exact(xc, ay.faces[0], t_next),
               "north": exact(xc, ay.faces[-1], t_next)}
        src = source(xx, yy, t_next)
        # weights frozen at the predictor state, as in the full model
        t_guess = (2.0 * hist[0] - hist[1]) if levels >= 2 else t_vec
        conv = energy.freeze_weights(t_guess.reshape(n, n), None, fl, None,
                                     dom, None, eps)
        for _ in range(60):
            mat, rhs = energy.assemble(
                t_vec, dom, None, fl, None, rho_c, None, None, None, lam,
                None, bdf, dt, hist, 0.0, 0.0, None, None, None, conv,
                bdy_dirichlet=bdy, source_cells=src)
            if _normalized_residual(mat, rhs, t_vec) < 1e-11:
                break
            if pc[0] is None:
                pc[0] = ilu_preconditioner(mat)
            t_vec, _ = bicgstab(mat.dot, rhs, x0=t_vec, tol=lin_tol,
                                max_iter=4000, precond=pc[0])
        hist = [t_vec.copy()] + hist[:2]
        levels = min(levels + 1, 3)
        t = t_next

    return t_vec.reshape(n, n), exact(xx, yy, t), mesh


GHIA_RE100_Y = np.array([0.0000, 0.0547, 0.0625, 0.0703, 0.1016, 0.1719,
                         0.2813, 0.4531, 0.5000, 0.6172, 0.7344, 0.8516,
                         0.9531, 0.9609, 0.9688, 0.9766, 1.0000])
GHIA_RE100_U = np.array([0.00000, -0.03717, -0.04192, -0.04775, -0.06434,
                         -0.10150, -0.15662, -0.21090, -0.20581, -0.13641,
                         0.00332, 0.23151, 0.68717, 0.73722, 0.78871,
                         0.84123, 1.00000])


def run_lid_cavity(n: int = 32, re: float = 100.0, dt: float = 0.5,
                   steps: int = 400, steady_tol: float = 2e-8,
                   outer_max: int = 40, outer_tol: float = 2e-7):
    """Steady lid-driven cavity via pseudo-transient SIMPLEC marching.

    Returns (flow, u on the vertical centerline at the 17 reference
    stations, mesh).
    """
    from .grid import build_tanh_axis

    mesh = DomainMesh("air", build_tanh_axis(n, 1.0, 1e-12),
                      build_tanh_axis(n, 1.0, 1e-12))
    dom = FluidDomain(mesh, rho=1.0, mu=1.0 / re, bc_x="wall", lid_u=1.0,
                      pin_pressure=True)
    ny, nx = mesh.shape
    fl = FlowField(np.zeros((ny, nx + 1)), np.zeros((ny + 1, nx)),
                   np.zeros((ny, nx)), np.zeros((ny, nx)))
    hist = [{"u": fl.u.copy(), "v": fl.v.copy()} for _ in range(3)]
    rho_c = np.ones((ny, nx))
    mu_c = np.full((ny, nx), 1.0 / re)
    damp = np.zeros((ny, nx))
    zero_u = np.zeros((ny, nx + 1))
    zero_v = np.zeros((ny + 1, nx))
    levels = 0
    eps = (1.0 / n) ** 2
    pc = {}

    def solve(name, mat, rhs, x0):
        if name not in pc:
            pc[name] = ilu_preconditioner(mat)
        try:
            sol, info = bicgstab(mat.dot, rhs, x0=x0, tol=1e-9, max_iter=3000,
                                 precond=pc[name])
        except ConvergenceError:
            pc[name] = ilu_preconditioner(mat)
            sol, info = bicgstab(mat.dot, rhs, x0=x0, tol=1e-9, max_iter=3000,
                                 precond=pc[name])
        if info.iterations > 40:
            pc.pop(name, None)
        return sol

    for step in range(steps):
        bdf = bdf_ladder(levels + 1)
        u_prev = fl.u.copy()
        conv = dom.freeze_momentum_weights(fl, eps)
        for outer in range(outer_max):
            mat_u, rhs_u = dom.assemble_u(fl, rho_c, mu_c, damp, zero_u, bdf,
                                          dt, hist, 0.0, 0.0, conv)
            res_u = _normalized_residual(mat_u, rhs_u, fl.u.ravel())
            mat_v, rhs_v = dom.assemble_v(fl, rho_c, mu_c, damp, zero_v, bdf,
                                          dt, hist, conv)
            res_v = _normalized_residual(mat_v, rhs_v, fl.v.ravel())
            dom.simplec_coefficients(0.7)
            rhs_u = _relax_system(dom.tape_u.pattern, rhs_u, fl.u.ravel(), 0.7)
            fl.u = solve("u", mat_u, rhs_u, fl.u.ravel()).reshape(fl.u.shape)
            rhs_v = _relax_system(dom.tape_v.pattern, rhs_v, fl.v.ravel(), 0.7)
            fl.v = solve("v", mat_v, rhs_v, fl.v.ravel()).reshape(fl.v.shape)
            mat_p, rhs_p = dom.assemble_pressure_correction(fl.u, fl.v)
            p_prime = solve("p", mat_p, rhs_p, None)
            dom.apply_correction(fl, p_prime, 1.0)
            if max(res_u, res_v) < outer_tol:
                break
        hist = [{"u": fl.u.copy(), "v": fl.v.copy()}] + hist[:2]
        levels = min(levels + 1, 3)
        if np.abs(fl.u - u_prev).max() / max(dt, 1.0) < steady_tol and step > 10:
            break

    iface = nx // 2
    u_line = fl.u[:, iface]
    yc = mesh.axis_y.centers
    u_at = np.interp(GHIA_RE100_Y, np.concatenate([[0.0], yc, [1.0]]),
                     np.concatenate([[0.0], u_line, [1.0]]))
    return fl, u_at, mesh
