"""Direct-forcing immersed boundary integrator for incompressible flow.

One step advances ``u^n -> u^{n+1}``:

1. Adams-Bashforth convection (forward Euler on the first step) and
   Crank-Nicolson viscosity give ``u*`` with the previous pressure.
2. An incremental projection with rotational correction yields the
   divergence-free ``u~^{n+1}`` and ``p^{n+1/2}``.
3. The Lagrange multiplier ``F = rho/dt (U_b - J u~)`` is spread back and
   ``u^{n+1} = u~ + dt/rho S F``.
4. Optionally the corrected field is projected again; the projection
   pressure is added to ``p^{n+1/2}`` so the discrete momentum balance used
   by the diagnostics stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mesh
from .bodies import FreeGravity, RigidBody, collision_forces, gravity_force
from .errors import ConfigurationError, NumericalFailure
from .kernels import PESKIN4, Coupling, get_kernel
from .mesh import BoundarySpec, GridSpec
from .solvers import SeparableSolver


@dataclass
class FluidParams:
    rho: float = 1.0
    mu: float = 0.01
    dt: float | None = None
    cfl: float | None = None
    dt_max: float = math.inf
    div_tol: float = 1e-10
    solve_tol: float = 1e-9
    post_projection: bool = True
    kernel: str = "peskin4"

    def __post_init__(self):
        bad = []
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            bad.append("rho")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            bad.append("mu")
        if self.dt is None and self.cfl is None:
            bad.append("dt")
        if self.dt is not None and not self.dt > 0:
            bad.append("dt")
        if self.cfl is not None and not (0 < self.cfl <= 1):
            bad.append("cfl")
        if not (self.div_tol > 0 and self.solve_tol > 0):
            bad.append("tolerances")
        if bad:
            raise ConfigurationError(f"invalid fluid parameters: {', '.join(bad)}", keys=bad)
        get_kernel(self.kernel)


@dataclass
class FlowState:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    t: float = 0.0
    n: int = 0
    conv: tuple | None = None
    dt_prev: float | None = None

    def copy(self):
        conv = None if self.conv is None else (self.conv[0].copy(), self.conv[1].copy())
        return FlowState(self.u.copy(), self.v.copy(), self.p.copy(), self.t, self.n, conv, self.dt_prev)


@dataclass
class LMRecord:
    """Per-body data of one direct-forcing step."""

    name: str
    F: np.ndarray
    F_extra: np.ndarray
    positions: np.ndarray
    ds: np.ndarray
    target: np.ndarray
    slip: float


def advective_flux(Pu, Pv, g: GridSpec):
    """Conservative centred ``div(u u)`` on x- and y-faces from padded fields."""
    nu, ny = Pu.shape[0] - 2, Pu.shape[1] - 2
    nx, nv = Pv.shape[0] - 2, Pv.shape[1] - 2
    dx, dy = g.dx, g.dy
    uc = Pu[1:-1, 1:-1]
    ue = 0.5 * (Pu[2:, 1:-1] + uc)
    uw = 0.5 * (Pu[:-2, 1:-1] + uc)
    un = 0.5 * (uc + Pu[1:-1, 2:])
    us = 0.5 * (uc + Pu[1:-1, :-2])
    vn = 0.5 * (Pv[0:nu, 2:ny + 2] + Pv[1:nu + 1, 2:ny + 2])
    vs = 0.5 * (Pv[0:nu, 1:ny + 1] + Pv[1:nu + 1, 1:ny + 1])
    Nu = (ue * ue - uw * uw) / dx + (un * vn - us * vs) / dy

    vc = Pv[1:-1, 1:-1]
    vn2 = 0.5 * (vc + Pv[1:-1, 2:])
    vs2 = 0.5 * (vc + Pv[1:-1, :-2])
    ve = 0.5 * (vc + Pv[2:, 1:-1])
    vw = 0.5 * (vc + Pv[:-2, 1:-1])
    uE = 0.5 * (Pu[2:nx + 2, 0:nv] + Pu[2:nx + 2, 1:nv + 1])
    uW = 0.5 * (Pu[1:nx + 1, 0:nv] + Pu[1:nx + 1, 1:nv + 1])
    Nv = (uE * ve - uW * vw) / dx + (vn2 * vn2 - vs2 * vs2) / dy
    return Nu, Nv


def _upwind(a, q_lo, q_hi):
    return np.where(a > 0, q_lo, q_hi)


def upwind_flux(Pu, Pv, g: GridSpec):
    """First-order upwind ``div(u u)`` with the same face layout as the centred form."""
    nu, ny = Pu.shape[0] - 2, Pu.shape[1] - 2
    nx, nv = Pv.shape[0] - 2, Pv.shape[1] - 2
    dx, dy = g.dx, g.dy
    uc = Pu[1:-1, 1:-1]
    ae = 0.5 * (Pu[2:, 1:-1] + uc)
    aw = 0.5 * (Pu[:-2, 1:-1] + uc)
    vn = 0.5 * (Pv[0:nu, 2:ny + 2] + Pv[1:nu + 1, 2:ny + 2])
    vs = 0.5 * (Pv[0:nu, 1:ny + 1] + Pv[1:nu + 1, 1:ny + 1])
    Nu = (ae * _upwind(ae, uc, Pu[2:, 1:-1]) - aw * _upwind(aw, Pu[:-2, 1:-1], uc)) / dx
    Nu += (vn * _upwind(vn, uc, Pu[1:-1, 2:]) - vs * _upwind(vs, Pu[1:-1, :-2], uc)) / dy

    vc = Pv[1:-1, 1:-1]
    an = 0.5 * (vc + Pv[1:-1, 2:])
    as_ = 0.5 * (vc + Pv[1:-1, :-2])
    uE = 0.5 * (Pu[2:nx + 2, 0:nv] + Pu[2:nx + 2, 1:nv + 1])
    uW = 0.5 * (Pu[1:nx + 1, 0:nv] + Pu[1:nx + 1, 1:nv + 1])
    Nv = (uE * _upwind(uE, vc, Pv[2:, 1:-1]) - uW * _upwind(uW, Pv[:-2, 1:-1], vc)) / dx
    Nv += (an * _upwind(an, vc, Pv[1:-1, 2:]) - as_ * _upwind(as_, Pv[1:-1, :-2], vc)) / dy
    return Nu, Nv


# upwind weight is 1 within OUTFLOW_FULL cells of an outflow side and ramps to 0 at OUTFLOW_RAMP
OUTFLOW_FULL = 2
OUTFLOW_RAMP = 8


def outflow_weights(g: GridSpec, bcs: BoundarySpec, component: str):
    """Blend weights toward upwind convection next to outflow sides, or None."""
    sides = ((bcs.left, bcs.right), (bcs.bottom, bcs.top))
    if not any(s.kind == mesh.OUTFLOW for pair in sides for s in pair):
        return None
    shape = g.u_shape if component == "u" else g.v_shape
    w = np.zeros(shape)
    for axis, (lo, hi) in enumerate(sides):
        n = shape[axis]
        # distance in cells from each boundary face
        node = (component == "u") == (axis == 0)
        idx = np.arange(n, dtype=float) + (0.0 if node else 0.5)
        last = n - 1.0 if node else float(n)
        for side, d in ((lo, idx), (hi, last - idx)):
            if side.kind != mesh.OUTFLOW:
                continue
            r = np.clip((OUTFLOW_RAMP - d) / (OUTFLOW_RAMP - OUTFLOW_FULL), 0.0, 1.0)
            w = np.maximum(w, np.expand_dims(r, 1 - axis))
    return w


class NavierStokes:
    """Integrator bound to one grid, boundary spec and parameter set."""

    def __init__(self, g: GridSpec, bcs: BoundarySpec, params: FluidParams):
        bcs.validate(g)
        self.g = g
        self.bcs = bcs
        self.params = params
        self.kernel = get_kernel(params.kernel)
        self._slices = {c: mesh.unknown_slices(g, bcs, c) for c in ("u", "v")}
        self._axes = {c: bcs.axis_codes(c) for c in ("u", "v", "p")}
        self._helm = {}
        self._upwind_w = {c: outflow_weights(g, bcs, c) for c in ("u", "v")}
        self._poisson = SeparableSolver(self._axes["p"], (g.nx, g.ny), (g.dx, g.dy), 0.0, -1.0)

    # --- building blocks --------------------------------------------------
    def initial_state(self, u=None, v=None, p=None, t=0.0) -> FlowState:
        g = self.g
        u = g.zeros_u() if u is None else np.array(u, dtype=float)
        v = g.zeros_v() if v is None else np.array(v, dtype=float)
        p = g.zeros_p() if p is None else np.array(p, dtype=float)
        mesh.apply_velocity_bc(u, v, g, self.bcs, t)
        return FlowState(u, v, p, t, 0)

    def nonlinear(self, state: FlowState):
        """``div(u u)`` of a state, cached on it."""
        if state.conv is None:
            Pu = mesh.pad_u(state.u, self.g, self.bcs, state.t)
            Pv = mesh.pad_v(state.v, self.g, self.bcs, state.t)
            Nu, Nv = advective_flux(Pu, Pv, self.g)
            if self._upwind_w["u"] is not None:
                # centred convection is undamped where backflow enters through an outflow side
                Uu, Uv = upwind_flux(Pu, Pv, self.g)
                wu, wv = self._upwind_w["u"], self._upwind_w["v"]
                Nu = Nu + wu * (Uu - Nu)
                Nv = Nv + wv * (Uv - Nv)
            state.conv = (Nu, Nv)
        return state.conv

    def convective_term(self, state_n: FlowState, state_nm1: FlowState | None = None, dt=None):
        """Adams-Bashforth midstep convection; forward Euler without history."""
        Nu, Nv = self.nonlinear(state_n)
        if state_nm1 is None:
            return Nu.copy(), Nv.copy()
        Mu, Mv = self.nonlinear(state_nm1)
        dt_prev = state_n.t - state_nm1.t
        dt = dt_prev if dt is None else dt
        a = 0.5 * dt / dt_prev
        return (1 + a) * Nu - a * Mu, (1 + a) * Nv - a * Mv

    def _helmholtz(self, comp, dt):
        key = (comp, dt)
        if key not in self._helm:
            if len(self._helm) > 8:
                self._helm.clear()
            rho, mu = self.params.rho, self.params.mu
            self._helm[key] = SeparableSolver(self._axes[comp], (self.g.nx, self.g.ny), (self.g.dx, self.g.dy), rho / dt, 0.5 * mu)
        return self._helm[key]

    def _bc_laplacian(self, comp, t):
        """Laplacian of boundary data alone, evaluated on the unknowns."""
        g = self.g
        u = g.zeros_u()
        v = g.zeros_v()
        mesh.apply_velocity_bc(u, v, g, self.bcs, t)
        if comp == "u":
            return mesh.laplacian_u(u, g, self.bcs, t)[self._slices["u"]]
        return mesh.laplacian_v(v, g, self.bcs, t)[self._slices["v"]]

    def project(self, u, v, dt):
        """Project ``(u, v)``; returns ``(u, v, phi)`` with ``D u = 0``."""
        g, rho = self.g, self.params.rho
        rhs = (rho / dt) * mesh.divergence(u, v, g)
        if self._poisson.singular:
            rhs = rhs - rhs.mean()
        phi = self._poisson.solve(rhs)
        gx, gy = mesh.gradient(phi, g, self.bcs)
        return u - (dt / rho) * gx, v - (dt / rho) * gy, phi

    def momentum_solve(self, state: FlowState, conv, dt, forcing=None):
        """Crank-Nicolson momentum solve plus incremental projection.

        Returns ``(u~, v~, p^{n+1/2})`` with ``D u~ = 0``.
        """
        g, bcs = self.g, self.bcs
        rho, mu = self.params.rho, self.params.mu
        t1 = state.t + dt
        gx, gy = mesh.gradient(state.p, g, bcs)
        fx, fy = forcing if forcing is not None else (0.0, 0.0)
        lap_u = mesh.laplacian_u(state.u, g, bcs, state.t)
        lap_v = mesh.laplacian_v(state.v, g, bcs, state.t)
        rhs_u = rho / dt * state.u - rho * conv[0] - gx + 0.5 * mu * lap_u + fx
        rhs_v = rho / dt * state.v - rho * conv[1] - gy + 0.5 * mu * lap_v + fy
        out = []
        for comp, rhs, old in (("u", rhs_u, state.u), ("v", rhs_v, state.v)):
            sl = self._slices[comp]
            b = rhs[sl] + 0.5 * mu * self._bc_laplacian(comp, t1)
            x = self._helmholtz(comp, dt).solve(b)
            full = np.zeros_like(old)
            full[sl] = x
            out.append(full)
        us, vs = out
        mesh.apply_velocity_bc(us, vs, g, bcs, t1)
        self._check_residual(us, vs, rhs_u, rhs_v, dt, t1)
        div_star = mesh.divergence(us, vs, g)
        ut, vt, phi = self.project(us, vs, dt)
        p_half = state.p + phi - 0.5 * mu * div_star
        if self._poisson.singular:
            p_half = p_half - p_half.mean()
        return ut, vt, p_half

    def _check_residual(self, us, vs, rhs_u, rhs_v, dt, t1):
        rho, mu = self.params.rho, self.params.mu
        for comp, x, rhs in (("u", us, rhs_u), ("v", vs, rhs_v)):
            lap = mesh.laplacian_u(x, self.g, self.bcs, t1) if comp == "u" else mesh.laplacian_v(x, self.g, self.bcs, t1)
            sl = self._slices[comp]
            r = (rho / dt * x - 0.5 * mu * lap - rhs)[sl]
            scale = max(float(np.abs(rhs[sl]).max(initial=0.0)), 1e-300)
            rel = float(np.abs(r).max(initial=0.0)) / scale
            if not math.isfinite(rel) or rel > self.params.solve_tol:
                raise NumericalFailure(f"{comp}-momentum solve residual {rel:.3e} exceeds tolerance", residuals=[rel])

    def choose_dt(self, state: FlowState, bodies=()):
        p = self.params
        if p.dt is not None and p.cfl is None:
            return float(p.dt)
        u, v = state.u, state.v
        if bodies:
            vel = np.concatenate([b.velocity for b in bodies])
            u = np.concatenate([u.ravel(), vel[:, 0]])
            v = np.concatenate([v.ravel(), vel[:, 1]])
        dt_max = p.dt_max if p.dt is None else min(p.dt, p.dt_max)
        return mesh.compute_dt(u, v, self.g, p.cfl, dt_max)

    # --- full step --------------------------------------------------------
    def extra_forces(self, bodies, collision=None):
        """Gravity and collision force densities per body (midstep independent)."""
        rho = self.params.rho
        extra = [np.zeros((b.n_markers, 2)) for b in bodies]
        for k, b in enumerate(bodies):
            if isinstance(b.kinematics, FreeGravity):
                extra[k] += gravity_force(b, b.kinematics.rho_s, rho, b.kinematics.gconst)
        if collision is not None and len(bodies) > 1:
            totals = collision_forces(bodies, collision["c_ij"], collision["eps_P"], collision["zeta"])
            for k, b in enumerate(bodies):
                extra[k] += totals[k][None, :] / b.ds.sum()
        return extra

    def step(self, state: FlowState, state_prev: FlowState | None, bodies: list[RigidBody], dt, collision=None):
        """Advance one direct-forcing step; returns ``(state_{n+1}, records)``."""
        g, rho = self.g, self.params.rho
        t1 = state.t + dt
        couplings = []
        for b in bodies:
            b.predict_midstep(state.t, dt)
            couplings.append(Coupling(g, b.mid, self.kernel))
        extra = self.extra_forces(bodies, collision)
        fx = np.zeros(g.u_shape)
        fy = np.zeros(g.v_shape)
        for c, b, fe in zip(couplings, bodies, extra):
            if np.any(fe):
                sx, sy = c.spread(fe, b.ds)
                fx += sx
                fy += sy
        conv = self.convective_term(state, state_prev, dt)
        ut, vt, p_half = self.momentum_solve(state, conv, dt, (fx, fy))

        records = []
        cx = np.zeros(g.u_shape)
        cy = np.zeros(g.v_shape)
        for c, b, fe in zip(couplings, bodies, extra):
            Ju = c.interpolate(ut, vt)
            if b.kinematics.free:
                b.update_free_motion(Ju, rho, t1)
            target = b.target_velocity(t1)
            F = (rho / dt) * (target - Ju)
            sx, sy = c.spread(F, b.ds)
            cx += sx
            cy += sy
            records.append(LMRecord(b.name, F, fe, b.mid.copy(), b.ds.copy(), target.copy(), 0.0))
        u1 = ut + (dt / rho) * cx if rho > 0 else ut
        v1 = vt + (dt / rho) * cy if rho > 0 else vt
        mesh.apply_velocity_bc(u1, v1, g, self.bcs, t1)
        if self.params.post_projection and bodies:
            u1, v1, psi = self.project(u1, v1, dt)
            p_half = p_half + psi
            if self._poisson.singular:
                p_half = p_half - p_half.mean()
        for c, rec in zip(couplings, records):
            rec.slip = float(np.abs(c.interpolate(u1, v1) - rec.target).max(initial=0.0))
        for b, rec in zip(bodies, records):
            b.advance(t1, dt, rec.target)
        new = FlowState(u1, v1, p_half, t1, state.n + 1, None, dt)
        # without the second projection only u~ is solenoidal
        self.check_state(new, divergence=self.params.post_projection or not bodies)
        return new, records

    def check_state(self, state: FlowState, divergence=True):
        if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.v)) and np.all(np.isfinite(state.p))):
            raise NumericalFailure(f"non-finite field at t={state.t:.6g}")
        if not divergence:
            return
        div = float(np.abs(mesh.divergence(state.u, state.v, self.g)).max())
        if div > self.params.div_tol * max(1.0, self._velocity_scale(state)):
            raise NumericalFailure(f"divergence {div:.3e} exceeds tolerance at t={state.t:.6g}", residuals=[div])

    def _velocity_scale(self, state):
        return max(float(np.abs(state.u).max()), float(np.abs(state.v).max())) / min(self.g.dx, self.g.dy)


def direct_forcing_step(solver: NavierStokes, state_n, state_nm1, bodies, dt, collision=None):
    """Functional wrapper around :meth:`NavierStokes.step`."""
    return solver.step(state_n, state_nm1, bodies, dt, collision)
