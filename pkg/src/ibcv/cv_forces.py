"""Control-volume and Lagrange-multiplier force and torque estimators.

A control volume (CV) is an axis-aligned box whose sides lie on grid faces;
it is stored as face indices ``(iL, jL, iU, jU)`` so that
``x_L = x0 + iL*dx`` etc.  Cells ``iL..iU-1`` by ``jL..jU-1`` are inside.

Surface integrals use the staggered stencils below on each of the four
segments (R, L, T, B); the outward sign is applied per segment.  For a
horizontal segment at y-face ``J`` and cell column ``i``:

* pressure   ``-(p[i,J] + p[i,J-1])/2`` along ``e_y``
* momentum   ``-rho v (ubar, v)`` with a four-point ``u`` average
* viscous    ``mu (du/dy + dv/dx, 2 dv/dy)`` with centred differences

Vertical segments follow by exchanging the roles of ``x`` and ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import RigidBody, cross
from .errors import ConfigurationError, GeometryError, StateError
from .mesh import GridSpec

TERMS = ("volume", "body", "pressure", "momentum_flux", "viscous", "surface_velocity", "lagrange", "extra")
METHODS = ("cv", "noca", "lm", "stokes_cv", "stokes_lm")


# --- control volumes ---------------------------------------------------------


@dataclass(frozen=True)
class ControlVolume:
    iL: int
    jL: int
    iU: int
    jU: int

    def __post_init__(self):
        if not (self.iU > self.iL and self.jU > self.jL):
            raise GeometryError(f"degenerate control volume {self.indices}")

    @property
    def indices(self):
        return (self.iL, self.jL, self.iU, self.jU)

    def bounds(self, g: GridSpec):
        return (float(g.x_face(self.iL)), float(g.y_face(self.jL)), float(g.x_face(self.iU)), float(g.y_face(self.jU)))

    def shifted(self, di, dj):
        return ControlVolume(self.iL + di, self.jL + dj, self.iU + di, self.jU + dj)

    def volume(self, g: GridSpec):
        return (self.iU - self.iL) * g.dx * (self.jU - self.jL) * g.dy

    def contains_box(self, g, lo, hi, margin=0):
        xL, yL, xU, yU = self.bounds(g)
        mx, my = margin * g.dx, margin * g.dy
        return lo[0] >= xL + mx and lo[1] >= yL + my and hi[0] <= xU - mx and hi[1] <= yU - my


def _snap_index(val, origin, h, up):
    q = (val - origin) / h
    r = round(q)
    if abs(q - r) <= 1e-9 * max(1.0, abs(q)):
        return int(r)
    return int(math.ceil(q)) if up else int(math.floor(q))


def check_cv(cv: ControlVolume, g: GridSpec, margin=1):
    """Raise GeometryError when stencils would leave a non-periodic domain."""
    if not g.periodic[0] and (cv.iL - margin < 0 or cv.iU + margin > g.nx):
        raise GeometryError(f"control volume {cv.indices} too close to the x boundary")
    if not g.periodic[1] and (cv.jL - margin < 0 or cv.jU + margin > g.ny):
        raise GeometryError(f"control volume {cv.indices} too close to the y boundary")


def snap_cv(lower, upper, g: GridSpec, check=True) -> ControlVolume:
    """Snap a requested box outward onto grid faces."""
    iL = _snap_index(lower[0], g.origin[0], g.dx, False)
    jL = _snap_index(lower[1], g.origin[1], g.dy, False)
    iU = _snap_index(upper[0], g.origin[0], g.dx, True)
    jU = _snap_index(upper[1], g.origin[1], g.dy, True)
    cv = ControlVolume(iL, jL, iU, jU)
    if check:
        check_cv(cv, g, margin=0)
    return cv


@dataclass
class CVPolicy:
    """Motion rule for a CV: ``stationary``, ``follow``, ``track`` or ``center``.

    ``follow`` shifts by whole cells when the body's bounding box comes
    within ``margin`` cells of the CV sides, restoring the original
    body-to-CV offset.  ``track`` restores that offset whenever the center
    of mass has moved by a whole cell.  ``center`` re-centres a fixed-size
    box on the body center of mass every step, sliding it back inside next
    to a wall.
    """

    kind: str = "stationary"
    margin: int = 3
    half_width: tuple | None = None
    _offset: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("stationary", "follow", "track", "center"):
            raise ConfigurationError(f"unknown CV policy {self.kind!r}", keys=["policy"])
        if self.kind == "center" and self.half_width is None:
            raise ConfigurationError("center policy needs half_width", keys=["half_width"])

    def attach(self, cv: ControlVolume, body: RigidBody, g: GridSpec):
        self._offset = ((body.X0[0] - g.origin[0]) / g.dx - cv.iL, (body.X0[1] - g.origin[1]) / g.dy - cv.jL)


def _inside(cv: ControlVolume, g: GridSpec, margin=1):
    # slide a box away from non-periodic sides, keeping its size
    di = dj = 0
    if not g.periodic[0]:
        di = max(margin - cv.iL, 0) or min(g.nx - margin - cv.iU, 0)
    if not g.periodic[1]:
        dj = max(margin - cv.jL, 0) or min(g.ny - margin - cv.jU, 0)
    new = cv.shifted(di, dj)
    check_cv(new, g, margin)
    return new


def move_cv(cv: ControlVolume, body: RigidBody, policy: CVPolicy, g: GridSpec):
    """Apply ``policy``; returns ``(cv', moved, (di, dj))``."""
    if policy.kind == "stationary" or body is None:
        return cv, False, (0, 0)
    if policy.kind == "center":
        hx, hy = policy.half_width
        new = _inside(snap_cv((body.X0[0] - hx, body.X0[1] - hy), (body.X0[0] + hx, body.X0[1] + hy), g, False), g)
        lo, hi = body.bounding_box()
        if not new.contains_box(g, lo, hi):
            raise GeometryError(f"body no longer fits in control volume {new.indices} next to a wall")
        di, dj = new.iL - cv.iL, new.jL - cv.jL
        return new, new != cv, (di, dj)
    if policy._offset is None:
        policy.attach(cv, body, g)
    ox, oy = policy._offset
    if policy.kind == "track":
        di = int(round((body.X0[0] - g.origin[0]) / g.dx - ox)) - cv.iL
        dj = int(round((body.X0[1] - g.origin[1]) / g.dy - oy)) - cv.jL
        new = cv.shifted(di, dj)
        check_cv(new, g)
        return new, (di, dj) != (0, 0), (di, dj)
    lo, hi = body.bounding_box()
    if cv.contains_box(g, lo, hi, policy.margin):
        return cv, False, (0, 0)
    di = int(round((body.X0[0] - g.origin[0]) / g.dx - ox)) - cv.iL
    dj = int(round((body.X0[1] - g.origin[1]) / g.dy - oy)) - cv.jL
    new = cv.shifted(di, dj)
    if not new.contains_box(g, lo, hi, policy.margin):
        # deforming bodies: fall back to the smallest restoring shift
        di = dj = 0
        xL, yL, xU, yU = cv.bounds(g)
        m = policy.margin
        if lo[0] < xL + m * g.dx:
            di = -int(math.ceil((xL + m * g.dx - lo[0]) / g.dx))
        elif hi[0] > xU - m * g.dx:
            di = int(math.ceil((hi[0] - xU + m * g.dx) / g.dx))
        if lo[1] < yL + m * g.dy:
            dj = -int(math.ceil((yL + m * g.dy - lo[1]) / g.dy))
        elif hi[1] > yU - m * g.dy:
            dj = int(math.ceil((hi[1] - yU + m * g.dy) / g.dy))
        new = cv.shifted(di, dj)
    check_cv(new, g)
    return new, (di, dj) != (0, 0), (di, dj)


# --- index helpers -------------------------------------------------------------


class _Gather:
    """Index into staggered fields, wrapping on periodic axes."""

    def __init__(self, g: GridSpec):
        self.g = g

    def __call__(self, arr, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        if self.g.periodic[0]:
            i = np.mod(i, arr.shape[0])
        if self.g.periodic[1]:
            j = np.mod(j, arr.shape[1])
        if (np.any(i < 0) or np.any(i >= arr.shape[0]) or np.any(j < 0) or np.any(j >= arr.shape[1])):
            raise GeometryError("control-volume stencil leaves the domain")
        return arr[i, j]


# --- records -------------------------------------------------------------------


@dataclass
class ForceTorqueRecord:
    t: float
    body: str
    method: str
    breakdown: dict
    cv: tuple | None = None
    cv_moved: bool = False

    @property
    def force(self):
        fx = 0.0
        fy = 0.0
        for name in TERMS:
            if name in self.breakdown:
                fx += self.breakdown[name][0]
                fy += self.breakdown[name][1]
        return np.array([fx, fy])

    @property
    def torque(self):
        m = 0.0
        for name in TERMS:
            if name in self.breakdown:
                m += self.breakdown[name][2]
        return m


@dataclass
class MomentumSnapshot:
    t: float
    cv_momentum: np.ndarray
    cv_angular: float
    body_momentum: np.ndarray
    body_angular: float
    domain_momentum: np.ndarray
    domain_angular: float
    residual: np.ndarray


# --- surface and volume integrals ----------------------------------------------


def _cells(a, b):
    return np.arange(a, b)


def surface_flux(u, v, p, cv: ControlVolume, g: GridSpec, rho, mu, x0=(0.0, 0.0), u_S=(0.0, 0.0)):
    """Pressure, momentum and viscous surface integrals over the CV.

    Returns a dict ``{term: (Fx, Fy, Mz)}`` for the terms ``pressure``,
    ``momentum_flux``, ``viscous`` and ``surface_velocity`` (the
    ``rho (n . u_S) u`` term of a moving surface), plus ``segments`` holding
    the same data per segment ``R, L, T, B``.
    """
    G = _Gather(g)
    dx, dy = g.dx, g.dy
    x0 = np.asarray(x0, dtype=float)
    uS = np.asarray(u_S, dtype=float)
    segs = {}
    I = _cells(cv.iL, cv.iU)
    J = _cells(cv.jL, cv.jU)
    for name, Jf, sign in (("T", cv.jU, 1.0), ("B", cv.jL, -1.0)):
        i = I
        Jv = np.full_like(i, Jf)
        pbar = 0.5 * (G(p, i, Jv) + G(p, i, Jv - 1))
        vJ = G(v, i, Jv)
        ubar = 0.25 * (G(u, i, Jv) + G(u, i + 1, Jv) + G(u, i, Jv - 1) + G(u, i + 1, Jv - 1))
        dudy = (G(u, i + 1, Jv) - G(u, i + 1, Jv - 1) + G(u, i, Jv) - G(u, i, Jv - 1)) / (2 * dy)
        dvdx = (G(v, i + 1, Jv) - G(v, i - 1, Jv)) / (2 * dx)
        dvdy = (G(v, i, Jv + 1) - G(v, i, Jv - 1)) / (2 * dy)
        n_uS = sign * uS[1]
        terms = {
            "pressure": np.stack([np.zeros_like(pbar), -sign * pbar], axis=1),
            "momentum_flux": -rho * sign * vJ[:, None] * np.stack([ubar, vJ], axis=1),
            "viscous": sign * mu * np.stack([dudy + dvdx, 2.0 * dvdy], axis=1),
            "surface_velocity": rho * n_uS * np.stack([ubar, vJ], axis=1),
        }
        r = np.stack([g.x_cell(i) - x0[0], np.full(i.shape, g.y_face(Jf) - x0[1])], axis=1)
        segs[name] = {k: _reduce(val, r, dx) for k, val in terms.items()}
    for name, If, sign in (("R", cv.iU, 1.0), ("L", cv.iL, -1.0)):
        j = J
        Iv = np.full_like(j, If)
        pbar = 0.5 * (G(p, Iv, j) + G(p, Iv - 1, j))
        uI = G(u, Iv, j)
        vbar = 0.25 * (G(v, Iv, j) + G(v, Iv, j + 1) + G(v, Iv - 1, j) + G(v, Iv - 1, j + 1))
        dvdx = (G(v, Iv, j + 1) - G(v, Iv - 1, j + 1) + G(v, Iv, j) - G(v, Iv - 1, j)) / (2 * dx)
        dudy = (G(u, Iv, j + 1) - G(u, Iv, j - 1)) / (2 * dy)
        dudx = (G(u, Iv + 1, j) - G(u, Iv - 1, j)) / (2 * dx)
        n_uS = sign * uS[0]
        terms = {
            "pressure": np.stack([-sign * pbar, np.zeros_like(pbar)], axis=1),
            "momentum_flux": -rho * sign * uI[:, None] * np.stack([uI, vbar], axis=1),
            "viscous": sign * mu * np.stack([2.0 * dudx, dudy + dvdx], axis=1),
            "surface_velocity": rho * n_uS * np.stack([uI, vbar], axis=1),
        }
        r = np.stack([np.full(j.shape, g.x_face(If) - x0[0]), g.y_cell(j) - x0[1]], axis=1)
        segs[name] = {k: _reduce(val, r, dy) for k, val in terms.items()}
    total = {}
    for k in ("pressure", "momentum_flux", "viscous", "surface_velocity"):
        acc = np.zeros(3)
        for name in ("R", "L", "T", "B"):
            acc = acc + segs[name][k]
        total[k] = acc
    total["segments"] = segs
    return total


def _reduce(vals, r, h):
    fx = float(np.sum(vals[:, 0])) * h
    fy = float(np.sum(vals[:, 1])) * h
    mz = float(np.sum(cross(r, vals))) * h
    return np.array([fx, fy, mz])


def _face_weights(n, lo_half=True, hi_half=True):
    w = np.ones(n)
    if lo_half:
        w[0] = 0.5
    if hi_half:
        w[-1] = 0.5
    return w


def cv_momentum(u, v, cv: ControlVolume, g: GridSpec, rho):
    """Linear momentum in the CV with half weights on faces lying on its surface."""
    G = _Gather(g)
    dV = g.dx * g.dy
    iu = np.arange(cv.iL, cv.iU + 1)
    ju = np.arange(cv.jL, cv.jU)
    wu = _face_weights(iu.size)[:, None] * np.ones(ju.size)[None, :]
    Mx = float(np.sum(G(u, iu[:, None], ju[None, :]) * wu)) * dV
    iv = np.arange(cv.iL, cv.iU)
    jv = np.arange(cv.jL, cv.jU + 1)
    wv = np.ones(iv.size)[:, None] * _face_weights(jv.size)[None, :]
    My = float(np.sum(G(v, iv[:, None], jv[None, :]) * wv)) * dV
    return rho * np.array([Mx, My])


def cv_angular_momentum(u, v, cv: ControlVolume, g: GridSpec, rho, x0):
    """Angular momentum about ``x0`` looping over x-faces with averaged ``v``."""
    G = _Gather(g)
    dV = g.dx * g.dy
    i = np.arange(cv.iL, cv.iU + 1)[:, None]
    j = np.arange(cv.jL, cv.jU)[None, :]
    w = _face_weights(i.size)[:, None]
    uu = G(u, i, j)
    vb = 0.25 * (G(v, i - 1, j) + G(v, i, j) + G(v, i - 1, j + 1) + G(v, i, j + 1))
    rx = g.x_face(i) - x0[0]
    ry = g.y_cell(j) - x0[1]
    return rho * float(np.sum((rx * vb - ry * uu) * w)) * dV


def domain_momentum(u, v, g: GridSpec, rho, x0=(0.0, 0.0)):
    """Total linear and angular momentum over the whole domain.

    Faces on non-periodic boundaries carry half weight; the ``v`` average
    used for the angular part clamps to the nearest faces at walls.
    """
    dV = g.dx * g.dy
    wu = np.ones(u.shape)
    wv = np.ones(v.shape)
    if not g.periodic[0]:
        wu[[0, -1], :] = 0.5
    if not g.periodic[1]:
        wv[:, [0, -1]] = 0.5
    P = rho * dV * np.array([float(np.sum(u * wu)), float(np.sum(v * wv))])
    nu, ny = u.shape
    i = np.arange(nu)
    j = np.arange(ny)
    if g.periodic[0]:
        im, ip = np.mod(i - 1, g.nx), np.mod(i, g.nx)
    else:
        im, ip = np.clip(i - 1, 0, g.nx - 1), np.clip(i, 0, g.nx - 1)
    jp = np.mod(j + 1, v.shape[1]) if g.periodic[1] else j + 1
    vb = 0.25 * (v[im][:, j] + v[ip][:, j] + v[im][:, jp] + v[ip][:, jp])
    rx = g.x_face(i)[:, None] - x0[0]
    ry = g.y_cell(j)[None, :] - x0[1]
    L = rho * dV * float(np.sum((rx * vb - ry * u) * wu))
    return P, L


# --- estimators --------------------------------------------------------------------


@dataclass
class BodySnapshot:
    """Lagrangian state of one body at a time level (for momentum differences)."""

    positions: np.ndarray
    velocity: np.ndarray
    ds: np.ndarray
    X0: np.ndarray

    @classmethod
    def of(cls, body: RigidBody):
        return cls(body.positions.copy(), body.velocity.copy(), body.ds.copy(), body.X0.copy())

    def momentum(self, rho, x0):
        P = rho * (self.velocity * self.ds[:, None]).sum(axis=0)
        L = rho * float(np.sum(cross(self.positions - np.asarray(x0), self.velocity) * self.ds))
        return P, L


def _triple(vec, m):
    return np.array([vec[0], vec[1], m], dtype=float)


def force_modified(state_n, state_np1, cv_np1, snap_n, snap_np1, g, rho, mu, dt, x0, body="body", moved=False):
    """Single-CV estimator: both momenta integrated over the CV at ``t^{n+1}``."""
    M1 = cv_momentum(state_np1.u, state_np1.v, cv_np1, g, rho)
    M0 = cv_momentum(state_n.u, state_n.v, cv_np1, g, rho)
    A1 = cv_angular_momentum(state_np1.u, state_np1.v, cv_np1, g, rho, x0)
    A0 = cv_angular_momentum(state_n.u, state_n.v, cv_np1, g, rho, x0)
    bd = {"volume": _triple(-(M1 - M0) / dt, -(A1 - A0) / dt)}
    bd["body"] = _body_term(snap_n, snap_np1, rho, dt, x0)
    flux = surface_flux(state_np1.u, state_np1.v, state_np1.p, cv_np1, g, rho, mu, x0)
    for k in ("pressure", "momentum_flux", "viscous"):
        bd[k] = flux[k]
    return ForceTorqueRecord(state_np1.t, body, "cv", bd, cv_np1.indices, moved)


def _body_term(snap_n, snap_np1, rho, dt, x0):
    if snap_n is None or snap_np1 is None:
        return np.zeros(3)
    P0, L0 = snap_n.momentum(rho, x0)
    P1, L1 = snap_np1.momentum(rho, x0)
    return _triple((P1 - P0) / dt, (L1 - L0) / dt)


def force_noca(state_n, state_np1, cv_n, cv_np1, snap_n, snap_np1, g, rho, mu, dt, x0, u_S=(0.0, 0.0), body="body", moved=False):
    """Two-CV estimator with fluid momentum ``M_CV - P_b`` and surface velocity ``u_S``."""
    M1 = cv_momentum(state_np1.u, state_np1.v, cv_np1, g, rho)
    M0 = cv_momentum(state_n.u, state_n.v, cv_n, g, rho)
    A1 = cv_angular_momentum(state_np1.u, state_np1.v, cv_np1, g, rho, x0)
    A0 = cv_angular_momentum(state_n.u, state_n.v, cv_n, g, rho, x0)
    bd = {"volume": _triple(-(M1 - M0) / dt, -(A1 - A0) / dt)}
    bd["body"] = _body_term(snap_n, snap_np1, rho, dt, x0)
    flux = surface_flux(state_np1.u, state_np1.v, state_np1.p, cv_np1, g, rho, mu, x0, u_S)
    for k in ("pressure", "momentum_flux", "viscous", "surface_velocity"):
        bd[k] = flux[k]
    return ForceTorqueRecord(state_np1.t, body, "noca", bd, cv_np1.indices, moved)


def lm_force(record, snap_n, snap_np1, rho, dt, x0, t, body="body"):
    """Lagrange-multiplier estimator from the stored constraint forces."""
    if record is None or record.F is None:
        raise StateError("no Lagrange multiplier record for this step")
    bd = {"body": _body_term(snap_n, snap_np1, rho, dt, x0)}
    R = record.positions - np.asarray(x0)
    ds = record.ds[:, None]
    F = record.F * ds
    bd["lagrange"] = _triple(-F.sum(axis=0), -float(np.sum(cross(R, F))))
    E = record.F_extra * ds
    bd["extra"] = _triple(-E.sum(axis=0), -float(np.sum(cross(R, E))))
    return ForceTorqueRecord(t, body, "lm", bd)


def stokes_force(u, v, p, cv, g, mu, x0=(0.0, 0.0), body="body"):
    """Steady Stokes CV force and torque: pressure and viscous flux only."""
    flux = surface_flux(u, v, p, cv, g, 0.0, mu, x0)
    bd = {"pressure": flux["pressure"], "viscous": flux["viscous"]}
    return ForceTorqueRecord(0.0, body, "stokes_cv", bd, cv.indices)


def stokes_lm_force(F, positions, ds, x0=(0.0, 0.0), body="body"):
    """Steady Stokes force and torque from marker multipliers: ``-sum F ds``."""
    R = np.asarray(positions) - np.asarray(x0)
    Fd = np.asarray(F) * np.asarray(ds)[:, None]
    bd = {"lagrange": _triple(-Fd.sum(axis=0), -float(np.sum(cross(R, Fd))))}
    return ForceTorqueRecord(0.0, body, "stokes_lm", bd)


def momentum_diagnostics(state_n, state_np1, cv, snaps, g, rho, mu, dt, x0):
    """Domain, CV and body momenta plus the CV balance residual ``I``."""
    P, L = domain_momentum(state_np1.u, state_np1.v, g, rho, x0)
    Mcv = cv_momentum(state_np1.u, state_np1.v, cv, g, rho)
    Acv = cv_angular_momentum(state_np1.u, state_np1.v, cv, g, rho, x0)
    Pb = np.zeros(2)
    Lb = 0.0
    for s in snaps:
        p_, l_ = s.momentum(rho, x0)
        Pb = Pb + p_
        Lb += l_
    M0 = cv_momentum(state_n.u, state_n.v, cv, g, rho)
    A0 = cv_angular_momentum(state_n.u, state_n.v, cv, g, rho, x0)
    flux = surface_flux(state_np1.u, state_np1.v, state_np1.p, cv, g, rho, mu, x0)
    res = _triple(-(Mcv - M0) / dt, -(Acv - A0) / dt)
    for k in ("pressure", "momentum_flux", "viscous"):
        res = res + flux[k]
    return MomentumSnapshot(state_np1.t, Mcv, Acv, Pb, Lb, P, L, res)


@dataclass(frozen=True)
class Normalization:
    rho: float
    U: float
    L: float

    def __post_init__(self):
        if not (self.U != 0 and self.L > 0 and self.rho > 0):
            raise ConfigurationError("normalization needs nonzero velocity, length and density", keys=["normalization"])


def coefficients(record: ForceTorqueRecord, norm: Normalization):
    """``(C_D, C_L, C_T)`` with ``q = rho U^2 / 2``, forces over ``q L`` and torque over ``q L^2``."""
    q = 0.5 * norm.rho * norm.U**2
    F = record.force
    return F[0] / (q * norm.L), F[1] / (q * norm.L), record.torque / (q * norm.L**2)
