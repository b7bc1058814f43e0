"""Lagrangian bodies: marker clouds, kinematics and auxiliary body forces.

Every body keeps a body-frame shape ``S(t)`` whose marker-volume weighted
centroid is the origin.  Lab positions are always rebuilt as
``X = X0 + Rot(theta) S(t)``, so rigid updates never accumulate drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GeometryError, StateError
from .mesh import GridSpec


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cross(a, b):
    """Scalar 2D cross product of (..., 2) arrays."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def omega_cross(w, R):
    """``w e_z ^ R`` for scalar angular velocity ``w``."""
    return np.stack([-w * R[:, 1], w * R[:, 0]], axis=1)


# --- shapes ------------------------------------------------------------------


@dataclass(frozen=True)
class Disc:
    D: float


@dataclass(frozen=True)
class Ellipse:
    a: float
    b: float


@dataclass(frozen=True)
class Plate:
    b: float


@dataclass(frozen=True)
class CircleSurface:
    D: float
    spacing_cells: float = 2.0


@dataclass(frozen=True)
class EelShape:
    """Backbone of projected length ``L`` with a tapered half-width profile.

    The profile is piecewise: elliptic head up to ``s_b``, quadratic taper
    from ``w_h`` to ``w_t`` up to ``s_t``, then linear closure to the tail.
    All lengths are fractions of ``L``.
    """

    L: float = 1.0
    s_b: float = 0.04
    s_t: float = 0.95
    w_h: float = 0.04
    w_t: float = 0.01

    def half_width(self, x):
        s = np.asarray(x, dtype=float) / self.L
        sb, st, wh, wt = self.s_b, self.s_t, self.w_h, self.w_t
        head = np.sqrt(np.clip(2.0 * wh * s - s * s, 0.0, None))
        mid = wh - (wh - wt) * ((s - sb) / (st - sb)) ** 2
        tail = wt * (1.0 - s) / (1.0 - st)
        w = np.where(s < sb, head, np.where(s < st, mid, tail))
        return np.where((s < 0) | (s > 1), 0.0, w) * self.L


@dataclass
class MarkerCloud:
    """Marker offsets in the generating frame, volumes and nominal area."""

    offsets: np.ndarray
    ds: np.ndarray
    volume: float
    backbone: np.ndarray | None = None
    normal: np.ndarray | None = None


def _lattice(half_x, half_y, dx, dy):
    nxh = int(math.ceil(half_x / dx)) + 1
    nyh = int(math.ceil(half_y / dy)) + 1
    ix = (np.arange(-nxh, nxh) + 0.5) * dx
    iy = (np.arange(-nyh, nyh) + 0.5) * dy
    X, Y = np.meshgrid(ix, iy, indexing="ij")
    return X.ravel(), Y.ravel()


def generate_markers(shape, g: GridSpec) -> MarkerCloud:
    """Generate markers for ``shape`` at the resolution of ``g``.

    Volumetric shapes use one marker per cell on a cell-centred lattice; the
    plate is a line at transverse cell spacing; surface circles use markers
    about ``spacing_cells`` apart.
    """
    dx, dy = g.dx, g.dy
    Lx, Ly = g.extents
    cell = dx * dy
    if isinstance(shape, Disc):
        R = 0.5 * shape.D
        if shape.D <= 0 or shape.D > Lx or shape.D > Ly:
            raise GeometryError(f"disc of diameter {shape.D} does not fit the domain")
        X, Y = _lattice(R, R, dx, dy)
        keep = X * X + Y * Y <= R * R
        pts = np.stack([X[keep], Y[keep]], axis=1)
        return MarkerCloud(pts, np.full(len(pts), cell), math.pi * R * R)
    if isinstance(shape, Ellipse):
        if min(shape.a, shape.b) <= 0 or 2 * shape.a > Lx or 2 * shape.b > Ly:
            raise GeometryError("ellipse does not fit the domain")
        X, Y = _lattice(shape.a, shape.b, dx, dy)
        keep = (X / shape.a) ** 2 + (Y / shape.b) ** 2 <= 1.0
        pts = np.stack([X[keep], Y[keep]], axis=1)
        return MarkerCloud(pts, np.full(len(pts), cell), math.pi * shape.a * shape.b)
    if isinstance(shape, Plate):
        if shape.b <= 0 or shape.b > Ly:
            raise GeometryError("plate does not fit the domain")
        n = int(round(shape.b / dy)) + 1
        y = np.linspace(-0.5 * shape.b, 0.5 * shape.b, n)
        pts = np.stack([np.zeros(n), y], axis=1)
        return MarkerCloud(pts, np.full(n, cell), shape.b * dx)
    if isinstance(shape, CircleSurface):
        R = 0.5 * shape.D
        if shape.D <= 0 or shape.D > Lx or shape.D > Ly:
            raise GeometryError("circle does not fit the domain")
        n = int(round(math.pi * shape.D / (shape.spacing_cells * dx) / 4.0)) * 4
        n = max(n, 8)
        th = 2.0 * math.pi * np.arange(n) / n
        pts = R * np.stack([np.cos(th), np.sin(th)], axis=1)
        arc = math.pi * shape.D / n
        return MarkerCloud(pts, np.full(n, arc * dx), math.pi * shape.D * dx)
    if isinstance(shape, EelShape):
        if shape.L <= 0 or shape.L > Lx:
            raise GeometryError("eel does not fit the domain")
        xs = np.arange(int(round(shape.L / dx)) + 1) * dx
        bb, nn = [], []
        for x in xs:
            w = float(shape.half_width(x))
            m = int(math.floor(w / dy + 1e-9))
            for j in range(-m, m + 1):
                bb.append(x)
                nn.append(j * dy)
        bb = np.array(bb)
        nn = np.array(nn)
        pts = np.stack([bb, nn], axis=1)
        return MarkerCloud(pts, np.full(len(bb), cell), float(len(bb) * cell), backbone=bb, normal=nn)
    raise ConfigurationError(f"unknown shape {shape!r}", keys=["shape"])


# --- eel kinematics ----------------------------------------------------------

EEL_AMPLITUDE = 0.125
EEL_OFFSET = 0.03125


def eel_lateral_displacement(x, t, T=1.0, L=1.0):
    """Traveling-wave lateral displacement of the backbone."""
    s = np.asarray(x, dtype=float) / L
    env = EEL_AMPLITUDE * (s + EEL_OFFSET) / (1.0 + EEL_OFFSET)
    return L * env * np.sin(2.0 * np.pi * (s - t / T))


def eel_lateral_velocity(x, t, T=1.0, L=1.0):
    s = np.asarray(x, dtype=float) / L
    env = EEL_AMPLITUDE * (s + EEL_OFFSET) / (1.0 + EEL_OFFSET)
    return -L * env * (2.0 * np.pi / T) * np.cos(2.0 * np.pi * (s - t / T))


def project_momentum_free(Uk, R, ds):
    """Remove net linear and angular momentum from a marker velocity field.

    Returns ``(projected, mean, omega)`` such that
    ``Uk = projected + mean + omega ^ R``.
    """
    ds = np.asarray(ds, dtype=float)
    vol = ds.sum()
    mean = (Uk * ds[:, None]).sum(axis=0) / vol
    U1 = Uk - mean
    Rc = R - (R * ds[:, None]).sum(axis=0) / vol
    I = float(np.sum((Rc * Rc).sum(axis=1) * ds))
    omega = float(np.sum(cross(Rc, U1) * ds)) / I if I > 0 else 0.0
    return U1 - omega_cross(omega, Rc), mean, omega


def eel_deformation(t, T, L, backbone, normal, ds, theta=0.0):
    """Momentum-free deformation velocity ``U_k`` of the eel markers.

    ``backbone`` and ``normal`` are the marker coordinates along and across
    the undeformed backbone; the lab-frame orientation is ``theta``.
    """
    shape = eel_shape(t, T, L, backbone, normal, ds)
    rate = eel_shape_rate(t, T, L, backbone, ds)
    Rot = rotation(theta)
    Uk, _, _ = project_momentum_free(rate @ Rot.T, shape @ Rot.T, ds)
    return Uk


def eel_shape(t, T, L, backbone, normal, ds):
    pts = np.stack([backbone, eel_lateral_displacement(backbone, t, T, L) + normal], axis=1)
    return pts - (pts * ds[:, None]).sum(axis=0) / ds.sum()


def eel_shape_rate(t, T, L, backbone, ds):
    vy = eel_lateral_velocity(backbone, t, T, L)
    vy = vy - np.sum(vy * ds) / ds.sum()
    return np.stack([np.zeros_like(vy), vy], axis=1)


# --- kinematics modes --------------------------------------------------------


@dataclass(frozen=True)
class Stationary:
    free = False

    def velocity(self, t):
        return np.zeros(2), 0.0

    def pose(self, t):
        return np.zeros(2), 0.0


@dataclass(frozen=True)
class Translation:
    U: tuple = (0.0, 0.0)
    free = False

    def velocity(self, t):
        return np.array(self.U, dtype=float), 0.0

    def pose(self, t):
        return np.array(self.U, dtype=float) * t, 0.0


@dataclass(frozen=True)
class InlineOscillation:
    U0: float
    f: float
    free = False

    def velocity(self, t):
        return np.array([-self.U0 * math.cos(2 * math.pi * self.f * t), 0.0]), 0.0

    def pose(self, t):
        w = 2 * math.pi * self.f
        return np.array([-self.U0 / w * math.sin(w * t), 0.0]), 0.0


@dataclass(frozen=True)
class CrossflowOscillation:
    V0: float
    fe: float
    free = False

    def velocity(self, t):
        return np.array([0.0, -self.V0 * math.sin(2 * math.pi * self.fe * t)]), 0.0

    def pose(self, t):
        w = 2 * math.pi * self.fe
        return np.array([0.0, self.V0 / w * (math.cos(w * t) - 1.0)]), 0.0


@dataclass(frozen=True)
class RotationalOscillation:
    Am: float
    f: float
    free = False

    def velocity(self, t):
        return np.zeros(2), self.Am * math.sin(2 * math.pi * self.f * t)

    def pose(self, t):
        w = 2 * math.pi * self.f
        return np.zeros(2), self.Am / w * (1.0 - math.cos(w * t))


@dataclass(frozen=True)
class Eel:
    T: float = 1.0
    L: float = 1.0
    free = True


@dataclass(frozen=True)
class FreeGravity:
    rho_s: float
    gconst: float = 980.0
    free = True


def check_kinematics(kin):
    for name, val in vars(kin).items():
        if not math.isfinite(np.sum(val)):
            raise ConfigurationError(f"non-finite kinematics parameter {name}", keys=[name])
    for name in ("f", "fe", "T", "L", "rho_s"):
        if hasattr(kin, name) and getattr(kin, name) <= 0:
            raise ConfigurationError(f"kinematics parameter {name} must be positive", keys=[name])


# --- rigid body ----------------------------------------------------------------


@dataclass
class RigidBody:
    """A marker cloud plus its kinematic state at the current time level.

    ``positions``/``velocity`` hold ``X^n`` and ``U_b^n``.  During a step the
    integrator fills ``mid`` (midstep positions) and the LM record ``F``.
    """

    name: str
    cloud: MarkerCloud
    kinematics: object
    X0: np.ndarray
    theta: float = 0.0
    radius: float | None = None
    t: float = 0.0
    U_r: np.ndarray = field(default_factory=lambda: np.zeros(2))
    W_r: float = 0.0
    spin: float = 0.0
    positions: np.ndarray | None = None
    velocity: np.ndarray | None = None
    mid: np.ndarray | None = None
    mid_X0: np.ndarray | None = None
    mid_theta: float = 0.0
    F: np.ndarray | None = None
    F_extra: np.ndarray | None = None
    _free_ready: bool = False

    def __post_init__(self):
        check_kinematics(self.kinematics)
        self.X0 = np.array(self.X0, dtype=float)
        self.X0_init = self.X0.copy()
        self.theta_init = float(self.theta)
        c = self.cloud
        if isinstance(self.kinematics, Eel) and c.backbone is None:
            raise ConfigurationError("eel kinematics need an eel marker cloud", keys=["shape"])
        if c.backbone is None:
            # rigid shapes: recentre on the weighted centroid
            centroid = (c.offsets * c.ds[:, None]).sum(axis=0) / c.ds.sum()
            self._ref = c.offsets - centroid
        self.positions = self.place(self.X0, self.theta, self.t)
        self.velocity = np.zeros_like(self.positions)
        if not self.kinematics.free:
            self.velocity = self.prescribed_velocity(self.t, self.positions - self.X0)
        else:
            self.velocity, self.spin = self._free_velocity(self.U_r, self.W_r, self.positions, self.t, self.theta)

    # geometry
    @property
    def ds(self):
        return self.cloud.ds

    @property
    def n_markers(self):
        return self.cloud.ds.size

    @property
    def volume(self):
        return self.cloud.volume

    def shape(self, t):
        if isinstance(self.kinematics, Eel):
            k = self.kinematics
            return eel_shape(t, k.T, k.L, self.cloud.backbone, self.cloud.normal, self.ds)
        return self._ref

    def shape_rate(self, t):
        if isinstance(self.kinematics, Eel):
            k = self.kinematics
            return eel_shape_rate(t, k.T, k.L, self.cloud.backbone, self.ds)
        return np.zeros_like(self._ref)

    def place(self, X0, theta, t):
        return X0[None, :] + self.shape(t) @ rotation(theta).T

    def mass(self, rho):
        M = rho * float(self.ds.sum())
        if M <= 0:
            raise ConfigurationError("body mass must be positive")
        return M

    def centroid(self, X):
        return (X * self.ds[:, None]).sum(axis=0) / self.ds.sum()

    def bounding_box(self):
        return self.positions.min(axis=0), self.positions.max(axis=0)

    # kinematics
    def prescribed_velocity(self, t, R):
        U, W = self.kinematics.velocity(t)
        return U[None, :] + omega_cross(W, R)

    def prescribed_pose(self, t):
        dX, dth = self.kinematics.pose(t)
        return self.X0_init + dX, self.theta_init + dth

    def desired_velocity(self, t, R=None):
        """Marker velocities ``U_b`` at time ``t`` for prescribed modes."""
        if self.kinematics.free:
            if not self._free_ready:
                raise StateError("free body velocity requested before update_free_motion")
            return self.velocity.copy()
        if R is None:
            R = (self.mid if self.mid is not None else self.positions) - (self.mid_X0 if self.mid is not None else self.X0)
        return self.prescribed_velocity(t, R)

    def _deformation(self, t, theta, R):
        if not isinstance(self.kinematics, Eel):
            return np.zeros_like(R), 0.0
        rate = self.shape_rate(t) @ rotation(theta).T
        Uk, _, omega = project_momentum_free(rate, R, self.ds)
        return Uk, omega

    def _free_velocity(self, U_r, W_r, X, t, theta):
        R = X - self.centroid(X)
        Uk, omega = self._deformation(t, theta, R)
        return U_r[None, :] + omega_cross(W_r, R) + Uk, W_r - omega

    def predict_midstep(self, t, dt):
        """Midstep marker positions ``X^{n+1/2}``."""
        th = t + 0.5 * dt
        if self.kinematics.free:
            self.mid_X0 = self.X0 + 0.5 * dt * self.U_r
            self.mid_theta = self.theta + 0.5 * dt * self.spin
        else:
            self.mid_X0, self.mid_theta = self.prescribed_pose(th)
        self.mid = self.place(self.mid_X0, self.mid_theta, th)
        return self.mid

    def update_free_motion(self, Ju, rho, t_new):
        """Rigid velocities from momentum conservation of the interpolated field.

        ``Ju`` is the intermediate velocity interpolated at the midstep markers.
        Returns ``(U_r, W_r)`` and stores ``U_b^{n+1}``.
        """
        if self.mid is None:
            raise StateError("predict_midstep must be called first")
        M = self.mass(rho)
        R = self.mid - self.centroid(self.mid)
        I = rho * float(np.sum((R * R).sum(axis=1) * self.ds))
        if I <= 0:
            raise ConfigurationError("moment of inertia must be positive")
        U_r = rho * (Ju * self.ds[:, None]).sum(axis=0) / M
        W_r = rho * float(np.sum(cross(R, Ju) * self.ds)) / I
        self._new_U_r, self._new_W_r = U_r, W_r
        self._new_velocity, self._new_spin = self._free_velocity(U_r, W_r, self.mid, t_new, self.mid_theta)
        self._free_ready = True
        return U_r, W_r

    def target_velocity(self, t_new):
        """``U_b^{n+1}`` at the midstep markers for the current step."""
        if self.kinematics.free:
            if not self._free_ready:
                raise StateError("free body velocity requested before update_free_motion")
            return self._new_velocity
        return self.prescribed_velocity(t_new, self.mid - self.mid_X0)

    def advance(self, t_new, dt, U_b):
        """Move markers to ``t^{n+1}`` and store ``U_b^{n+1}``."""
        if self.kinematics.free:
            self.X0 = self.X0 + 0.5 * dt * (self.U_r + self._new_U_r)
            self.theta = self.theta + 0.5 * dt * (self.spin + self._new_spin)
            self.U_r, self.W_r = self._new_U_r, self._new_W_r
            self.spin = self._new_spin
            self._free_ready = False
        else:
            self.X0, self.theta = self.prescribed_pose(t_new)
            U, W = self.kinematics.velocity(t_new)
            self.U_r, self.W_r = U, W
        self.t = t_new
        self.positions = self.place(self.X0, self.theta, t_new)
        self.velocity = np.array(U_b, dtype=float)


def body_momentum(body: RigidBody, rho, x0=None, positions=None, velocity=None):
    """Lagrangian linear and angular momentum ``(P_b, L_b)`` about ``x0``."""
    X = body.positions if positions is None else positions
    U = body.velocity if velocity is None else velocity
    x0 = body.X0 if x0 is None else np.asarray(x0, dtype=float)
    ds = body.ds
    P = rho * (U * ds[:, None]).sum(axis=0)
    L = rho * float(np.sum(cross(X - x0, U) * ds))
    return P, L


def gravity_force(body: RigidBody, rho_s, rho, gconst, volume=None):
    """Uniform per-marker force density whose total is ``-(rho_s - rho) g V e_y``."""
    if rho_s <= 0:
        raise ConfigurationError("solid density must be positive", keys=["rho_s"])
    V = body.volume if volume is None else volume
    total = -(rho_s - rho) * gconst * V
    F = np.zeros((body.n_markers, 2))
    F[:, 1] = total / body.ds.sum()
    return F


def collision_force(xi, xj, Ri, Rj, c_ij, eps_P, zeta):
    """Repulsive force on body ``i`` due to body ``j`` (a 2-vector)."""
    d = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    dist = float(np.hypot(d[0], d[1]))
    if dist == 0.0:
        raise GeometryError("coincident body centers")
    if dist > Ri + Rj + zeta:
        return np.zeros(2)
    mag = c_ij / eps_P * ((dist - Ri - Rj - zeta) / zeta) ** 2
    return mag * d / dist


def collision_forces(bodies, c_ij, eps_P, zeta):
    """Total repulsive force per body, pairs visited in fixed order."""
    out = [np.zeros(2) for _ in bodies]
    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            bi, bj = bodies[i], bodies[j]
            if bi.radius is None or bj.radius is None:
                continue
            f = collision_force(bi.X0, bj.X0, bi.radius, bj.radius, c_ij, eps_P, zeta)
            out[i] = out[i] + f
            out[j] = out[j] - f
    return out
