"""Uniform staggered (MAC) grid, boundary conditions and discrete operators.

Storage conventions (no ghost cells are stored):

* ``u[i, j]`` lives on the x-face at ``(x0 + i*dx, y0 + (j + 1/2)*dy)``; shape
  ``(nx + 1, ny)``, or ``(nx, ny)`` when x is periodic.
* ``v[i, j]`` lives on the y-face at ``(x0 + (i + 1/2)*dx, y0 + j*dy)``; shape
  ``(nx, ny + 1)``, or ``(nx, ny)`` when y is periodic.
* ``p[i, j]`` lives at the cell center; shape ``(nx, ny)``.

Cell ``(i, j)`` therefore owns its left face ``u[i, j]`` and bottom face
``v[i, j]``.  Operators that need neighbours work on padded copies with one
ghost layer filled from the :class:`BoundarySpec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigurationError, NumericalFailure

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
OUTFLOW = "outflow"

SideValue = Union[Sequence[float], Callable[[float], Sequence[float]]]


@dataclass(frozen=True)
class GridSpec:
    origin: tuple
    extents: tuple
    nx: int
    ny: int
    periodic: tuple = (False, False)

    @property
    def dx(self) -> float:
        return self.extents[0] / self.nx

    @property
    def dy(self) -> float:
        return self.extents[1] / self.ny

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    @property
    def u_shape(self) -> tuple:
        return (self.nx if self.periodic[0] else self.nx + 1, self.ny)

    @property
    def v_shape(self) -> tuple:
        return (self.nx, self.ny if self.periodic[1] else self.ny + 1)

    @property
    def cell_shape(self) -> tuple:
        return (self.nx, self.ny)

    # Coordinates are origin + integer multiple of the spacing, one rounding.
    def x_face(self, i):
        return self.origin[0] + np.asarray(i, dtype=float) * self.dx

    def y_face(self, j):
        return self.origin[1] + np.asarray(j, dtype=float) * self.dy

    def x_cell(self, i):
        return self.origin[0] + (np.asarray(i, dtype=float) + 0.5) * self.dx

    def y_cell(self, j):
        return self.origin[1] + (np.asarray(j, dtype=float) + 0.5) * self.dy

    def u_coords(self):
        """Meshgrid (X, Y) of x-face centers."""
        nu, ny = self.u_shape
        return np.meshgrid(self.x_face(np.arange(nu)), self.y_cell(np.arange(ny)), indexing="ij")

    def v_coords(self):
        nx, nv = self.v_shape
        return np.meshgrid(self.x_cell(np.arange(nx)), self.y_face(np.arange(nv)), indexing="ij")

    def cell_coords(self):
        return np.meshgrid(self.x_cell(np.arange(self.nx)), self.y_cell(np.arange(self.ny)), indexing="ij")

    @property
    def upper(self) -> tuple:
        return (self.origin[0] + self.extents[0], self.origin[1] + self.extents[1])

    def zeros_u(self):
        return np.zeros(self.u_shape)

    def zeros_v(self):
        return np.zeros(self.v_shape)

    def zeros_p(self):
        return np.zeros(self.cell_shape)


def make_grid(origin, extents, nx, ny, periodic=(False, False)) -> GridSpec:
    """Build a uniform grid; raises ConfigurationError on bad sizes."""
    bad = []
    if not (isinstance(nx, (int, np.integer)) and nx >= 4):
        bad.append("nx")
    if not (isinstance(ny, (int, np.integer)) and ny >= 4):
        bad.append("ny")
    ext = tuple(float(e) for e in extents)
    if len(ext) != 2 or not all(math.isfinite(e) and e > 0 for e in ext):
        bad.append("extents")
    org = tuple(float(o) for o in origin)
    if len(org) != 2 or not all(math.isfinite(o) for o in org):
        bad.append("origin")
    if bad:
        raise ConfigurationError(f"invalid grid parameters: {', '.join(bad)}", keys=bad)
    return GridSpec(org, ext, int(nx), int(ny), (bool(periodic[0]), bool(periodic[1])))


@dataclass(frozen=True)
class Side:
    """Boundary condition on one side of the rectangle."""

    kind: str = DIRICHLET
    velocity: SideValue = (0.0, 0.0)

    def value(self, t: float) -> tuple:
        vel = self.velocity(t) if callable(self.velocity) else self.velocity
        return float(vel[0]), float(vel[1])


@dataclass(frozen=True)
class BoundarySpec:
    left: Side = field(default_factory=Side)
    right: Side = field(default_factory=Side)
    bottom: Side = field(default_factory=Side)
    top: Side = field(default_factory=Side)

    @classmethod
    def periodic(cls) -> "BoundarySpec":
        s = Side(PERIODIC)
        return cls(s, s, s, s)

    @classmethod
    def walls(cls, velocity=(0.0, 0.0)) -> "BoundarySpec":
        s = Side(DIRICHLET, tuple(velocity))
        return cls(s, s, s, s)

    @property
    def is_periodic(self) -> tuple:
        return (self.left.kind == PERIODIC, self.bottom.kind == PERIODIC)

    def validate(self, grid: GridSpec | None = None) -> None:
        for name in ("left", "right", "bottom", "top"):
            kind = getattr(self, name).kind
            if kind not in (PERIODIC, DIRICHLET, OUTFLOW):
                raise ConfigurationError(f"unknown boundary kind {kind!r} on {name}", keys=[name])
        if (self.left.kind == PERIODIC) != (self.right.kind == PERIODIC):
            raise ConfigurationError("periodic must be paired on left/right", keys=["left", "right"])
        if (self.bottom.kind == PERIODIC) != (self.top.kind == PERIODIC):
            raise ConfigurationError("periodic must be paired on bottom/top", keys=["bottom", "top"])
        if grid is not None and tuple(grid.periodic) != self.is_periodic:
            raise ConfigurationError("grid periodicity does not match boundary spec", keys=["periodic"])

    def axis_codes(self, component: str) -> tuple:
        """Per-axis ``((lo, hi), stagger)`` codes for the linear solvers.

        Codes are ``P`` (periodic), ``D`` (homogeneous Dirichlet on the
        unknowns) and ``N`` (homogeneous Neumann).  ``component`` is one of
        ``"u"``, ``"v"`` or ``"p"``.
        """
        def code(side: Side, comp: str) -> str:
            if side.kind == PERIODIC:
                return "P"
            if comp == "p":
                return "N" if side.kind == DIRICHLET else "D"
            return "D" if side.kind == DIRICHLET else "N"

        xcodes = (code(self.left, component), code(self.right, component))
        ycodes = (code(self.bottom, component), code(self.top, component))
        xst = "node" if component == "u" else "cell"
        yst = "node" if component == "v" else "cell"
        return (xcodes, xst), (ycodes, yst)


def unknown_slices(grid: GridSpec, bcs: BoundarySpec, component: str) -> tuple:
    """Index slices selecting the faces that are solved for.

    Normal faces on velocity-Dirichlet sides carry prescribed values and are
    excluded; everything else is an unknown.
    """
    shape = grid.u_shape if component == "u" else grid.v_shape
    sl = [slice(0, shape[0]), slice(0, shape[1])]
    axis = 0 if component == "u" else 1
    lo, hi = (bcs.left, bcs.right) if axis == 0 else (bcs.bottom, bcs.top)
    start = 1 if lo.kind == DIRICHLET else 0
    stop = shape[axis] - 1 if hi.kind == DIRICHLET else shape[axis]
    sl[axis] = slice(start, stop)
    return tuple(sl)


def apply_velocity_bc(u, v, grid: GridSpec, bcs: BoundarySpec, t: float) -> None:
    """Overwrite normal boundary faces on Dirichlet sides with their values (in place)."""
    if bcs.left.kind == DIRICHLET:
        u[0, :] = bcs.left.value(t)[0]
    if bcs.right.kind == DIRICHLET:
        u[-1, :] = bcs.right.value(t)[0]
    if bcs.bottom.kind == DIRICHLET:
        v[:, 0] = bcs.bottom.value(t)[1]
    if bcs.top.kind == DIRICHLET:
        v[:, -1] = bcs.top.value(t)[1]


def _pad_axis_node(P, axis, lo: Side, hi: Side):
    # normal component: ghost beyond a boundary face
    a = np.moveaxis(P, axis, 0)
    if lo.kind == PERIODIC:
        a[0] = a[-2]
        a[-1] = a[1]
        return
    a[0] = a[2] if lo.kind == OUTFLOW else 2.0 * a[1] - a[2]
    a[-1] = a[-3] if hi.kind == OUTFLOW else 2.0 * a[-2] - a[-3]


def _pad_axis_cell(P, axis, lo: Side, hi: Side, comp: int, t: float):
    # tangential component or pressure: ghost half a cell beyond the wall
    a = np.moveaxis(P, axis, 0)
    if lo.kind == PERIODIC:
        a[0] = a[-2]
        a[-1] = a[1]
        return
    for ghost, inner, side in ((0, 1, lo), (-1, -2, hi)):
        if side.kind == OUTFLOW:
            a[ghost] = a[inner]
        else:
            a[ghost] = 2.0 * side.value(t)[comp] - a[inner]


def pad_u(u, grid: GridSpec, bcs: BoundarySpec, t: float = 0.0):
    P = np.empty((u.shape[0] + 2, u.shape[1] + 2))
    P[1:-1, 1:-1] = u
    _pad_axis_node(P[:, 1:-1], 0, bcs.left, bcs.right)
    _pad_axis_cell(P, 1, bcs.bottom, bcs.top, 0, t)
    return P


def pad_v(v, grid: GridSpec, bcs: BoundarySpec, t: float = 0.0):
    P = np.empty((v.shape[0] + 2, v.shape[1] + 2))
    P[1:-1, 1:-1] = v
    _pad_axis_node(P[1:-1, :], 1, bcs.bottom, bcs.top)
    _pad_axis_cell(P, 0, bcs.left, bcs.right, 1, t)
    return P


def pad_p(p, grid: GridSpec, bcs: BoundarySpec):
    """Pressure ghosts: Neumann on velocity walls, p = 0 on outflow sides."""
    P = np.empty((p.shape[0] + 2, p.shape[1] + 2))
    P[1:-1, 1:-1] = p
    for axis, lo, hi in ((0, bcs.left, bcs.right), (1, bcs.bottom, bcs.top)):
        a = np.moveaxis(P, axis, 0)
        if lo.kind == PERIODIC:
            a[0] = a[-2]
            a[-1] = a[1]
            continue
        a[0] = -a[1] if lo.kind == OUTFLOW else a[1]
        a[-1] = -a[-2] if hi.kind == OUTFLOW else a[-2]
    return P


def _check_shape(arr, shape, name):
    if arr.shape != tuple(shape):
        raise ConfigurationError(f"{name} has shape {arr.shape}, expected {tuple(shape)}", keys=[name])


def divergence(u, v, g: GridSpec):
    """Cell-centered discrete divergence of a face field."""
    _check_shape(u, g.u_shape, "u")
    _check_shape(v, g.v_shape, "v")
    if g.periodic[0]:
        du = np.roll(u, -1, axis=0) - u
    else:
        du = u[1:, :] - u[:-1, :]
    if g.periodic[1]:
        dv = np.roll(v, -1, axis=1) - v
    else:
        dv = v[:, 1:] - v[:, :-1]
    return du / g.dx + dv / g.dy


def gradient(p, g: GridSpec, bcs: BoundarySpec):
    """Face-centered gradient of a cell field, ghost values from ``pad_p``."""
    P = pad_p(p, g, bcs)
    if g.periodic[0]:
        gx = (P[1:-1, 1:-1] - P[:-2, 1:-1]) / g.dx
    else:
        gx = (P[1:, 1:-1] - P[:-1, 1:-1]) / g.dx
    if g.periodic[1]:
        gy = (P[1:-1, 1:-1] - P[1:-1, :-2]) / g.dy
    else:
        gy = (P[1:-1, 1:] - P[1:-1, :-1]) / g.dy
    return gx, gy


def laplacian_padded(P, dx, dy):
    c = P[1:-1, 1:-1]
    return (P[2:, 1:-1] - 2.0 * c + P[:-2, 1:-1]) / dx**2 + (P[1:-1, 2:] - 2.0 * c + P[1:-1, :-2]) / dy**2


def laplacian_u(u, g, bcs, t=0.0):
    return laplacian_padded(pad_u(u, g, bcs, t), g.dx, g.dy)


def laplacian_v(v, g, bcs, t=0.0):
    return laplacian_padded(pad_v(v, g, bcs, t), g.dx, g.dy)


def laplacian_p(p, g, bcs):
    return laplacian_padded(pad_p(p, g, bcs), g.dx, g.dy)


def v_on_u_faces(Pv, nu, ny):
    """Four-point average of padded ``v`` onto the x-faces."""
    return 0.25 * (Pv[0:nu, 1:ny + 1] + Pv[1:nu + 1, 1:ny + 1] + Pv[0:nu, 2:ny + 2] + Pv[1:nu + 1, 2:ny + 2])


def u_on_v_faces(Pu, nx, nv):
    """Four-point average of padded ``u`` onto the y-faces."""
    return 0.25 * (Pu[1:nx + 1, 0:nv] + Pu[2:nx + 2, 0:nv] + Pu[1:nx + 1, 1:nv + 1] + Pu[2:nx + 2, 1:nv + 1])


def compute_dt(u, v, g: GridSpec, C: float, dt_max: float = math.inf) -> float:
    """Convective CFL time step ``C * min(dx/max|u|, dy/max|v|)``."""
    if not (0.0 < C <= 1.0):
        raise ConfigurationError(f"CFL number must lie in (0, 1], got {C}", keys=["cfl"])
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    if not (math.isfinite(umax) and math.isfinite(vmax)):
        raise NumericalFailure("non-finite velocity while computing the time step")
    candidates = []
    if umax > 0.0:
        candidates.append(g.dx / umax)
    if vmax > 0.0:
        candidates.append(g.dy / vmax)
    if not candidates:
        if not math.isfinite(dt_max):
            raise ConfigurationError("quiescent fields need a finite dt_max", keys=["dt_max"])
        return float(dt_max)
    return float(min(C * min(candidates), dt_max))


# --- field dumps -----------------------------------------------------------

_DUMP_MAGIC = "# ibcv-field 1"


def write_field_dump(path, values, g: GridSpec, component: str, t: float, binary: bool = False) -> None:
    """Write one field as a text header followed by row-major values.

    ASCII values use ``repr`` so they round-trip bit-exactly; the binary
    encoding is little-endian float64.
    """
    values = np.ascontiguousarray(values, dtype=float)
    header = [
        _DUMP_MAGIC,
        f"# component: {component}",
        f"# time: {float(t)!r}",
        f"# origin: {g.origin[0]!r} {g.origin[1]!r}",
        f"# extents: {g.extents[0]!r} {g.extents[1]!r}",
        f"# cells: {g.nx} {g.ny}",
        f"# periodic: {int(g.periodic[0])} {int(g.periodic[1])}",
        f"# shape: {values.shape[0]} {values.shape[1]}",
        f"# encoding: {'binary-le-f64' if binary else 'ascii'}",
        "# end",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode())
        if binary:
            fh.write(values.astype("<f8").tobytes(order="C"))
        else:
            for row in values:
                fh.write((" ".join(repr(float(x)) for x in row) + "\n").encode())


def read_field_dump(path):
    """Return ``(values, grid, component, time)`` from a dump file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    meta = {}
    pos = 0
    first = True
    while True:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode()
        pos = end + 1
        if first:
            if line != _DUMP_MAGIC:
                raise ConfigurationError(f"{path}: not a field dump")
            first = False
            continue
        if line == "# end":
            break
        key, _, val = line[2:].partition(": ")
        meta[key] = val
    shape = tuple(int(s) for s in meta["shape"].split())
    if meta["encoding"] == "binary-le-f64":
        values = np.frombuffer(raw[pos:], dtype="<f8").reshape(shape).astype(float)
    else:
        rows = raw[pos:].decode().split("\n")
        values = np.array([[float(x) for x in r.split()] for r in rows if r.strip()], dtype=float)
        values = values.reshape(shape)
    ox, oy = (float(s) for s in meta["origin"].split())
    lx, ly = (float(s) for s in meta["extents"].split())
    nx, ny = (int(s) for s in meta["cells"].split())
    px, py = (bool(int(s)) for s in meta["periodic"].split())
    grid = GridSpec((ox, oy), (lx, ly), nx, ny, (px, py))
    return values, grid, meta["component"], float(meta["time"])
