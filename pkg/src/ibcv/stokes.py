"""Fully constrained steady Stokes solver with surface-marker rigidity constraints.

The saddle-point system

    mu L u - G p + S F = 0,   -D u = 0,   J u = U_b,   sum(p) = 0

is assembled as one sparse matrix and factorised directly.  A scalar
multiplier attached to the continuity rows pins the pressure mean when the
pressure operator has a constant nullspace.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh
from .errors import ConfigurationError, NumericalFailure
from .kernels import Coupling, PESKIN4, get_kernel
from .mesh import DIRICHLET, OUTFLOW, PERIODIC, BoundarySpec, GridSpec
from .solvers import dense_operator_2d


@dataclass
class StokesProblem:
    grid: GridSpec
    mu: float
    bcs: BoundarySpec
    positions: np.ndarray
    ds: np.ndarray
    U_b: np.ndarray
    kernel: object = PESKIN4

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.ds = np.broadcast_to(np.asarray(self.ds, dtype=float), (len(self.positions),)).copy()
        self.U_b = np.broadcast_to(np.asarray(self.U_b, dtype=float), self.positions.shape).copy()
        if self.mu <= 0:
            raise ConfigurationError("viscosity must be positive", keys=["mu"])
        if len(self.positions) < 8:
            raise ConfigurationError("a Stokes body needs at least 8 markers", keys=["markers"])
        self.bcs.validate(self.grid)


@dataclass
class StokesSolution:
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    F: np.ndarray
    residuals: dict


def _grad_1d(lo, hi, n, h):
    """Cell-to-face difference matrix (all faces) for one axis."""
    if lo.kind == PERIODIC:
        A = sp.lil_matrix((n, n))
        for i in range(n):
            A[i, i] += 1.0
            A[i, (i - 1) % n] -= 1.0
        return (A / h).tocsr()
    A = sp.lil_matrix((n + 1, n))
    for i in range(1, n):
        A[i, i] = 1.0
        A[i, i - 1] = -1.0
    if lo.kind == OUTFLOW:
        A[0, 0] = 2.0
    if hi.kind == OUTFLOW:
        A[n, n - 1] = -2.0
    return (A / h).tocsr()


def _div_1d(periodic, n, h):
    """Face-to-cell difference matrix (all faces) for one axis."""
    if periodic:
        A = sp.lil_matrix((n, n))
        for i in range(n):
            A[i, (i + 1) % n] += 1.0
            A[i, i] -= 1.0
        return (A / h).tocsr()
    A = sp.lil_matrix((n, n + 1))
    for i in range(n):
        A[i, i + 1] = 1.0
        A[i, i] = -1.0
    return (A / h).tocsr()


def _unknown_index(shape, sl):
    """Map from flat full-field index to unknown index (-1 for prescribed faces)."""
    idx = -np.ones(shape, dtype=np.int64)
    sub = idx[sl]
    idx[sl] = np.arange(sub.size).reshape(sub.shape)
    return idx.ravel()


def assemble(problem: StokesProblem):
    """Return ``(A, b, layout)`` for the saddle-point system."""
    g, bcs, mu = problem.grid, problem.bcs, problem.mu
    nx, ny = g.nx, g.ny
    sl = {c: mesh.unknown_slices(g, bcs, c) for c in ("u", "v")}
    shapes = {"u": g.u_shape, "v": g.v_shape}
    axes = {c: bcs.axis_codes(c) for c in ("u", "v")}
    sub = {c: tuple(len(range(*s.indices(n))) for s, n in zip(sl[c], shapes[c])) for c in ("u", "v")}
    nu = int(np.prod(sub["u"]))
    nv = int(np.prod(sub["v"]))
    npr = nx * ny
    M = len(problem.positions)

    Lu = mu * dense_operator_2d(axes["u"], (nx, ny), (g.dx, g.dy))
    Lv = mu * dense_operator_2d(axes["v"], (nx, ny), (g.dx, g.dy))

    gx1 = _grad_1d(bcs.left, bcs.right, nx, g.dx)[sl["u"][0]]
    gy1 = _grad_1d(bcs.bottom, bcs.top, ny, g.dy)[sl["v"][1]]
    Gx = sp.kron(gx1, sp.identity(ny)).tocsr()
    Gy = sp.kron(sp.identity(nx), gy1).tocsr()

    dx1 = _div_1d(g.periodic[0], nx, g.dx)
    dy1 = _div_1d(g.periodic[1], ny, g.dy)
    Dx_full = sp.kron(dx1, sp.identity(ny)).tocsc()
    Dy_full = sp.kron(sp.identity(nx), dy1).tocsc()
    uidx = _unknown_index(shapes["u"], sl["u"])
    vidx = _unknown_index(shapes["v"], sl["v"])
    Dx = Dx_full[:, np.flatnonzero(uidx >= 0)]
    Dy = Dy_full[:, np.flatnonzero(vidx >= 0)]

    # boundary data moved to the right-hand side
    ub = g.zeros_u()
    vb = g.zeros_v()
    mesh.apply_velocity_bc(ub, vb, g, bcs, 0.0)
    rhs_u = -mu * mesh.laplacian_u(ub, g, bcs, 0.0)[sl["u"]].ravel()
    rhs_v = -mu * mesh.laplacian_v(vb, g, bcs, 0.0)[sl["v"]].ravel()
    ub_known = np.where(uidx < 0, ub.ravel(), 0.0)
    vb_known = np.where(vidx < 0, vb.ravel(), 0.0)
    rhs_p = Dx_full @ ub_known + Dy_full @ vb_known

    coup = Coupling(g, problem.positions, get_kernel(problem.kernel))
    blocks_J = []
    blocks_S = []
    for k, (comp, idx, n_unk) in enumerate((("u", uidx, nu), ("v", vidx, nv))):
        flat, wts, _ = coup._stencils[comp]
        rows = np.repeat(np.arange(M), flat.shape[1])
        cols = idx[flat.ravel()]
        if np.any(cols[wts.ravel() != 0] < 0):
            raise ConfigurationError("marker stencil reaches a prescribed boundary face", keys=["markers"])
        keep = cols >= 0
        Jc = sp.csr_matrix((wts.ravel()[keep], (rows[keep], cols[keep])), shape=(M, n_unk))
        Sc = (Jc.T @ sp.diags(problem.ds)).tocsr() / (g.dx * g.dy)
        blocks_J.append(Jc)
        blocks_S.append(Sc)

    rows = [
        [Lu, None, -Gx, blocks_S[0], None],
        [None, Lv, -Gy, None, blocks_S[1]],
        [-Dx, -Dy, None, None, None],
        [blocks_J[0], None, None, None, None],
        [None, blocks_J[1], None, None, None],
    ]
    b = [rhs_u, rhs_v, rhs_p, problem.U_b[:, 0], problem.U_b[:, 1]]
    # without an outflow side the pressure is defined up to a constant
    gauge = all(s.kind != OUTFLOW for s in (bcs.left, bcs.right, bcs.bottom, bcs.top))
    if gauge:
        ones = sp.csr_matrix(np.ones((npr, 1)))
        for k, row in enumerate(rows):
            row.append(ones if k == 2 else None)
        rows.append([None, None, ones.T, None, None, sp.csr_matrix((1, 1))])
        b.append([0.0])
    A = sp.bmat(rows, format="csc")
    b = np.concatenate(b)
    layout = dict(nu=nu, nv=nv, np=npr, M=M, sl=sl, sub=sub, ub=ub, vb=vb, gauge=gauge,
                  blocks=dict(Lu=Lu, Lv=Lv, Gx=Gx, Gy=Gy, Dx=Dx, Dy=Dy, S=blocks_S, J=blocks_J))
    return A, b, layout


def solve_constrained_stokes(problem: StokesProblem, tol=1e-8) -> StokesSolution:
    """Solve the constrained Stokes system; residuals are checked against ``tol``."""
    A, b, L = assemble(problem)
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A, b)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise ConfigurationError(f"singular Stokes system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("singular Stokes system (non-finite solution)")
    nu, nv, npr, M = L["nu"], L["nv"], L["np"], L["M"]
    o = np.cumsum([0, nu, nv, npr, M, M])
    xu, xv, xp = x[o[0]:o[1]], x[o[1]:o[2]], x[o[2]:o[3]]
    F = np.stack([x[o[3]:o[4]], x[o[4]:o[5]]], axis=1)
    lam = float(x[o[5]]) if L["gauge"] else 0.0

    r = A @ x - b
    scale = max(np.abs(b).max(), 1e-300)
    res = {
        "momentum": float(np.abs(r[: nu + nv]).max()) / max(scale, 1e-300),
        "continuity": float(np.abs(r[nu + nv: nu + nv + npr]).max()) / scale,
        "constraint": float(np.abs(r[nu + nv + npr: nu + nv + npr + 2 * M]).max()) / scale,
        "pressure_gauge": abs(float(r[-1])) if L["gauge"] else 0.0,
        "compatibility": abs(lam),
    }
    if max(res["momentum"], res["continuity"], res["constraint"]) > tol:
        raise NumericalFailure("Stokes residual above tolerance", residuals=list(res.values()))

    g = problem.grid
    u = L["ub"].copy()
    v = L["vb"].copy()
    u[L["sl"]["u"]] = xu.reshape(L["sub"]["u"])
    v[L["sl"]["v"]] = xv.reshape(L["sub"]["v"])
    p = xp.reshape(g.nx, g.ny)
    return StokesSolution(u, v, p, F, res)
