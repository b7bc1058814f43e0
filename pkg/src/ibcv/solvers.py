"""Fast separable solvers for ``(alpha - beta * L) x = b`` on the MAC grid.

``L`` is the standard five-point Laplacian restricted to the unknowns of one
staggered component, with homogeneous boundary conditions; inhomogeneous
boundary data is moved to the right-hand side by the caller.  Each axis is
described by ``((lo, hi), stagger)`` with codes ``"P"``, ``"D"``, ``"N"`` and
stagger ``"cell"`` or ``"node"`` (see :meth:`BoundarySpec.axis_codes`).

Every non-periodic combination is diagonalised by one of the real
trigonometric transforms; periodic axes use the FFT.  The same
``operator_1d`` matrices used to check the transforms are reused to assemble
the sparse Stokes system.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .errors import ConfigurationError

# (codes, stagger) -> (transform family, type, frequency rule)
_TABLE = {
    (("D", "D"), "cell"): ("dst", 3, "int1"),
    (("N", "N"), "cell"): ("dct", 3, "int0"),
    (("D", "N"), "cell"): ("dst", 4, "half"),
    (("N", "D"), "cell"): ("dct", 4, "half"),
    (("D", "D"), "node"): ("dst", 1, "int1"),
    (("N", "N"), "node"): ("dct", 1, "int0"),
    (("D", "N"), "node"): ("dst", 2, "half"),
    (("N", "D"), "node"): ("dct", 2, "half"),
}


def n_unknowns(codes, stagger, n):
    """Number of unknowns along an axis with ``n`` cells."""
    if codes[0] == "P":
        return n
    if stagger == "cell":
        return n
    return n - 1 + (codes[0] == "N") + (codes[1] == "N")


def eigenvalues_1d(codes, stagger, n, h):
    """Eigenvalues of the 1D operator in transform order."""
    if codes[0] == "P":
        theta = 2.0 * np.pi * np.arange(n) / n
    else:
        kind, _, rule = _TABLE[(tuple(codes), stagger)]
        m = n_unknowns(codes, stagger, n)
        k = np.arange(m, dtype=float)
        if rule == "int1":
            theta = np.pi * (k + 1) / n
        elif rule == "int0":
            theta = np.pi * k / n
        else:
            theta = np.pi * (2 * k + 1) / (2 * n)
    return -4.0 / h**2 * np.sin(theta / 2.0) ** 2


def operator_1d(codes, stagger, n, h):
    """Sparse 1D second-difference matrix on the unknowns (homogeneous BCs)."""
    codes = tuple(codes)
    m = n_unknowns(codes, stagger, n)
    main = -2.0 * np.ones(m)
    off = np.ones(m - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], shape=(m, m), format="lil")
    if codes[0] == "P":
        A[0, m - 1] += 1.0
        A[m - 1, 0] += 1.0
    elif stagger == "cell":
        # ghost = +x0 (Neumann) or -x0 (Dirichlet at the half-cell wall)
        A[0, 0] += 1.0 if codes[0] == "N" else -1.0
        A[m - 1, m - 1] += 1.0 if codes[1] == "N" else -1.0
    else:
        # Neumann node: mirror ghost x_{-1} = x_1
        if codes[0] == "N":
            A[0, 1] += 1.0
        if codes[1] == "N":
            A[m - 1, m - 2] += 1.0
    return (A / h**2).tocsr()


def _validate_axis(spec):
    codes, stagger = spec
    codes = tuple(codes)
    if stagger not in ("cell", "node"):
        raise ConfigurationError(f"unknown stagger {stagger!r}")
    if codes[0] == "P" or codes[1] == "P":
        if codes != ("P", "P"):
            raise ConfigurationError("periodic codes must be paired")
        return codes, stagger
    if codes not in (("D", "D"), ("N", "N"), ("D", "N"), ("N", "D")):
        raise ConfigurationError(f"unsupported boundary codes {codes}")
    return codes, stagger


class SeparableSolver:
    """Reusable solver for one component, grid and pair ``(alpha, beta)``."""

    def __init__(self, axes, ns, hs, alpha, beta):
        self.axes = [_validate_axis(a) for a in axes]
        self.ns = tuple(int(n) for n in ns)
        self.hs = tuple(float(h) for h in hs)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.shape = tuple(n_unknowns(c, s, n) for (c, s), n in zip(self.axes, self.ns))
        self.periodic = [c[0] == "P" for c, _ in self.axes]
        lams = []
        for ax, ((codes, stagger), n, h) in enumerate(zip(self.axes, self.ns, self.hs)):
            lam = eigenvalues_1d(codes, stagger, n, h)
            if self.periodic[ax] and ax == self._last_periodic():
                lam = lam[: n // 2 + 1]
            lams.append(lam)
        denom = self.alpha - self.beta * (lams[0][:, None] + lams[1][None, :])
        scale = max(abs(self.alpha), abs(self.beta) * max(4.0 / h**2 for h in self.hs))
        null = np.abs(denom) <= 1e-12 * scale
        if null.sum() > 1:
            raise ConfigurationError("operator has a nullspace larger than the constant mode")
        self._null = null
        with np.errstate(divide="ignore"):
            self._inv = np.where(null, 0.0, 1.0 / np.where(null, 1.0, denom))
        self.singular = bool(null.any())

    def _last_periodic(self):
        idx = [i for i, p in enumerate(self.periodic) if p]
        return idx[-1] if idx else None

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape != self.shape:
            raise ConfigurationError(f"rhs shape {b.shape} != {self.shape}")
        x = b
        for ax, (codes, stagger) in enumerate(self.axes):
            if self.periodic[ax]:
                continue
            kind, typ, _ = _TABLE[(codes, stagger)]
            inv = sfft.idst if kind == "dst" else sfft.idct
            x = inv(x, type=typ, axis=ax)
        paxes = [ax for ax in range(2) if self.periodic[ax]]
        if paxes:
            x = sfft.rfftn(x, axes=paxes)
        x = x * self._inv
        if paxes:
            x = sfft.irfftn(x, s=[self.shape[a] for a in paxes], axes=paxes)
        for ax, (codes, stagger) in enumerate(self.axes):
            if self.periodic[ax]:
                continue
            kind, typ, _ = _TABLE[(codes, stagger)]
            fwd = sfft.dst if kind == "dst" else sfft.dct
            x = fwd(x, type=typ, axis=ax)
        return np.ascontiguousarray(x)


def dense_operator_2d(axes, ns, hs):
    """Sparse 2D Laplacian on the unknowns, row-major (C order) flattening."""
    A = [operator_1d(c, s, n, h) for (c, s), n, h in zip(axes, ns, hs)]
    Ix = sp.identity(A[0].shape[0], format="csr")
    Iy = sp.identity(A[1].shape[0], format="csr")
    return (sp.kron(A[0], Iy) + sp.kron(Ix, A[1])).tocsr()
