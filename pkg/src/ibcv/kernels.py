"""Regularized delta kernels and the spread / interpolate operators.

Both operators share one precomputed stencil per marker and per velocity
component, so spreading with weights ``ds`` is the exact adjoint of
interpolation under the volume-weighted inner products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, GeometryError
from .mesh import GridSpec


def _peskin4(r):
    a = np.abs(r)
    inner = (3.0 - 2.0 * a + np.sqrt(np.clip(1.0 + 4.0 * a - 4.0 * a * a, 0.0, None))) / 8.0
    outer = (5.0 - 2.0 * a - np.sqrt(np.clip(-7.0 + 12.0 * a - 4.0 * a * a, 0.0, None))) / 8.0
    return np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def _roma3(r):
    a = np.abs(r)
    inner = (1.0 + np.sqrt(np.clip(1.0 - 3.0 * a * a, 0.0, None))) / 3.0
    outer = (5.0 - 3.0 * a - np.sqrt(np.clip(1.0 - 3.0 * (1.0 - a) ** 2, 0.0, None))) / 6.0
    return np.where(a <= 0.5, inner, np.where(a < 1.5, outer, 0.0))


@dataclass(frozen=True)
class DeltaKernel:
    name: str
    support: float
    phi: Callable

    @property
    def width(self) -> int:
        return int(np.ceil(2.0 * self.support))


PESKIN4 = DeltaKernel("peskin4", 2.0, _peskin4)
ROMA3 = DeltaKernel("roma3", 1.5, _roma3)
KERNELS = {k.name: k for k in (PESKIN4, ROMA3)}


def get_kernel(name) -> DeltaKernel:
    if isinstance(name, DeltaKernel):
        return name
    try:
        return KERNELS[name]
    except KeyError:
        raise ConfigurationError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}", keys=["kernel"]) from None


def kernel_weight(kernel, r):
    """One-dimensional kernel weight phi(r) for scaled offset r."""
    return get_kernel(kernel).phi(np.asarray(r, dtype=float))


@dataclass
class MarkerSet:
    positions: np.ndarray
    weights: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.positions.shape[1] != 2 or self.positions.shape[0] != self.weights.size:
            raise ConfigurationError("marker positions must be (M, 2) with one weight per marker")
        if np.any(self.weights <= 0):
            raise ConfigurationError("marker weights must be positive")
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float).reshape(self.positions.shape)


def _axis_stencil(coord, origin, h, offset, count, length, periodic, kernel):
    q = (coord - origin) / h - offset
    start = np.floor(q - kernel.support).astype(np.int64) + 1
    idx = start[:, None] + np.arange(kernel.width)[None, :]
    w = kernel.phi(q[:, None] - idx)
    if periodic:
        idx = np.mod(idx, count)
    else:
        bad = (idx < 0) | (idx >= count)
        if bad.any():
            w = np.where(bad, 0.0, w)
            total = w.sum(axis=1, keepdims=True)
            w = w / total
            idx = np.clip(idx, 0, count - 1)
    return idx, w


class Coupling:
    """Spread/interpolation stencils for a fixed set of marker positions."""

    def __init__(self, g: GridSpec, positions, kernel=PESKIN4):
        self.g = g
        self.kernel = get_kernel(kernel)
        X = np.array(positions, dtype=float, copy=True).reshape(-1, 2)
        lo = np.array(g.origin)
        ext = np.array(g.extents)
        for ax in range(2):
            if g.periodic[ax]:
                X[:, ax] = lo[ax] + np.mod(X[:, ax] - lo[ax], ext[ax])
            elif X.size and (X[:, ax].min() < lo[ax] or X[:, ax].max() > lo[ax] + ext[ax]):
                raise GeometryError("marker lies outside the non-periodic domain")
        self.positions = X
        self.M = X.shape[0]
        self._stencils = {}
        for comp, shape in (("u", g.u_shape), ("v", g.v_shape)):
            xoff = 0.0 if comp == "u" else 0.5
            yoff = 0.5 if comp == "u" else 0.0
            ix, wx = _axis_stencil(X[:, 0], g.origin[0], g.dx, xoff, shape[0], g.extents[0], g.periodic[0], self.kernel)
            iy, wy = _axis_stencil(X[:, 1], g.origin[1], g.dy, yoff, shape[1], g.extents[1], g.periodic[1], self.kernel)
            flat = (ix[:, :, None] * shape[1] + iy[:, None, :]).reshape(self.M, -1)
            wts = (wx[:, :, None] * wy[:, None, :]).reshape(self.M, -1)
            self._stencils[comp] = (flat, wts, shape)

    def interpolate(self, u, v):
        """Marker velocities ``J u``; returns an ``(M, 2)`` array."""
        out = np.empty((self.M, 2))
        for k, (comp, field) in enumerate((("u", u), ("v", v))):
            flat, wts, shape = self._stencils[comp]
            if field.shape != shape:
                raise ConfigurationError(f"{comp} has shape {field.shape}, expected {shape}")
            out[:, k] = np.sum(field.ravel()[flat] * wts, axis=1)
        return out

    def spread(self, F, ds):
        """Eulerian force density ``S F`` from marker densities ``F`` and volumes ``ds``."""
        F = np.asarray(F, dtype=float).reshape(self.M, 2)
        ds = np.broadcast_to(np.asarray(ds, dtype=float), (self.M,))
        inv_cell = 1.0 / (self.g.dx * self.g.dy)
        res = []
        for k, comp in enumerate(("u", "v")):
            flat, wts, shape = self._stencils[comp]
            contrib = (wts * (F[:, k] * ds)[:, None]).ravel()
            size = shape[0] * shape[1]
            res.append(np.bincount(flat.ravel(), weights=contrib, minlength=size).reshape(shape) * inv_cell)
        return res[0], res[1]


def spread(markers: MarkerSet, g: GridSpec, kernel=PESKIN4):
    """Spread marker force densities (``markers.values``) onto face fields."""
    if markers.values is None:
        raise ConfigurationError("markers carry no values to spread")
    return Coupling(g, markers.positions, kernel).spread(markers.values, markers.weights)


def interpolate(u, v, positions, g: GridSpec, kernel=PESKIN4):
    """Interpolate face velocities to marker positions."""
    return Coupling(g, positions, kernel).interpolate(u, v)
