from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibcv import ConfigurationError, GeometryError, StateError
from ibcv.cv_forces import (
    BodySnapshot,
    ControlVolume,
    CVPolicy,
    ForceTorqueRecord,
    Normalization,
    coefficients,
    cv_angular_momentum,
    cv_momentum,
    domain_momentum,
    force_modified,
    force_noca,
    lm_force,
    move_cv,
    snap_cv,
    stokes_lm_force,
    surface_flux,
)
from ibcv.mesh import make_grid
from ibcv.navier import FlowState, LMRecord


GRID = make_grid((-2.0, -1.0), (4.0, 2.0), 40, 20, (True, True))


@pytest.fixture
def grid():
    return GRID


def fields(g, rng):
    return rng.standard_normal(g.u_shape), rng.standard_normal(g.v_shape), rng.standard_normal(g.cell_shape)


def flux_sum(u, v, p, cv, g, x0=(0.0, 0.0), u_S=(0.0, 0.0)):
    f = surface_flux(u, v, p, cv, g, 1.3, 0.07, x0, u_S)
    return np.array([f[k] for k in ("pressure", "momentum_flux", "viscous", "surface_velocity")])


def test_snap_is_outward(grid):
    cv = snap_cv((-0.52, -0.31), (0.52, 0.31), grid)
    xL, yL, xU, yU = cv.bounds(grid)
    assert xL <= -0.52 and yL <= -0.31 and xU >= 0.52 and yU >= 0.31
    assert (xL, xU) == pytest.approx((-0.6, 0.6))
    # values already on faces are kept
    assert snap_cv((-0.5, -0.3), (0.5, 0.3), grid).bounds(grid) == pytest.approx((-0.5, -0.3, 0.5, 0.3))
    with pytest.raises(GeometryError):
        ControlVolume(3, 3, 3, 5)


def test_cv_near_wall_rejected():
    g = make_grid((0, 0), (1, 1), 10, 10)
    with pytest.raises(GeometryError):
        snap_cv((-0.1, 0.2), (0.5, 0.5), g)
    cv = snap_cv((0.0, 0.2), (0.5, 0.5), g)
    u, v, p = g.zeros_u(), g.zeros_v(), g.zeros_p()
    # the viscous stencil needs one layer outside the box
    with pytest.raises(GeometryError):
        surface_flux(u, v, p, cv, g, 1.0, 1.0)


def test_linear_pressure_gives_buoyancy_like_force(grid):
    xc, yc = grid.cell_coords()
    p = 0.7 * xc - 1.9 * yc
    cv = ControlVolume(5, 4, 17, 13)
    f = surface_flux(grid.zeros_u(), grid.zeros_v(), p, cv, grid, 1.0, 1.0)["pressure"]
    V = cv.volume(grid)
    np.testing.assert_allclose(f[:2], [-0.7 * V, 1.9 * V], atol=1e-12)


def test_uniform_flow_and_rigid_rotation(grid):
    cv = ControlVolume(10, 5, 30, 15)
    u = np.full(grid.u_shape, 1.5)
    v = np.full(grid.v_shape, -0.5)
    p = np.full(grid.cell_shape, 4.0)
    f = surface_flux(u, v, p, cv, grid, 1.0, 0.3, u_S=(0.2, 0.1))
    for k in ("pressure", "momentum_flux", "viscous", "surface_velocity"):
        np.testing.assert_allclose(f[k][:2], 0.0, atol=1e-12)
    # rigid rotation carries no viscous stress
    xu, yu = grid.u_coords()
    xv, yv = grid.v_coords()
    f = surface_flux(-yu, xv, p, cv, grid, 1.0, 0.3)
    np.testing.assert_allclose(f["viscous"], 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**16),
    i0=st.integers(2, 10),
    cut=st.integers(11, 20),
    i1=st.integers(21, 36),
    j0=st.integers(2, 6),
    j1=st.integers(8, 17),
)
def test_fluxes_and_momenta_are_additive(seed, i0, cut, i1, j0, j1):
    grid = GRID
    rng = np.random.default_rng(seed)
    u, v, p = fields(grid, rng)
    a, b, ab = ControlVolume(i0, j0, cut, j1), ControlVolume(cut, j0, i1, j1), ControlVolume(i0, j0, i1, j1)
    x0 = (0.3, -0.2)
    np.testing.assert_allclose(flux_sum(u, v, p, a, grid, x0) + flux_sum(u, v, p, b, grid, x0), flux_sum(u, v, p, ab, grid, x0), atol=1e-10)
    np.testing.assert_allclose(cv_momentum(u, v, a, grid, 2.0) + cv_momentum(u, v, b, grid, 2.0), cv_momentum(u, v, ab, grid, 2.0), atol=1e-12)
    A = cv_angular_momentum(u, v, a, grid, 2.0, x0) + cv_angular_momentum(u, v, b, grid, 2.0, x0)
    assert A == pytest.approx(cv_angular_momentum(u, v, ab, grid, 2.0, x0), abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_whole_periodic_box_has_no_net_flux(seed):
    grid = GRID
    u, v, p = fields(grid, np.random.default_rng(seed))
    cv = ControlVolume(0, 0, grid.nx, grid.ny)
    f = flux_sum(u, v, p, cv, grid)
    np.testing.assert_allclose(f[:, :2], 0.0, atol=1e-10)
    P, _ = domain_momentum(u, v, grid, 1.0)
    np.testing.assert_allclose(cv_momentum(u, v, cv, grid, 1.0), P, atol=1e-10)


def test_domain_momentum_of_uniform_flow():
    g = make_grid((0, 0), (2, 1), 8, 4)
    P, L = domain_momentum(np.ones(g.u_shape), g.zeros_v(), g, 3.0, x0=(1.0, 0.5))
    np.testing.assert_allclose(P, [3.0 * 2.0, 0.0])
    assert L == pytest.approx(0.0, abs=1e-12)


def _state(u, v, p, t):
    return FlowState(u, v, p, t)


def test_modified_estimator_on_steady_uniform_flow(grid):
    u = np.ones(grid.u_shape)
    v = grid.zeros_v()
    p = grid.zeros_p()
    cv = ControlVolume(5, 5, 15, 15)
    rec = force_modified(_state(u, v, p, 0.0), _state(u, v, p, 0.1), cv, None, None, grid, 1.0, 0.01, 0.1, (0, 0))
    np.testing.assert_allclose(rec.force, 0.0, atol=1e-12)
    assert rec.method == "cv" and rec.cv == cv.indices


def test_unsteady_uniform_flow_force(grid):
    # uniform acceleration a in a CV: force equals -rho V a
    v = grid.zeros_v()
    p = grid.zeros_p()
    cv = ControlVolume(5, 5, 15, 15)
    s0 = _state(np.ones(grid.u_shape), v, p, 0.0)
    s1 = _state(np.full(grid.u_shape, 1.2), v, p, 0.1)
    rec = force_modified(s0, s1, cv, None, None, grid, 2.0, 0.01, 0.1, (0, 0))
    assert rec.force[0] == pytest.approx(-2.0 * cv.volume(grid) * 2.0, rel=1e-12)
    noca = force_noca(s0, s1, cv, cv, None, None, grid, 2.0, 0.01, 0.1, (0, 0))
    np.testing.assert_allclose(noca.force, rec.force, atol=1e-12)


def test_noca_equals_modified_when_cv_is_fixed(grid, rng):
    u0, v0, p0 = fields(grid, rng)
    u1, v1, p1 = fields(grid, rng)
    cv = ControlVolume(8, 4, 30, 16)
    s0, s1 = _state(u0, v0, p0, 0.0), _state(u1, v1, p1, 0.05)
    a = force_modified(s0, s1, cv, None, None, grid, 1.0, 0.02, 0.05, (0.1, 0.1))
    b = force_noca(s0, s1, cv, cv, None, None, grid, 1.0, 0.02, 0.05, (0.1, 0.1))
    np.testing.assert_allclose(b.force, a.force, atol=1e-10)
    assert b.torque == pytest.approx(a.torque, abs=1e-10)


def test_body_term_and_lm(grid):
    ds = np.full(4, 0.25)
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    s0 = BodySnapshot(X, np.zeros((4, 2)), ds, np.zeros(2))
    s1 = BodySnapshot(X, np.tile([0.5, 0.0], (4, 1)), ds, np.zeros(2))
    F = np.tile([2.0, -1.0], (4, 1))
    rec = LMRecord("b", F, np.zeros((4, 2)), X, ds, np.zeros((4, 2)), 0.0)
    out = lm_force(rec, s0, s1, 1.0, 0.1, (0, 0), 0.1, "b")
    np.testing.assert_allclose(out.breakdown["body"][:2], [0.5 / 0.1, 0.0])
    np.testing.assert_allclose(out.breakdown["lagrange"][:2], [-2.0, 1.0])
    np.testing.assert_allclose(out.force, [3.0, 1.0])
    assert out.torque == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(StateError):
        lm_force(None, s0, s1, 1.0, 0.1, (0, 0), 0.1)


def test_stokes_lm_torque():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    F = np.array([[0.0, 1.0], [0.0, -1.0]])
    rec = stokes_lm_force(F, X, np.ones(2))
    np.testing.assert_allclose(rec.force, 0.0)
    assert rec.torque == pytest.approx(-2.0)


def test_coefficients():
    rec = ForceTorqueRecord(0.0, "b", "cv", {"pressure": np.array([1.0, 2.0, 3.0])})
    cd, cl, ct = coefficients(rec, Normalization(2.0, 1.0, 0.5))
    assert (cd, cl, ct) == pytest.approx((2.0, 4.0, 12.0))
    with pytest.raises(ConfigurationError):
        Normalization(1.0, 0.0, 1.0)


def _body(x, y, half=0.2):
    X0 = np.array([x, y])
    return SimpleNamespace(X0=X0, bounding_box=lambda: (X0 - half, X0 + half))


def test_follow_policy(grid):
    cv = snap_cv((-0.6, -0.6), (0.6, 0.6), grid)
    pol = CVPolicy("follow", margin=2)
    new, moved, _ = move_cv(cv, _body(0.0, 0.0), pol, grid)
    assert new == cv and not moved
    new, moved, _ = move_cv(cv, _body(0.15, 0.0), pol, grid)
    assert not moved
    # body box at 0.45: within 2 cells (0.2) of the side at 0.6
    new, moved, (di, dj) = move_cv(cv, _body(0.25, 0.0), pol, grid)
    assert moved and (di, dj) == (2, 0)
    xL, _, xU, _ = new.bounds(grid)
    assert (xL + xU) / 2 == pytest.approx(0.2)


def test_track_policy(grid):
    cv = snap_cv((-0.6, -0.6), (0.6, 0.6), grid)
    pol = CVPolicy("track")
    move_cv(cv, _body(0.0, 0.0), pol, grid)
    new, moved, _ = move_cv(cv, _body(0.04, 0.0), pol, grid)
    assert not moved
    new, moved, d = move_cv(cv, _body(0.06, -0.16), pol, grid)
    assert moved and d == (1, -2)


def test_center_policy(grid):
    cv = snap_cv((-0.5, -0.5), (0.5, 0.5), grid)
    pol = CVPolicy("center", half_width=(0.5, 0.5))
    new, moved, d = move_cv(cv, _body(0.33, 0.0), pol, grid)
    assert moved and d == (3, 0)
    assert new.bounds(grid) == pytest.approx((-0.2, -0.5, 0.9, 0.5))
    with pytest.raises(ConfigurationError):
        CVPolicy("center")
    with pytest.raises(ConfigurationError):
        CVPolicy("wobble")


def test_center_policy_slides_off_walls():
    g = make_grid((0, 0), (2, 1), 20, 10)
    cv = snap_cv((0.7, 0.2), (1.3, 0.8), g)
    pol = CVPolicy("center", half_width=(0.3, 0.3))
    new, moved, d = move_cv(cv, _body(1.8, 0.5, half=0.1), pol, g)
    # the box keeps its size and stops one cell short of the wall
    assert moved and d == (6, 0)
    assert new.bounds(g) == pytest.approx((1.3, 0.2, 1.9, 0.8))
    with pytest.raises(GeometryError):
        move_cv(cv, _body(1.8, 0.5, half=0.15), pol, g)


def test_stationary_policy(grid):
    cv = ControlVolume(1, 1, 5, 5)
    assert move_cv(cv, _body(1.0, 0.0), CVPolicy(), grid) == (cv, False, (0, 0))
