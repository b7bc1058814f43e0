import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibcv import ConfigurationError, GeometryError
from ibcv.kernels import KERNELS, Coupling, MarkerSet, get_kernel, interpolate, kernel_weight, spread
from ibcv.mesh import make_grid

shift = st.floats(-3.0, 3.0, allow_nan=False)


@pytest.mark.parametrize("name", sorted(KERNELS))
@settings(max_examples=30, deadline=None)
@given(r=shift)
def test_moment_conditions(name, r):
    k = np.arange(-6, 7)
    w = kernel_weight(name, r - k)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.sum((r - k) * w) == pytest.approx(0.0, abs=1e-12)
    # even/odd split holds for the four-point kernel only
    if name == "peskin4":
        assert w[k % 2 == 0].sum() == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("name,sq", [("peskin4", 3.0 / 8.0), ("roma3", 0.5)])
@settings(max_examples=20, deadline=None)
@given(r=shift)
def test_sum_of_squares(name, sq, r):
    k = np.arange(-6, 7)
    assert np.sum(kernel_weight(name, r - k) ** 2) == pytest.approx(sq, abs=1e-12)


def test_kernel_values_and_support():
    assert kernel_weight("peskin4", 0.0) == pytest.approx(0.5)
    assert kernel_weight("peskin4", 2.0) == 0.0
    assert kernel_weight("roma3", 0.0) == pytest.approx(2.0 / 3.0)
    assert kernel_weight("roma3", 1.5) == pytest.approx(0.0)
    assert get_kernel("peskin4").width == 4 and get_kernel("roma3").width == 3
    with pytest.raises(ConfigurationError):
        get_kernel("cosine")


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**16),
    periodic=st.tuples(st.booleans(), st.booleans()),
    kernel=st.sampled_from(sorted(KERNELS)),
)
def test_spread_is_adjoint_of_interpolation(seed, periodic, kernel):
    rng = np.random.default_rng(seed)
    g = make_grid((-1.0, 0.0), (2.0, 1.5), 16, 12, periodic)
    # markers anywhere, including within a support width of a wall
    X = np.column_stack([rng.uniform(-1, 1, 7), rng.uniform(0, 1.5, 7)])
    F = rng.standard_normal((7, 2))
    ds = rng.uniform(0.1, 1.0, 7)
    u = rng.standard_normal(g.u_shape)
    v = rng.standard_normal(g.v_shape)
    c = Coupling(g, X, kernel)
    fu, fv = c.spread(F, ds)
    lhs = np.sum(c.interpolate(u, v) * F * ds[:, None])
    rhs = (np.sum(fu * u) + np.sum(fv * v)) * g.dx * g.dy
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), periodic=st.tuples(st.booleans(), st.booleans()))
def test_total_force_conserved_and_constants_reproduced(seed, periodic):
    rng = np.random.default_rng(seed)
    g = make_grid((0.0, 0.0), (1.0, 1.0), 16, 16, periodic)
    X = rng.uniform(0.0, 1.0, (5, 2))
    F = rng.standard_normal((5, 2))
    ds = rng.uniform(0.1, 1.0, 5)
    fu, fv = spread(MarkerSet(X, ds, F), g)
    np.testing.assert_allclose([fu.sum() * g.dx * g.dy, fv.sum() * g.dx * g.dy], (F * ds[:, None]).sum(0), atol=1e-12)
    U = interpolate(np.full(g.u_shape, 2.5), np.full(g.v_shape, -1.0), X, g)
    np.testing.assert_allclose(U, np.tile([2.5, -1.0], (5, 1)), atol=1e-12)


def test_interpolates_linear_field_exactly_in_interior():
    g = make_grid((0.0, 0.0), (1.0, 1.0), 32, 32)
    xu, yu = g.u_coords()
    xv, yv = g.v_coords()
    X = np.array([[0.41, 0.37], [0.55, 0.6]])
    U = interpolate(3 * xu - yu, xv + 2 * yv, X, g)
    np.testing.assert_allclose(U[:, 0], 3 * X[:, 0] - X[:, 1], atol=1e-12)
    np.testing.assert_allclose(U[:, 1], X[:, 0] + 2 * X[:, 1], atol=1e-12)


def test_periodic_wrap_matches_shifted_marker():
    g = make_grid((0.0, 0.0), (1.0, 1.0), 16, 16, (True, True))
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal(g.u_shape), rng.standard_normal(g.v_shape)
    a = interpolate(u, v, [[0.02, 0.5]], g)
    b = interpolate(u, v, [[1.02, 0.5]], g)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_errors():
    g = make_grid((0.0, 0.0), (1.0, 1.0), 8, 8)
    with pytest.raises(GeometryError):
        Coupling(g, [[1.5, 0.5]])
    with pytest.raises(ConfigurationError):
        MarkerSet([[0.5, 0.5]], [0.0])
    with pytest.raises(ConfigurationError):
        spread(MarkerSet([[0.5, 0.5]], [1.0]), g)
    with pytest.raises(ConfigurationError):
        Coupling(g, [[0.5, 0.5]]).interpolate(np.zeros((8, 8)), g.zeros_v())
