import numpy as np
import pytest
from hypothesis import strategies as st

from ibcv.mesh import DIRICHLET, OUTFLOW, PERIODIC, BoundarySpec, Side, make_grid

BC_KINDS = (DIRICHLET, OUTFLOW)


def boundary_from_kinds(kx, ky, lo_x=None, hi_x=None, lo_y=None, hi_y=None):
    """Boundary spec from per-axis kinds; ``periodic`` on an axis pairs both sides."""
    def side(kind, vel):
        return Side(kind, vel if vel is not None else (0.0, 0.0))

    if kx == PERIODIC:
        left = right = Side(PERIODIC)
    else:
        left, right = side(kx[0], lo_x), side(kx[1], hi_x)
    if ky == PERIODIC:
        bottom = top = Side(PERIODIC)
    else:
        bottom, top = side(ky[0], lo_y), side(ky[1], hi_y)
    return BoundarySpec(left, right, bottom, top)


axis_kinds = st.one_of(
    st.just(PERIODIC),
    st.tuples(st.sampled_from(BC_KINDS), st.sampled_from(BC_KINDS)),
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def periodic_grid():
    return make_grid((0.0, 0.0), (2 * np.pi, 2 * np.pi), 32, 32, (True, True))


ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store ``(passed, detail)`` for an acceptance criterion number."""
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
