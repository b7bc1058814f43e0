"""Desk-scale reproductions of the published benchmarks.

Each test runs one case (shared through module fixtures where criteria use
the same run), computes the criterion metric and records one PASS/FAIL line
printed at the end of the session.  Set ``IBCV_ACCEPTANCE_OUT`` to keep the
run directories.
"""

import math
import os

import numpy as np
import pytest

from ibcv.bodies import CircleSurface, Disc, RigidBody, Stationary, generate_markers
from ibcv.cv_forces import (
    TERMS,
    ControlVolume,
    BodySnapshot,
    force_modified,
    force_noca,
    surface_flux,
)
from ibcv.harness import CaseConfig, builtin_tree, jump_metric, load_forces, load_momentum, relative_linf, run_case, select, smoothness_ratio
from ibcv.kernels import KERNELS, Coupling, kernel_weight
from ibcv.mesh import BoundarySpec, make_grid
from ibcv.navier import FluidParams, NavierStokes

pytestmark = pytest.mark.slow

_RUNS = {}


@pytest.fixture(scope="session")
def out_root(tmp_path_factory):
    root = os.environ.get("IBCV_ACCEPTANCE_OUT")
    if root:
        os.makedirs(root, exist_ok=True)
        return root
    return str(tmp_path_factory.mktemp("acceptance"))


def run(tree, out_root):
    name = tree["name"]
    if name not in _RUNS:
        res = run_case(CaseConfig.from_dict(tree), os.path.join(out_root, name))
        _RUNS[name] = (res, load_forces(res.forces_csv))
    return _RUNS[name]


def window(sub, t0, t1=math.inf):
    keep = (sub["t"] >= t0 - 1e-12) & (sub["t"] <= t1 + 1e-12)
    return {k: v[keep] for k, v in sub.items()}


# --- case trees -------------------------------------------------------------------


def plate_tree():
    t = builtin_tree("translating_plate_re20")
    t["name"] = "acc_plate"
    # dx = b/32 on a 16b x 11b periodic box
    t["grid"] = {"origin": [-8.0, -5.5], "extents": [16.0, 11.0], "cells": [512, 352]}
    return t


def stationary_tree():
    t = builtin_tree("stationary_cylinder_re550")
    t["name"] = "acc_stationary"
    t["grid"]["cells"] = [450, 300]
    return t


def translating_tree():
    t = builtin_tree("translating_cylinder")
    t["name"] = "acc_translating"
    t["grid"]["cells"] = [450, 300]
    return t


def two_cylinder_tree():
    t = builtin_tree("two_cylinders")
    t["name"] = "acc_two_cylinders"
    t["grid"]["cells"] = [450, 300]
    return t


def inline_tree():
    t = builtin_tree("inline_osc")
    t["name"] = "acc_inline"
    return t


def rotational_tree():
    t = builtin_tree("rotational_osc")
    t["name"] = "acc_rotational"
    # dx = 0.04 D on a reduced box; one period with dt = T/2000
    t["grid"] = {"origin": [-8.0, -8.0], "extents": [16.0, 16.0], "cells": [400, 400]}
    t["fluid"]["dt"] = 0.005
    t["duration"]["t_end"] = 10.0
    return t


def eel_tree():
    t = builtin_tree("eel")
    t["name"] = "acc_eel"
    # dx = L/128 and Re = 500 via a larger viscosity
    t["grid"]["cells"] = [1024, 512]
    t["fluid"]["mu"] = 0.785 / 500.0
    t["fluid"]["dt"] = 2e-3
    # the swimmer starts from rest; the last three of eight periods are past the speed-up
    t["duration"]["t_end"] = 8.0
    return t


def dkt_tree():
    t = builtin_tree("dkt", 0.5)
    t["name"] = "acc_dkt"
    t["duration"]["t_end"] = 5.0
    return t


# --- criteria ---------------------------------------------------------------------------


def test_criterion_01_translating_plate(out_root, record_criterion):
    _, tab = run(plate_tree(), out_root)
    cv = select(tab, "plate", "cv", "cv")
    lm = select(tab, "plate", "lm", "cv")
    late_cv, late_lm = window(cv, 8.0, 10.0), window(lm, 8.0, 10.0)
    mean_cv, mean_lm = late_cv["C_D"].mean(), late_lm["C_D"].mean()
    agree = relative_linf(window(cv, 1.0)["C_D"], window(lm, 1.0)["C_D"])
    ok = abs(mean_cv / 2.09 - 1) <= 0.10 and abs(mean_lm / 2.09 - 1) <= 0.10 and agree <= 0.03
    record_criterion(1, ok, f"mean C_D cv={mean_cv:.4f} lm={mean_lm:.4f} (2.09 +-10%), cv/lm Linf={agree:.4f} (<=0.03)")
    assert ok


def test_criterion_02_stationary_cylinder(out_root, record_criterion):
    _, tab = run(stationary_tree(), out_root)
    cv = window(select(tab, "cylinder", "cv", "cv"), 0.5, 5.0)
    lm = window(select(tab, "cylinder", "lm", "cv"), 0.5, 5.0)
    err = relative_linf(cv["C_D"], lm["C_D"])
    s_cv, s_lm = smoothness_ratio(cv["C_D"]), smoothness_ratio(lm["C_D"])
    ok = err < 0.03 and s_cv <= 10 and s_lm <= 10
    record_criterion(2, ok, f"cv/lm Linf={err:.4f} (<0.03), jump/median cv={s_cv:.2f} lm={s_lm:.2f} (<=10)")
    assert ok


def test_criterion_03_translating_cylinder(out_root, record_criterion):
    _, tab = run(translating_tree(), out_root)
    cv = select(tab, "cylinder", "cv", "cv")
    noca = select(tab, "cylinder", "noca", "cv")
    lm = select(tab, "cylinder", "lm", "cv")
    _, _, r_noca = jump_metric(noca["C_D"], noca["cv_moved"])
    _, _, r_cv = jump_metric(cv["C_D"], cv["cv_moved"])
    err = relative_linf(window(cv, 0.5)["C_D"], window(lm, 0.5)["C_D"])
    ok = r_noca >= 5 * r_cv and err <= 0.03
    record_criterion(3, ok, f"jump ratio noca={r_noca:.2f} cv={r_cv:.2f} (noca >= 5x cv), cv/lm Linf={err:.4f} (<=0.03)")
    assert ok


def test_criterion_04_two_cylinders(out_root, record_criterion):
    _, single = run(stationary_tree(), out_root)
    _, tab = run(two_cylinder_tree(), out_root)
    ref = window(select(single, "cylinder", "cv", "cv"), 0.5, 5.0)["C_D"].mean()

    def mean(body, cv):
        return window(select(tab, body, "cv", cv), 0.5, 5.0)["C_D"].mean()

    sep = [mean("bottom", "config1_bottom"), mean("top", "config1_top")]
    half = mean("bottom", "config3_bottom")
    both = mean("bottom", "config4_bottom")
    ok = (all(abs(c / ref - 1) <= 0.10 for c in sep) and abs(half / (1.5 * ref) - 1) <= 0.15
          and abs(both / (2 * ref) - 1) <= 0.15)
    record_criterion(4, ok, f"single={ref:.4f}, separate={sep[0]:.4f},{sep[1]:.4f} (+-10%), "
                            f"1.5 cyl={half / ref:.3f}x (+-15%), 2 cyl={both / ref:.3f}x (+-15%)")
    assert ok


def test_criterion_05_inline_oscillation(out_root, record_criterion):
    _, tab = run(inline_tree(), out_root)
    cv = select(tab, "cylinder", "cv", "cv")
    lm = select(tab, "cylinder", "lm", "cv")
    err = relative_linf(cv["C_D"], lm["C_D"])
    # the body starts impulsively at full speed; the decaying added-mass spike of the first
    # steps is not an oscillation, so smoothness is judged after it as in the cylinder cases
    s_cv = smoothness_ratio(window(cv, 0.5)["C_D"])
    s_all = smoothness_ratio(cv["C_D"])
    ok = err <= 0.03 and s_cv <= 5
    record_criterion(5, ok, f"cv/lm Linf={err:.4f} (<=0.03), jump/median cv t>=0.5={s_cv:.2f} (<=5), "
                            f"incl. impulsive start={s_all:.0f}, t_end={cv['t'][-1]:.3f}")
    assert ok


def test_criterion_06_rotational_oscillation(out_root, record_criterion):
    _, tab = run(rotational_tree(), out_root)
    cv = select(tab, "cylinder", "cv", "cv")
    lm = select(tab, "cylinder", "lm", "cv")
    err = relative_linf(cv["C_T"], lm["C_T"])
    ok = err <= 0.03
    record_criterion(6, ok, f"C_T cv/lm Linf={err:.4f} (<=0.03) over one period")
    assert ok


def test_criterion_07_eel(out_root, record_criterion):
    res, tab = run(eel_tree(), out_root)
    mom = load_momentum(res.momentum_csv)
    details, ok = [], True

    def frac(s):
        return abs(s.mean()) / math.sqrt(np.mean(s * s))

    # F = d(body momentum)/dt, so the mean is zero only once the swimming speed has settled
    for method in ("cv", "lm"):
        sub = window(select(tab, "eel", method, "cv"), 5.0)
        for col in ("Fx", "Fy", "Mz"):
            ok &= frac(sub[col]) < 0.05
            details.append(f"{method}.{col}={frac(sub[col]):.3f}")
    start = frac(window(select(tab, "eel", "cv", "cv"), 0.0, 3.0)["Fx"])
    P = np.hypot(mom["Px"], mom["Py"]) / (1.0 * 0.785 * 1.0)
    lm = select(tab, "eel", "lm", "cv")
    dx = lm["body_X"][-1] - lm["body_X"][0]
    ok = ok and P.max() < 0.02 and dx < 0
    record_criterion(7, ok, f"|mean|/rms over periods 6-8 {' '.join(details)} (<0.05; periods 1-3 cv.Fx={start:.3f}), "
                            f"max |P|/(rho Vmax L^2)={P.max():.4f} (<0.02), head dx={dx:.4f} (<0)")
    assert ok


def test_criterion_08_dkt(out_root, record_criterion):
    res, tab = run(dkt_tree(), out_root)
    cfg = CaseConfig.from_dict(dkt_tree())
    g = cfg.make_grid()
    D = 0.2
    zeta = min(g.dx, g.dy)
    p1 = select(tab, "particle1", "lm", "cv1")
    p2 = select(tab, "particle2", "lm", "cv2")
    dist = np.hypot(p1["body_X"] - p2["body_X"], p1["body_Y"] - p2["body_Y"])
    close = np.flatnonzero(dist < D + 2 * zeta)
    kissed = close.size > 0
    tumbled = separated = False
    if kissed:
        after = slice(close[0], None)
        tumbled = bool(np.any((p1["body_Y"] - p2["body_Y"])[after] < 0))
        apart = np.flatnonzero(dist[after] > D + 2 * zeta)
        separated = apart.size > 0 and apart[-1] == dist[after].size - 1
    # terminal state: hydrodynamic force balances the submerged weight
    V = math.pi * (D / 2) ** 2
    Fg = np.array([0.0, -(1.01 - 1.0) * 980.0 * V])
    balance = []
    for p in (p1, p2):
        tail = window(p, 4.5)
        F = np.array([tail["Fx"].mean(), tail["Fy"].mean()])
        balance.append(float(np.hypot(*(F + Fg)) / np.hypot(*Fg)))
    agree = []
    for body, cv in (("particle1", "cv1"), ("particle2", "cv2")):
        c = select(tab, body, "cv", cv)
        lm = select(tab, body, "lm", cv)
        solo = ~c["shared"].astype(bool)
        scale = np.abs(np.hypot(lm["Fx"], lm["Fy"])[solo]).max()
        diff = np.hypot(c["Fx"] - lm["Fx"], c["Fy"] - lm["Fy"])[solo]
        agree.append(float(diff.max() / scale))
    ok = kissed and tumbled and separated and max(balance) <= 0.10 and max(agree) <= 0.05
    record_criterion(8, ok, f"kiss={kissed} tumble={tumbled} separate={separated}, min dist={dist.min():.4f} "
                            f"(D+2zeta={D + 2 * zeta:.4f}), |F_lm + F_g|/|F_g|={balance[0]:.3f},{balance[1]:.3f} "
                            f"(<=0.10), cv/lm={agree[0]:.4f},{agree[1]:.4f} (<=0.05)")
    assert ok


def test_criterion_09_stokes(out_root, record_criterion):
    _, tab = run(builtin_tree("stokes"), out_root)
    lm = select(tab, "cylinder", "stokes_lm", "inner")
    inner = select(tab, "cylinder", "stokes_cv", "inner")
    outer = select(tab, "cylinder", "stokes_cv", "outer")
    drag = lm["Fx"][0]
    e_in = abs(inner["Fx"][0] - drag) / abs(drag)
    e_out = abs(outer["Fx"][0] - drag) / abs(drag)
    e_nest = abs(inner["Fx"][0] - outer["Fx"][0]) / abs(drag)
    lift = max(abs(lm["Fy"][0]), abs(inner["Fy"][0]), abs(outer["Fy"][0])) / abs(drag)
    ok = max(e_in, e_out, e_nest) <= 1e-2 and lift < 1e-8
    record_criterion(9, ok, f"cv/lm rel inner={e_in:.2e} outer={e_out:.2e}, nested={e_nest:.2e} (<=1e-2), "
                            f"lift/drag={lift:.2e} (<1e-8)")
    assert ok


def test_criterion_10_identities(record_criterion):
    rng = np.random.default_rng(7)
    errs = {}
    k = np.arange(-6, 7)
    errs["partition"] = max(abs(kernel_weight(name, r - k).sum() - 1.0)
                            for name in KERNELS for r in rng.uniform(-3, 3, 50))

    g = make_grid((-1.0, -1.0), (2.0, 2.0), 32, 32, (True, True))
    X = rng.uniform(-1, 1, (40, 2))
    F = rng.standard_normal((40, 2))
    ds = rng.uniform(0.5, 1.5, 40) * g.dx * g.dy
    u, v = rng.standard_normal(g.u_shape), rng.standard_normal(g.v_shape)
    c = Coupling(g, X)
    fu, fv = c.spread(F, ds)
    lhs = np.sum(c.interpolate(u, v) * F * ds[:, None])
    rhs = (np.sum(fu * u) + np.sum(fv * v)) * g.dx * g.dy
    errs["adjoint"] = abs(lhs - rhs) / abs(rhs)
    lag = (F * ds[:, None]).sum(axis=0)
    eul = np.array([fu.sum(), fv.sum()]) * g.dx * g.dy
    errs["force_sum"] = float(np.abs(lag - eul).max() / np.abs(lag).max())

    cv = ControlVolume(5, 7, 25, 21)
    flux = surface_flux(np.full(g.u_shape, 1.7), np.full(g.v_shape, -0.4), np.full(g.cell_shape, 3.2), cv, g, 1.0, 0.1)
    errs["closed_surface"] = max(float(np.abs(flux[k_][:2]).max()) for k_ in ("pressure", "momentum_flux", "viscous")) / 3.2

    # a few steps of flow past a held disc with a fixed CV
    gb = make_grid((-2.0, -2.0), (4.0, 4.0), 64, 64, (True, True))
    ns = NavierStokes(gb, BoundarySpec.periodic(), FluidParams(mu=0.02, dt=0.01))
    body = RigidBody("disc", generate_markers(Disc(1.0), gb), Stationary(), (0.0, 0.0))
    s = ns.initial_state(np.ones(gb.u_shape), None)
    prev = None
    cvb = ControlVolume(16, 16, 48, 48)
    worst_noca = worst_sum = 0.0
    for _ in range(5):
        snap0 = BodySnapshot.of(body)
        new, _ = ns.step(s, prev, [body], 0.01)
        snap1 = BodySnapshot.of(body)
        a = force_modified(s, new, cvb, snap0, snap1, gb, 1.0, 0.02, 0.01, body.X0)
        b = force_noca(s, new, cvb, cvb, snap0, snap1, gb, 1.0, 0.02, 0.01, body.X0)
        scale = max(np.abs(a.force).max(), abs(a.torque), 1e-300)
        worst_noca = max(worst_noca, float(np.abs(a.force - b.force).max()) / scale, abs(a.torque - b.torque) / scale)
        total = np.zeros(3)
        for name in TERMS:
            if name in a.breakdown:
                total = total + a.breakdown[name]
        worst_sum = max(worst_sum, float(np.abs(total[:2] - a.force).max()) / scale)
        prev, s = s, new
    errs["noca_equals_modified"] = worst_noca
    errs["breakdown_sum"] = worst_sum

    circle = generate_markers(CircleSurface(1.0), g)
    errs["surface_weights"] = abs(circle.ds.sum() - math.pi * g.dx) / (math.pi * g.dx)

    worst = max(errs.values())
    ok = worst <= 1e-12
    record_criterion(10, ok, "max rel error " + " ".join(f"{k_}={v_:.1e}" for k_, v_ in errs.items()) + " (<=1e-12)")
    assert ok
