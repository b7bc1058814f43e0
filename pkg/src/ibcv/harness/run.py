"""Time loop, diagnostics pipeline and output files for one case."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import pickle
import time
from dataclasses import dataclass, field

import numpy as np

from .. import mesh
from ..bodies import RigidBody, generate_markers
from ..cv_forces import (
    TERMS,
    BodySnapshot,
    CVPolicy,
    Normalization,
    coefficients,
    domain_momentum,
    force_modified,
    force_noca,
    lm_force,
    momentum_diagnostics,
    move_cv,
    snap_cv,
    stokes_force,
    stokes_lm_force,
)
from ..errors import ConfigurationError, IBCVError, NumericalFailure, StateError
from ..kernels import get_kernel
from ..navier import NavierStokes
from ..stokes import StokesProblem, solve_constrained_stokes
from .cases import dimensionless_groups
from .config import CaseConfig, body_center, body_radius, make_kinematics, make_shape
from .metrics import series_stats

log = logging.getLogger("ibcv")

FORCE_COLUMNS = (
    ["t", "step", "body", "cv", "method", "Fx", "Fy", "Mz", "C_D", "C_L", "C_T", "body_X", "body_Y", "body_theta"]
    + [f"{name}_{c}" for name in TERMS for c in ("x", "y", "m")]
    + ["cv_moved", "cv_xL", "cv_yL", "cv_xU", "cv_yU", "shared"]
)
MOMENTUM_COLUMNS = [
    "t", "step", "Px", "Py", "Lz", "body_Px", "body_Py", "body_Lz",
    "cv", "cv_Mx", "cv_My", "cv_Lz", "I_x", "I_y", "I_m",
]
CHECKPOINT_VERSION = 1


@dataclass
class CaseResult:
    name: str
    out_dir: str
    forces_csv: str
    momentum_csv: str | None
    summary_path: str
    summary: dict
    fields: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    figures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


@dataclass
class _CV:
    name: str
    body: str
    cv: object
    policy: CVPolicy
    origin: object
    shared: bool = False


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _build_bodies(cfg: CaseConfig, g):
    bodies = []
    for spec in cfg.bodies:
        cloud = generate_markers(make_shape(spec["shape"]), g)
        kin = make_kinematics(spec["kinematics"])
        X0 = body_center(spec, cloud)
        bodies.append(RigidBody(spec["name"], cloud, kin, X0, float(spec.get("theta", 0.0)), body_radius(spec)))
    return bodies


def _build_cvs(cfg: CaseConfig, g, bodies):
    by_name = {b.name: b for b in bodies}
    out = []
    for spec in cfg.control_volumes:
        cv = snap_cv(spec["lower"], spec["upper"], g)
        hw = spec.get("half_width")
        policy = CVPolicy(spec.get("policy", "stationary"), int(spec.get("margin", 3)),
                          None if hw is None else tuple(float(x) for x in hw))
        body = by_name[spec["body"]]
        if policy.kind != "stationary":
            policy.attach(cv, body, g)
        origin = spec.get("torque_origin", "body")
        out.append(_CV(spec["name"], spec["body"], cv, policy, origin))
    return out


def _torque_origin(c: _CV, body):
    return body.X0.copy() if c.origin == "body" else np.array(c.origin, dtype=float)


def _collision(cfg: CaseConfig, g):
    if cfg.collision is None:
        return None
    zeta = cfg.collision["zeta"]
    if zeta == "dy_min":
        zeta = min(g.dx, g.dy)
    return {"c_ij": float(cfg.collision["c_ij"]), "eps_P": float(cfg.collision["eps_P"]), "zeta": float(zeta)}


def _shared(c: _CV, g, bodies, reach=0.0):
    """Names of other bodies with markers inside the CV.

    ``reach`` is the kernel radius in cells: a marker that close to the CV
    already spreads force into it.
    """
    xL, yL, xU, yU = c.cv.bounds(g)
    xL, xU = xL - reach * g.dx, xU + reach * g.dx
    yL, yU = yL - reach * g.dy, yU + reach * g.dy
    hits = []
    for b in bodies:
        if b.name == c.body:
            continue
        X = b.positions
        dx = X[:, 0] - xL
        dy = X[:, 1] - yL
        if g.periodic[0]:
            dx = np.mod(dx, g.extents[0])
        if g.periodic[1]:
            dy = np.mod(dy, g.extents[1])
        if np.any((dx >= 0) & (dx <= xU - xL) & (dy >= 0) & (dy <= yU - yL)):
            hits.append(b.name)
    return hits


def _force_row(rec, step, cv_name, norm, cv_bounds, moved, shared, pose=(0.0, 0.0, 0.0)):
    CD, CL, CT = coefficients(rec, norm)
    F = rec.force
    row = [rec.t, step, rec.body, cv_name, rec.method, F[0], F[1], rec.torque, CD, CL, CT, *pose]
    for name in TERMS:
        v = rec.breakdown.get(name, (0.0, 0.0, 0.0))
        row += [float(v[0]), float(v[1]), float(v[2])]
    if cv_bounds is None:
        row += [False, "", "", "", "", shared]
    else:
        row += [moved, *cv_bounds, shared]
    return [_fmt(x) for x in row]


class _Writers:
    def __init__(self, out_dir, offsets=None):
        self.forces_path = os.path.join(out_dir, "forces.csv")
        self.momentum_path = os.path.join(out_dir, "momentum.csv")
        if offsets is None:
            self.ff = open(self.forces_path, "w", newline="")
            self.mf = open(self.momentum_path, "w", newline="")
            csv.writer(self.ff).writerow(FORCE_COLUMNS)
            csv.writer(self.mf).writerow(MOMENTUM_COLUMNS)
        else:
            for path, off in ((self.forces_path, offsets[0]), (self.momentum_path, offsets[1])):
                if not os.path.exists(path) or os.path.getsize(path) < off:
                    raise StateError(f"{path} is missing or shorter than the checkpoint expects")
                with open(path, "r+b") as fh:
                    fh.truncate(off)
            self.ff = open(self.forces_path, "a", newline="")
            self.mf = open(self.momentum_path, "a", newline="")
        self.fw = csv.writer(self.ff)
        self.mw = csv.writer(self.mf)

    def offsets(self):
        self.ff.flush()
        self.mf.flush()
        return self.ff.tell(), self.mf.tell()

    def close(self):
        self.ff.close()
        self.mf.close()


def _write_fields(out_dir, state, g, step, binary):
    d = os.path.join(out_dir, "fields")
    os.makedirs(d, exist_ok=True)
    paths = []
    for comp, arr in (("u", state.u), ("v", state.v), ("p", state.p)):
        path = os.path.join(d, f"{comp}_{step:07d}.dat")
        mesh.write_field_dump(path, arr, g, comp, state.t, binary=binary)
        paths.append(path)
    return paths


def run_case(cfg: CaseConfig, out_dir, methods=None, checkpoint_every=None, restart=None, plot=False,
             max_steps=None) -> CaseResult:
    """Run ``cfg`` and write forces/momentum CSVs and a summary under ``out_dir``.

    ``restart`` names a checkpoint written by an earlier run into the same
    ``out_dir``; the continued run reproduces the uninterrupted one exactly.
    ``max_steps`` stops early (used to create checkpoints mid-run).
    """
    os.makedirs(out_dir, exist_ok=True)
    methods = list(cfg.methods if methods is None else methods)
    for m in methods:
        if m not in ("cv", "noca", "lm"):
            raise ConfigurationError(f"unknown method {m!r}", keys=["methods"])
    if cfg.solver == "stokes":
        return _run_stokes(cfg, out_dir, methods, plot)

    t_wall = time.time()
    g = cfg.make_grid()
    bcs = cfg.make_boundary()
    params = cfg.fluid_params()
    solver = NavierStokes(g, bcs, params)
    norm = Normalization(float(cfg.normalization["rho"]), float(cfg.normalization["U"]), float(cfg.normalization["L"]))
    collision = _collision(cfg, g)
    rho, mu = params.rho, params.mu
    out = cfg.output
    force_every = int(out.get("force_every", 1))
    field_every = int(out.get("field_every", 0))
    binary = bool(out.get("binary_fields", False))
    if checkpoint_every is None:
        checkpoint_every = int(out.get("checkpoint_every", 0))
    t_end = cfg.duration.get("t_end")
    n_end = cfg.duration.get("steps")

    if restart is not None:
        with open(restart, "rb") as fh:
            ck = pickle.load(fh)
        if ck.get("version") != CHECKPOINT_VERSION:
            raise StateError(f"{restart} is not a compatible checkpoint")
        if ck["config"] != cfg.to_dict():
            raise ConfigurationError("checkpoint was written for a different configuration", keys=["restart"])
        state, prev, bodies, cvs = ck["state"], ck["prev"], ck["bodies"], ck["cvs"]
        warnings, fields, checkpoints = ck["warnings"], ck["fields"], ck["checkpoints"]
        writers = _Writers(out_dir, ck["offsets"])
        log.info("restart %s at step %d, t=%.6g", cfg.name, state.n, state.t)
    else:
        bodies = _build_bodies(cfg, g)
        cvs = _build_cvs(cfg, g, bodies)
        u0 = cfg.initial.get("velocity", (0.0, 0.0))
        u = np.full(g.u_shape, float(u0[0]))
        v = np.full(g.v_shape, float(u0[1]))
        mesh.apply_velocity_bc(u, v, g, bcs, 0.0)
        state = solver.initial_state(u, v)
        prev = None
        warnings, fields, checkpoints = [], [], []
        writers = _Writers(out_dir)
        cfg.dump(os.path.join(out_dir, "config.yaml"))
        if field_every:
            fields += _write_fields(out_dir, state, g, 0, binary)

    by_name = {b.name: b for b in bodies}

    def done(st):
        if n_end is not None and st.n >= n_end:
            return True
        return t_end is not None and st.t >= t_end - 1e-9 * max(1.0, abs(t_end))

    steps_run = 0
    try:
        while not done(state):
            if max_steps is not None and steps_run >= max_steps:
                break
            step = state.n + 1
            try:
                dt = solver.choose_dt(state, bodies)
                snaps0 = {b.name: BodySnapshot.of(b) for b in bodies}
                new, records = solver.step(state, prev, bodies, dt, collision)
                snaps1 = {b.name: BodySnapshot.of(b) for b in bodies}
                recs = {r.name: r for r in records}
                emit = step % force_every == 0
                rows = []
                for c in cvs:
                    body = by_name[c.body]
                    old_cv = c.cv
                    c.cv, moved, (di, dj) = move_cv(c.cv, body, c.policy, g)
                    hits = _shared(c, g, bodies, solver.kernel.support)
                    if bool(hits) != c.shared:
                        warnings.append({"t": new.t, "step": step, "cv": c.name, "body": c.body, "others": hits,
                                         "event": "enter" if hits else "leave"})
                        if hits:
                            log.warning("step %d: markers of %s reach control volume %s", step, hits, c.name)
                    c.shared = bool(hits)
                    if not emit:
                        continue
                    x0 = _torque_origin(c, body)
                    bounds = c.cv.bounds(g)
                    pose = (float(body.X0[0]), float(body.X0[1]), float(body.theta))
                    if "cv" in methods:
                        r = force_modified(state, new, c.cv, snaps0[c.body], snaps1[c.body], g, rho, mu, dt, x0,
                                           c.body, moved)
                        rows.append(_force_row(r, step, c.name, norm, bounds, moved, c.shared, pose))
                    if "noca" in methods:
                        u_S = (di * g.dx / dt, dj * g.dy / dt)
                        r = force_noca(state, new, old_cv, c.cv, snaps0[c.body], snaps1[c.body], g, rho, mu, dt, x0,
                                       u_S, c.body, moved)
                        rows.append(_force_row(r, step, c.name, norm, bounds, moved, c.shared, pose))
                    if "lm" in methods:
                        r = lm_force(recs[c.body], snaps0[c.body], snaps1[c.body], rho, dt, x0, new.t, c.body)
                        rows.append(_force_row(r, step, c.name, norm, bounds, moved, c.shared, pose))
                    mom = momentum_diagnostics(state, new, c.cv, list(snaps1.values()), g, rho, mu, dt, x0)
                    writers.mw.writerow([_fmt(x) for x in (
                        new.t, step, *mom.domain_momentum, mom.domain_angular, *mom.body_momentum, mom.body_angular,
                        c.name, *mom.cv_momentum, mom.cv_angular, *mom.residual)])
                if emit and not cvs:
                    for b in bodies:
                        if "lm" in methods:
                            r = lm_force(recs[b.name], snaps0[b.name], snaps1[b.name], rho, dt, b.X0, new.t, b.name)
                            rows.append(_force_row(r, step, "", norm, None, False, False,
                                                          (float(b.X0[0]), float(b.X0[1]), float(b.theta))))
                    P, L = domain_momentum(new.u, new.v, g, rho)
                    writers.mw.writerow([_fmt(x) for x in (new.t, step, *P, L, 0.0, 0.0, 0.0, "", 0.0, 0.0, 0.0,
                                                           0.0, 0.0, 0.0)])
                for row in rows:
                    writers.fw.writerow(row)
            except IBCVError as exc:
                raise type(exc)(f"step {step} (t={state.t:.6g}): {exc}", *_extra(exc)) from exc
            prev, state = state, new
            steps_run += 1
            if field_every and step % field_every == 0:
                fields += _write_fields(out_dir, state, g, step, binary)
            if checkpoint_every and step % checkpoint_every == 0:
                path = os.path.join(out_dir, "checkpoints", f"step_{step:07d}.pkl")
                os.makedirs(os.path.dirname(path), exist_ok=True)
                checkpoints.append(path)
                ck = {
                    "version": CHECKPOINT_VERSION, "config": cfg.to_dict(), "state": state, "prev": prev,
                    "bodies": bodies, "cvs": cvs, "warnings": warnings, "fields": fields,
                    "checkpoints": checkpoints, "offsets": writers.offsets(),
                }
                with open(path, "wb") as fh:
                    pickle.dump(ck, fh, protocol=pickle.HIGHEST_PROTOCOL)
            if step % 100 == 0:
                log.info("%s: step %d t=%.5g dt=%.3g", cfg.name, step, state.t, dt)
    finally:
        writers.close()

    summary = summarize(writers.forces_path, cfg)
    summary.update({
        "case": cfg.name,
        "steps": state.n,
        "t_final": state.t,
        "groups": dimensionless_groups(cfg),
        "wall_seconds": time.time() - t_wall,
        "warnings": warnings,
        "completed": done(state),
    })
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    res = CaseResult(cfg.name, out_dir, writers.forces_path, writers.momentum_path, summary_path, summary,
                     fields, checkpoints, [], warnings)
    if plot:
        from .report import render_report

        res.figures = render_report(res)
    return res


def _extra(exc):
    if isinstance(exc, ConfigurationError):
        return (exc.keys,)
    if isinstance(exc, NumericalFailure):
        return (exc.residuals,)
    return ()


def _run_stokes(cfg: CaseConfig, out_dir, methods, plot):
    t_wall = time.time()
    g = cfg.make_grid()
    bcs = cfg.make_boundary()
    mu = float(cfg.fluid["mu"])
    bodies = _build_bodies(cfg, g)
    if not bodies:
        raise ConfigurationError("the Stokes solver needs at least one body", keys=["bodies"])
    X = np.concatenate([b.positions for b in bodies])
    ds = np.concatenate([b.ds for b in bodies])
    Ub = np.concatenate([b.velocity for b in bodies])
    kernel = cfg.fluid.get("kernel", "peskin4")
    sol = solve_constrained_stokes(StokesProblem(g, mu, bcs, X, ds, Ub, kernel))
    offsets = np.cumsum([0] + [b.n_markers for b in bodies])
    slices = {b.name: slice(offsets[k], offsets[k + 1]) for k, b in enumerate(bodies)}
    by_name = {b.name: b for b in bodies}
    cvs = _build_cvs(cfg, g, bodies)
    norm = Normalization(float(cfg.normalization["rho"]), float(cfg.normalization["U"]), float(cfg.normalization["L"]))
    forces_path = os.path.join(out_dir, "forces.csv")
    with open(forces_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FORCE_COLUMNS)
        for c in cvs:
            body = by_name[c.body]
            x0 = _torque_origin(c, body)
            shared = bool(_shared(c, g, bodies, get_kernel(kernel).support))
            if "cv" in methods:
                r = stokes_force(sol.u, sol.v, sol.p, c.cv, g, mu, x0, c.body)
                w.writerow(_force_row(r, 0, c.name, norm, c.cv.bounds(g), False, shared))
            if "lm" in methods:
                sl = slices[c.body]
                r = stokes_lm_force(sol.F[sl], X[sl], ds[sl], x0, c.body)
                w.writerow(_force_row(r, 0, c.name, norm, c.cv.bounds(g), False, shared))
    cfg.dump(os.path.join(out_dir, "config.yaml"))
    fields = []
    if int(cfg.output.get("field_every", 0)):
        from ..navier import FlowState

        fields = _write_fields(out_dir, FlowState(sol.u, sol.v, sol.p), g, 0, bool(cfg.output.get("binary_fields")))
    summary = summarize(forces_path, cfg)
    summary.update({"case": cfg.name, "steps": 0, "t_final": 0.0, "residuals": sol.residuals,
                    "groups": dimensionless_groups(cfg), "wall_seconds": time.time() - t_wall,
                    "warnings": [], "completed": True})
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
    res = CaseResult(cfg.name, out_dir, forces_path, None, summary_path, summary, fields)
    if plot:
        from .report import render_report

        res.figures = render_report(res)
    return res


# --- reading results ------------------------------------------------------------


_TEXT = {"body", "cv", "method"}


def load_forces(path):
    """Force rows as a dict of column -> numpy array (text columns as object arrays)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for name in FORCE_COLUMNS:
        vals = [r[name] for r in rows]
        if name in _TEXT:
            cols[name] = np.array(vals, dtype=object)
        else:
            cols[name] = np.array([float(v) if v != "" else math.nan for v in vals])
    return cols


def select(table, body=None, method=None, cv=None):
    """Rows of ``table`` matching the given body/method/cv."""
    n = len(table["t"])
    mask = np.ones(n, dtype=bool)
    if body is not None:
        mask &= table["body"] == body
    if method is not None:
        mask &= table["method"] == method
    if cv is not None:
        mask &= table["cv"] == cv
    return {k: v[mask] for k, v in table.items()}


def load_momentum(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for name in MOMENTUM_COLUMNS:
        vals = [r[name] for r in rows]
        out[name] = np.array(vals, dtype=object) if name == "cv" else np.array([float(v) for v in vals])
    return out


def summarize(forces_path, cfg: CaseConfig):
    table = load_forces(forces_path)
    stats = []
    keys = sorted({(b, c, m) for b, c, m in zip(table["body"], table["cv"], table["method"])})
    for b, c, m in keys:
        sub = select(table, b, m, c)
        entry = {"body": b, "cv": c, "method": m, "rows": int(len(sub["t"])), "cv_moves": int(np.sum(sub["cv_moved"]))}
        for col in ("C_D", "C_L", "C_T"):
            entry[col] = series_stats(sub[col])
        stats.append(entry)
    return {"series": stats}
