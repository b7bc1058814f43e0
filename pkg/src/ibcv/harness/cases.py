"""Builtin benchmark cases.

Every case is registered with its published parameters.  ``scale`` coarsens
the grid, lengthens the time step in proportion and shortens the run, while
leaving all physical parameters (and hence Re, KC, f_e/f_0) untouched.
"""

from __future__ import annotations

import copy
import math

from ..errors import ConfigurationError
from .config import CaseConfig

# natural shedding Strouhal number of a stationary cylinder at Re 185
STROUHAL_185 = 0.193


def _walls(velocity=(0.0, 0.0)):
    side = {"kind": "dirichlet", "velocity": list(velocity)}
    return {k: dict(side) for k in ("left", "right", "bottom", "top")}


def _periodic():
    return {k: {"kind": "periodic"} for k in ("left", "right", "bottom", "top")}


def _channel(U=1.0):
    inflow = {"kind": "dirichlet", "velocity": [U, 0.0]}
    return {"left": dict(inflow), "right": {"kind": "outflow"}, "bottom": dict(inflow), "top": dict(inflow)}


def _cylinder(name, center, kinematics, D=1.0):
    return {"name": name, "shape": {"type": "disc", "D": D}, "center": list(center), "kinematics": kinematics}


def stationary_cylinder_re550():
    return {
        "name": "stationary_cylinder_re550",
        "description": "impulsively started flow past a fixed cylinder, Re 550",
        "grid": {"origin": [-6.0, -6.0], "extents": [18.0, 12.0], "cells": [900, 600]},
        "boundary": _channel(1.0),
        "fluid": {"rho": 1.0, "mu": 1.0 / 550.0, "cfl": 0.3},
        "initial": {"velocity": [1.0, 0.0]},
        "bodies": [_cylinder("cylinder", (0.0, 0.0), {"mode": "stationary"})],
        "control_volumes": [
            {"name": "cv", "body": "cylinder", "lower": [-1.0, -1.0], "upper": [1.5, 1.0], "policy": "stationary"}
        ],
        "normalization": {"rho": 1.0, "U": 1.0, "L": 1.0},
        "duration": {"t_end": 5.0},
        "methods": ["cv", "noca", "lm"],
    }


def translating_cylinder():
    return {
        "name": "translating_cylinder",
        "description": "cylinder dragged through fluid at rest, Re 550, periodic box",
        "grid": {"origin": [-9.0, -6.0], "extents": [18.0, 12.0], "cells": [900, 600]},
        "boundary": _periodic(),
        "fluid": {"rho": 1.0, "mu": 1.0 / 550.0, "cfl": 0.3},
        "bodies": [_cylinder("cylinder", (0.0, 0.0), {"mode": "translation", "U": [-1.0, 0.0]})],
        "control_volumes": [
            {"name": "cv", "body": "cylinder", "lower": [-1.0, -1.0], "upper": [1.5, 1.0], "policy": "follow", "margin": 3}
        ],
        "normalization": {"rho": 1.0, "U": 1.0, "L": 1.0},
        "duration": {"t_end": 5.0},
        "methods": ["cv", "noca", "lm"],
    }


TWO_CYLINDER_CVS = {
    1: ([-1.0, -3.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 3.0]),
    2: ([-1.0, -3.0], [1.0, 1.0], [-1.0, -1.0], [1.0, 3.0]),
    3: ([-1.0, -3.0], [1.0, 2.0], [-1.0, -2.0], [1.0, 3.0]),
    4: ([-1.0, -3.0], [1.0, 2.7], [-1.0, -2.7], [1.0, 3.0]),
}


def two_cylinders():
    cvs = []
    for k, (lo1, hi1, lo2, hi2) in TWO_CYLINDER_CVS.items():
        cvs.append({"name": f"config{k}_bottom", "body": "bottom", "lower": lo1, "upper": hi1})
        cvs.append({"name": f"config{k}_top", "body": "top", "lower": lo2, "upper": hi2})
    return {
        "name": "two_cylinders",
        "description": "two fixed cylinders side by side, four CV configurations",
        "grid": {"origin": [-6.0, -6.0], "extents": [18.0, 12.0], "cells": [900, 600]},
        "boundary": _channel(1.0),
        "fluid": {"rho": 1.0, "mu": 1.0 / 550.0, "cfl": 0.3},
        "initial": {"velocity": [1.0, 0.0]},
        "bodies": [
            _cylinder("bottom", (0.0, -2.0), {"mode": "stationary"}),
            _cylinder("top", (0.0, 2.0), {"mode": "stationary"}),
        ],
        "control_volumes": cvs,
        "normalization": {"rho": 1.0, "U": 1.0, "L": 1.0},
        "duration": {"t_end": 5.0},
        "methods": ["cv", "lm"],
    }


def inline_osc():
    Re, KC, U0, D = 100.0, 5.0, 1.0, 1.0
    f = U0 / (KC * D)
    return {
        "name": "inline_osc",
        "description": "cylinder oscillating in line in fluid at rest, Re 100, KC 5",
        "grid": {"origin": [-16.0, -8.0], "extents": [32.0, 16.0], "cells": [800, 400]},
        "boundary": _walls(),
        "fluid": {"rho": 1.0, "mu": U0 * D / Re, "dt": 0.005 * D / U0},
        "bodies": [_cylinder("cylinder", (0.0, 0.0), {"mode": "inline", "U0": U0, "f": f})],
        "control_volumes": [
            {"name": "cv", "body": "cylinder", "lower": [-4.0, -2.0], "upper": [4.0, 2.0], "policy": "stationary"}
        ],
        "normalization": {"rho": 1.0, "U": U0, "L": D},
        "duration": {"t_end": 2.0 / f},
        "methods": ["cv", "noca", "lm"],
    }


def crossflow_osc():
    Re, U, D = 185.0, 1.0, 1.0
    fe = 1.0 * STROUHAL_185 * U / D
    V0 = 0.2 * fe * D / 0.159
    return {
        "name": "crossflow_osc",
        "description": "cylinder oscillating across a free stream, Re 185, f_e/f_0 = 1",
        "grid": {"origin": [-5.0, -8.0], "extents": [32.0, 16.0], "cells": [800, 384]},
        "boundary": _channel(U),
        "fluid": {"rho": 1.0, "mu": U * D / Re, "dt": 0.005 * D / U},
        "initial": {"velocity": [U, 0.0]},
        "bodies": [_cylinder("cylinder", (0.0, 0.2 * D), {"mode": "crossflow", "V0": V0, "fe": fe})],
        "control_volumes": [
            {"name": "cv", "body": "cylinder", "lower": [-1.0, -2.0], "upper": [1.0, 2.0], "policy": "stationary"}
        ],
        "normalization": {"rho": 1.0, "U": U, "L": D},
        "duration": {"t_end": 100.0 * D / U},
        "methods": ["cv", "noca", "lm"],
    }


def rotational_osc():
    D, f, Re = 1.0, 0.1, 300.0
    Am = 10.0 * f * D
    Um = Am * D / 2.0
    T = 1.0 / f
    return {
        "name": "rotational_osc",
        "description": "cylinder in rotational oscillation in fluid at rest, Re 300",
        "grid": {"origin": [-20.0, -20.0], "extents": [40.0, 40.0], "cells": [2048, 2048]},
        "boundary": _walls(),
        "fluid": {"rho": 1.0, "mu": Um * D / Re, "dt": 1e-4 * T},
        "bodies": [_cylinder("cylinder", (0.0, 0.0), {"mode": "rotational", "Am": Am, "f": f})],
        "control_volumes": [
            {"name": "cv", "body": "cylinder", "lower": [-1.01562, -1.01562], "upper": [1.01562, 1.01562],
             "policy": "stationary", "torque_origin": [0.0, 0.0]}
        ],
        "normalization": {"rho": 1.0, "U": Um, "L": D},
        "duration": {"t_end": 2.0 * T},
        "methods": ["cv", "noca", "lm"],
    }


def translating_plate_re20():
    b, Ub, Re = 1.0, 1.0, 20.0
    return {
        "name": "translating_plate_re20",
        "description": "flat plate dragged normal to itself, Re 20, periodic box",
        "grid": {"origin": [-16.0, -11.0], "extents": [32.0 * b, 22.0 * b], "cells": [1024, 1024]},
        "boundary": _periodic(),
        "fluid": {"rho": 1.0, "mu": Ub * b / Re, "cfl": 0.3},
        "bodies": [{"name": "plate", "shape": {"type": "plate", "b": b}, "center": [0.0, 0.0],
                    "kinematics": {"mode": "translation", "U": [-Ub, 0.0]}}],
        "control_volumes": [
            {"name": "cv", "body": "plate", "lower": [-2.0 * b, -b], "upper": [2.0 * b, b], "policy": "follow", "margin": 3}
        ],
        "normalization": {"rho": 1.0, "U": Ub, "L": b},
        "duration": {"t_end": 10.0},
        "methods": ["cv", "noca", "lm"],
    }


def eel():
    L, T, Vmax, Re = 1.0, 1.0, 0.785, 5609.0
    return {
        "name": "eel",
        "description": "free-swimming two-dimensional eel in a periodic box",
        "grid": {"origin": [-5.0, -2.0], "extents": [8.0 * L, 4.0 * L], "cells": [2048, 1024]},
        "boundary": _periodic(),
        "fluid": {"rho": 1.0, "mu": Vmax * L / Re, "dt": 1e-4 * T},
        "bodies": [{"name": "eel", "shape": {"type": "eel", "L": L, "s_b": 0.04, "s_t": 0.95, "w_h": 0.04, "w_t": 0.01},
                    "center": [0.0, 0.0], "anchor": "head", "kinematics": {"mode": "eel", "T": T, "L": L}}],
        "control_volumes": [
            {"name": "cv", "body": "eel", "lower": [-1.02 * L, -0.7075 * L], "upper": [1.0425 * L, 0.73 * L],
             "policy": "track"}
        ],
        "normalization": {"rho": 1.0, "U": Vmax, "L": L},
        "duration": {"t_end": 3.0 * T},
        "methods": ["cv", "noca", "lm"],
    }


def dkt():
    D, rho, g = 0.2, 1.0, 980.0
    R = D / 2.0
    half = 5.0 * (10.0 * D / 64.0)
    cvs = [
        {"name": f"cv{k}", "body": f"particle{k}", "lower": [-half, -half], "upper": [half, half],
         "policy": "center", "half_width": [half, half]}
        for k in (1, 2)
    ]
    for c, X in zip(cvs, ((-0.005 * D, 36.0 * D), (0.0, 34.0 * D))):
        c["lower"] = [X[0] - half, X[1] - half]
        c["upper"] = [X[0] + half, X[1] + half]
    outflow = {"kind": "outflow"}
    return {
        "name": "dkt",
        "description": "drafting, kissing and tumbling of two sedimenting cylinders",
        "grid": {"origin": [-5.0 * D, 0.0], "extents": [10.0 * D, 40.0 * D], "cells": [256, 1024]},
        "boundary": {"left": {"kind": "dirichlet", "velocity": [0.0, 0.0]},
                     "right": {"kind": "dirichlet", "velocity": [0.0, 0.0]},
                     "bottom": dict(outflow), "top": dict(outflow)},
        "fluid": {"rho": rho, "mu": 0.01, "dt": 5e-4},
        "bodies": [
            {"name": "particle1", "shape": {"type": "disc", "D": D}, "center": [-0.005 * D, 36.0 * D],
             "kinematics": {"mode": "free_gravity", "rho_s": 1.01 * rho, "g": g}},
            {"name": "particle2", "shape": {"type": "disc", "D": D}, "center": [0.0, 34.0 * D],
             "kinematics": {"mode": "free_gravity", "rho_s": 1.01 * rho, "g": g}},
        ],
        "control_volumes": cvs,
        "collision": {"c_ij": rho * math.pi * R * R * g, "eps_P": 2.0, "zeta": "dy_min"},
        "normalization": {"rho": rho, "U": 1.0, "L": D},
        "duration": {"t_end": 5.0},
        "methods": ["cv", "lm"],
    }


def stokes():
    return {
        "name": "stokes",
        "description": "steady Stokes flow past a held cylinder in a box with moving walls",
        "solver": "stokes",
        "grid": {"origin": [-4.0, -4.0], "extents": [8.0, 8.0], "cells": [128, 128]},
        "boundary": _walls((1.0, 0.0)),
        "fluid": {"rho": 0.0, "mu": 1.0},
        "bodies": [{"name": "cylinder", "shape": {"type": "circle_surface", "D": 1.0, "spacing_cells": 2.0},
                    "center": [0.0, 0.0], "kinematics": {"mode": "stationary"}}],
        "control_volumes": [
            {"name": "inner", "body": "cylinder", "lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
            {"name": "outer", "body": "cylinder", "lower": [-2.0, -2.0], "upper": [2.0, 2.0]},
        ],
        "normalization": {"rho": 1.0, "U": 1.0, "L": 1.0},
        "duration": {},
        "methods": ["cv", "lm"],
    }


BUILTINS = {
    f.__name__: f
    for f in (
        stationary_cylinder_re550,
        translating_cylinder,
        two_cylinders,
        inline_osc,
        crossflow_osc,
        rotational_osc,
        translating_plate_re20,
        eel,
        dkt,
        stokes,
    )
}


def builtin_cases() -> dict:
    """Registry of case name -> one-line description."""
    return {name: f()["description"] for name, f in BUILTINS.items()}


def scale_tree(tree: dict, scale: float) -> dict:
    """Coarsen grid and shorten the run by ``scale`` (1 keeps the published setup)."""
    if not (isinstance(scale, (int, float)) and math.isfinite(scale) and scale > 0):
        raise ConfigurationError(f"scale must be positive, got {scale!r}", keys=["scale"])
    t = copy.deepcopy(tree)
    if scale == 1:
        return t
    t["grid"]["cells"] = [max(4, int(round(n * scale))) for n in t["grid"]["cells"]]
    fluid = t.get("fluid", {})
    if fluid.get("dt") is not None:
        fluid["dt"] = fluid["dt"] / scale
    dur = t.get("duration", {})
    if "t_end" in dur:
        dur["t_end"] = dur["t_end"] * scale
    if "steps" in dur:
        dur["steps"] = max(1, int(round(dur["steps"] * scale * scale)))
    return t


def builtin_tree(name: str, scale: float = 1.0) -> dict:
    try:
        f = BUILTINS[name]
    except KeyError:
        raise ConfigurationError(f"unknown case {name!r}; known: {', '.join(sorted(BUILTINS))}", keys=["case"]) from None
    return scale_tree(f(), scale)


def builtin(name: str, scale: float = 1.0) -> CaseConfig:
    return CaseConfig.from_dict(builtin_tree(name, scale))


def dimensionless_groups(cfg: CaseConfig) -> dict:
    """Re, KC and f_e/f_0 recomputed from the physical parameters."""
    rho = float(cfg.fluid.get("rho", 1.0))
    mu = float(cfg.fluid["mu"])
    U = abs(float(cfg.normalization["U"]))
    L = float(cfg.normalization["L"])
    out = {"Re": rho * U * L / mu if rho > 0 else 0.0}
    for b in cfg.bodies:
        k = b["kinematics"]
        if k["mode"] == "inline":
            out["KC"] = abs(k["U0"]) / (k["f"] * L)
        elif k["mode"] == "crossflow":
            out["fe_over_f0"] = k["fe"] / (STROUHAL_185 * U / L)
            out["amplitude_ratio"] = 0.159 * abs(k["V0"]) / (k["fe"] * L)
        elif k["mode"] == "rotational":
            out["Am_over_fD"] = k["Am"] / (k["f"] * L)
        elif k["mode"] == "free_gravity":
            out["density_ratio"] = k["rho_s"] / rho
    return out
