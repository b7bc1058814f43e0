"""Case configuration tree, validation and conversion to runtime objects.

A case is a plain key/value tree (YAML on disk)::

    name: stationary_cylinder_re550
    solver: unsteady            # or stokes
    grid: {origin: [-9, -6], extents: [18, 12], cells: [900, 600]}
    boundary:
      left: {kind: dirichlet, velocity: [1, 0]}
      right: {kind: outflow}
      bottom: {kind: dirichlet, velocity: [1, 0]}
      top: {kind: dirichlet, velocity: [1, 0]}
    fluid: {rho: 1, mu: 0.0018181818, cfl: 0.3}
    initial: {velocity: [1, 0]}
    bodies:
      - {name: cylinder, shape: {type: disc, D: 1}, center: [0, 0],
         kinematics: {mode: stationary}}
    control_volumes:
      - {name: cv, body: cylinder, lower: [-1, -1], upper: [1.5, 1],
         policy: stationary}
    normalization: {rho: 1, U: 1, L: 1}
    duration: {t_end: 5}
    methods: [cv, noca, lm]
    output: {force_every: 1, field_every: 0, checkpoint_every: 0}

Validation collects every offending key as a dotted path before raising.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..bodies import (
    CircleSurface,
    CrossflowOscillation,
    Disc,
    Eel,
    EelShape,
    Ellipse,
    FreeGravity,
    InlineOscillation,
    Plate,
    RotationalOscillation,
    Stationary,
    Translation,
    eel_lateral_displacement,
)
from ..errors import ConfigurationError
from ..kernels import KERNELS
from ..mesh import DIRICHLET, OUTFLOW, PERIODIC, BoundarySpec, GridSpec, Side, make_grid
from ..navier import FluidParams

SOLVERS = ("unsteady", "stokes")
METHOD_NAMES = ("cv", "noca", "lm")
SHAPES = {
    "disc": ("D",),
    "ellipse": ("a", "b"),
    "plate": ("b",),
    "circle_surface": ("D",),
    "eel": ("L",),
}
SHAPE_OPTIONAL = {
    "circle_surface": ("spacing_cells",),
    "eel": ("s_b", "s_t", "w_h", "w_t"),
}
KINEMATICS = {
    "stationary": (),
    "translation": ("U",),
    "inline": ("U0", "f"),
    "crossflow": ("V0", "fe"),
    "rotational": ("Am", "f"),
    "eel": ("T", "L"),
    "free_gravity": ("rho_s",),
}
KINEMATICS_OPTIONAL = {"free_gravity": ("g",)}
POLICIES = ("stationary", "follow", "track", "center")
SIDES = ("left", "right", "bottom", "top")
TOP_KEYS = {
    "name", "description", "solver", "grid", "boundary", "fluid", "initial", "bodies",
    "control_volumes", "normalization", "duration", "methods", "output", "collision", "seed",
}


@dataclass
class CaseConfig:
    """Validated case tree with typed accessors."""

    name: str
    grid: dict
    boundary: dict
    fluid: dict
    bodies: list
    control_volumes: list
    duration: dict
    output: dict = field(default_factory=dict)
    methods: list = field(default_factory=lambda: list(METHOD_NAMES))
    normalization: dict = field(default_factory=lambda: {"rho": 1.0, "U": 1.0, "L": 1.0})
    initial: dict = field(default_factory=dict)
    collision: dict | None = None
    solver: str = "unsteady"
    description: str = ""
    seed: int = 0

    @classmethod
    def from_dict(cls, tree: dict) -> "CaseConfig":
        validate_tree(tree)
        t = copy.deepcopy(tree)
        return cls(
            name=t["name"],
            grid=t["grid"],
            boundary=t["boundary"],
            fluid=t.get("fluid", {}),
            bodies=t.get("bodies", []),
            control_volumes=t.get("control_volumes", []),
            duration=t.get("duration", {}),
            output=t.get("output", {}),
            methods=list(t.get("methods", METHOD_NAMES)),
            normalization=t.get("normalization", {"rho": 1.0, "U": 1.0, "L": 1.0}),
            initial=t.get("initial", {}),
            collision=t.get("collision"),
            solver=t.get("solver", "unsteady"),
            description=t.get("description", ""),
            seed=int(t.get("seed", 0)),
        )

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "description": self.description,
            "solver": self.solver,
            "seed": self.seed,
            "grid": self.grid,
            "boundary": self.boundary,
            "fluid": self.fluid,
            "initial": self.initial,
            "bodies": self.bodies,
            "control_volumes": self.control_volumes,
            "normalization": self.normalization,
            "duration": self.duration,
            "methods": self.methods,
            "output": self.output,
        }
        if self.collision is not None:
            out["collision"] = self.collision
        return copy.deepcopy(out)

    def dump(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    # runtime objects
    def make_grid(self) -> GridSpec:
        g = self.grid
        return make_grid(g["origin"], g["extents"], int(g["cells"][0]), int(g["cells"][1]), self.periodic)

    @property
    def periodic(self):
        b = self.boundary
        return (b["left"]["kind"] == PERIODIC, b["bottom"]["kind"] == PERIODIC)

    def make_boundary(self) -> BoundarySpec:
        sides = {}
        for name in SIDES:
            s = self.boundary[name]
            vel = tuple(float(x) for x in s.get("velocity", (0.0, 0.0)))
            sides[name] = Side(s["kind"], vel)
        return BoundarySpec(**sides)

    def fluid_params(self) -> FluidParams:
        f = dict(self.fluid)
        if "dt_max" in f and f["dt_max"] is None:
            f.pop("dt_max")
        return FluidParams(**f)


def load_config(path) -> CaseConfig:
    with open(path) as fh:
        try:
            tree = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigurationError(f"{path} does not contain a key/value tree")
    return CaseConfig.from_dict(tree)


# --- validation ----------------------------------------------------------------


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_pair(x):
    return isinstance(x, (list, tuple)) and len(x) == 2 and all(_is_num(v) for v in x)


def _positive(bad, tree, key, path, required=True):
    if key not in tree:
        if required:
            bad.append(f"{path}.{key}")
        return
    if not (_is_num(tree[key]) and tree[key] > 0):
        bad.append(f"{path}.{key}")


def validate_tree(tree) -> None:
    """Raise ConfigurationError listing every offending key."""
    bad = []
    if not isinstance(tree, dict):
        raise ConfigurationError("case configuration must be a key/value tree", keys=["<root>"])
    for k in tree:
        if k not in TOP_KEYS:
            bad.append(k)
    if not isinstance(tree.get("name"), str) or not tree.get("name"):
        bad.append("name")
    solver = tree.get("solver", "unsteady")
    if solver not in SOLVERS:
        bad.append("solver")

    grid = tree.get("grid")
    if not isinstance(grid, dict):
        bad.append("grid")
        grid = {}
    else:
        if not _is_pair(grid.get("origin")):
            bad.append("grid.origin")
        ext = grid.get("extents")
        if not (_is_pair(ext) and ext[0] > 0 and ext[1] > 0):
            bad.append("grid.extents")
        cells = grid.get("cells")
        if not (isinstance(cells, (list, tuple)) and len(cells) == 2
                and all(isinstance(c, int) and not isinstance(c, bool) and c >= 4 for c in cells)):
            bad.append("grid.cells")

    bnd = tree.get("boundary")
    if not isinstance(bnd, dict):
        bad.append("boundary")
    else:
        for side in SIDES:
            s = bnd.get(side)
            if not isinstance(s, dict) or s.get("kind") not in (PERIODIC, DIRICHLET, OUTFLOW):
                bad.append(f"boundary.{side}")
                continue
            if "velocity" in s and not _is_pair(s["velocity"]):
                bad.append(f"boundary.{side}.velocity")
        for a, b in (("left", "right"), ("bottom", "top")):
            ka = bnd.get(a, {}).get("kind") if isinstance(bnd.get(a), dict) else None
            kb = bnd.get(b, {}).get("kind") if isinstance(bnd.get(b), dict) else None
            if (ka == PERIODIC) != (kb == PERIODIC):
                bad.append(f"boundary.{a}/{b}")

    fluid = tree.get("fluid", {})
    if not isinstance(fluid, dict):
        bad.append("fluid")
        fluid = {}
    allowed = {"rho", "mu", "dt", "cfl", "dt_max", "div_tol", "solve_tol", "post_projection", "kernel"}
    for k in fluid:
        if k not in allowed:
            bad.append(f"fluid.{k}")
    _positive(bad, fluid, "mu", "fluid")
    if "rho" in fluid and not (_is_num(fluid["rho"]) and fluid["rho"] >= 0):
        bad.append("fluid.rho")
    if solver == "unsteady":
        if fluid.get("dt") is None and fluid.get("cfl") is None:
            bad.append("fluid.dt")
        if fluid.get("dt") is not None:
            _positive(bad, fluid, "dt", "fluid")
        if fluid.get("cfl") is not None and not (_is_num(fluid["cfl"]) and 0 < fluid["cfl"] <= 1):
            bad.append("fluid.cfl")
        if "rho" in fluid and fluid["rho"] == 0:
            bad.append("fluid.rho")
    if "kernel" in fluid and fluid["kernel"] not in KERNELS:
        bad.append("fluid.kernel")

    init = tree.get("initial", {})
    if not isinstance(init, dict) or ("velocity" in init and not _is_pair(init["velocity"])):
        bad.append("initial.velocity")

    names = []
    bodies = tree.get("bodies", [])
    if not isinstance(bodies, list):
        bad.append("bodies")
        bodies = []
    for k, b in enumerate(bodies):
        path = f"bodies[{k}]"
        if not isinstance(b, dict):
            bad.append(path)
            continue
        name = b.get("name")
        if not isinstance(name, str) or not name or name in names:
            bad.append(f"{path}.name")
        names.append(name)
        shape = b.get("shape")
        if not isinstance(shape, dict) or shape.get("type") not in SHAPES:
            bad.append(f"{path}.shape.type")
        else:
            for key in SHAPES[shape["type"]]:
                _positive(bad, shape, key, f"{path}.shape")
            for key in SHAPE_OPTIONAL.get(shape["type"], ()):
                _positive(bad, shape, key, f"{path}.shape", required=False)
        if not _is_pair(b.get("center")):
            bad.append(f"{path}.center")
        if "theta" in b and not _is_num(b["theta"]):
            bad.append(f"{path}.theta")
        if b.get("anchor", "centroid") not in ("centroid", "head"):
            bad.append(f"{path}.anchor")
        kin = b.get("kinematics")
        if not isinstance(kin, dict) or kin.get("mode") not in KINEMATICS:
            bad.append(f"{path}.kinematics.mode")
        else:
            mode = kin["mode"]
            for key in KINEMATICS[mode]:
                if key == "U":
                    if not _is_pair(kin.get("U")):
                        bad.append(f"{path}.kinematics.U")
                elif key in ("U0", "V0", "Am"):
                    if not _is_num(kin.get(key)):
                        bad.append(f"{path}.kinematics.{key}")
                else:
                    _positive(bad, kin, key, f"{path}.kinematics")
            for key in KINEMATICS_OPTIONAL.get(mode, ()):
                _positive(bad, kin, key, f"{path}.kinematics", required=False)
            if mode == "eel" and isinstance(shape, dict) and shape.get("type") != "eel":
                bad.append(f"{path}.shape.type")

    cvs = tree.get("control_volumes", [])
    if not isinstance(cvs, list):
        bad.append("control_volumes")
        cvs = []
    cv_names = []
    for k, c in enumerate(cvs):
        path = f"control_volumes[{k}]"
        if not isinstance(c, dict):
            bad.append(path)
            continue
        if c.get("name") in cv_names or not isinstance(c.get("name"), str):
            bad.append(f"{path}.name")
        cv_names.append(c.get("name"))
        if c.get("body") not in names:
            bad.append(f"{path}.body")
        lo, hi = c.get("lower"), c.get("upper")
        if not _is_pair(lo):
            bad.append(f"{path}.lower")
        if not _is_pair(hi):
            bad.append(f"{path}.upper")
        if _is_pair(lo) and _is_pair(hi) and not (hi[0] > lo[0] and hi[1] > lo[1]):
            bad.append(f"{path}.upper")
        if c.get("policy", "stationary") not in POLICIES:
            bad.append(f"{path}.policy")
        if "margin" in c and not (isinstance(c["margin"], int) and c["margin"] >= 0):
            bad.append(f"{path}.margin")
        if c.get("policy") == "center" and not _is_pair(c.get("half_width")):
            bad.append(f"{path}.half_width")
        origin = c.get("torque_origin", "body")
        if origin != "body" and not _is_pair(origin):
            bad.append(f"{path}.torque_origin")

    norm = tree.get("normalization", {"rho": 1.0, "U": 1.0, "L": 1.0})
    if not isinstance(norm, dict):
        bad.append("normalization")
    else:
        for key in ("rho", "L"):
            _positive(bad, norm, key, "normalization")
        if not (_is_num(norm.get("U")) and norm.get("U") != 0):
            bad.append("normalization.U")

    dur = tree.get("duration", {})
    if solver == "unsteady":
        if not isinstance(dur, dict) or not (_is_num(dur.get("t_end")) and dur["t_end"] > 0) and not (
            isinstance(dur.get("steps"), int) and dur["steps"] > 0
        ):
            bad.append("duration")

    methods = tree.get("methods", list(METHOD_NAMES))
    if not isinstance(methods, list) or not methods or any(m not in METHOD_NAMES for m in methods):
        bad.append("methods")

    out = tree.get("output", {})
    if not isinstance(out, dict):
        bad.append("output")
    else:
        for key in ("force_every", "field_every", "checkpoint_every"):
            if key in out and not (isinstance(out[key], int) and out[key] >= 0):
                bad.append(f"output.{key}")
        if out.get("force_every", 1) == 0:
            bad.append("output.force_every")

    col = tree.get("collision")
    if col is not None:
        if not isinstance(col, dict):
            bad.append("collision")
        else:
            for key in ("c_ij", "eps_P"):
                _positive(bad, col, key, "collision")
            z = col.get("zeta")
            if z != "dy_min" and not (_is_num(z) and z > 0):
                bad.append("collision.zeta")

    if bad:
        raise ConfigurationError("invalid case configuration: " + ", ".join(bad), keys=bad)


# --- builders ------------------------------------------------------------------


def make_shape(spec: dict):
    kind = spec["type"]
    if kind == "disc":
        return Disc(float(spec["D"]))
    if kind == "ellipse":
        return Ellipse(float(spec["a"]), float(spec["b"]))
    if kind == "plate":
        return Plate(float(spec["b"]))
    if kind == "circle_surface":
        return CircleSurface(float(spec["D"]), float(spec.get("spacing_cells", 2.0)))
    opts = {k: float(spec[k]) for k in SHAPE_OPTIONAL["eel"] if k in spec}
    return EelShape(float(spec["L"]), **opts)


def make_kinematics(spec: dict):
    mode = spec["mode"]
    if mode == "stationary":
        return Stationary()
    if mode == "translation":
        return Translation(tuple(float(x) for x in spec["U"]))
    if mode == "inline":
        return InlineOscillation(float(spec["U0"]), float(spec["f"]))
    if mode == "crossflow":
        return CrossflowOscillation(float(spec["V0"]), float(spec["fe"]))
    if mode == "rotational":
        return RotationalOscillation(float(spec["Am"]), float(spec["f"]))
    if mode == "eel":
        return Eel(float(spec["T"]), float(spec["L"]))
    return FreeGravity(float(spec["rho_s"]), float(spec.get("g", 980.0)))


def body_center(spec: dict, cloud) -> np.ndarray:
    """Center of mass from the configured placement.

    ``anchor: head`` places the eel head at ``center``; the center of mass
    is then offset by the centroid of the initial backbone shape.
    """
    c = np.array(spec["center"], dtype=float)
    if spec.get("anchor", "centroid") == "head" and cloud.backbone is not None:
        kin = spec["kinematics"]
        T, L = float(kin.get("T", 1.0)), float(kin.get("L", 1.0))
        y = eel_lateral_displacement(cloud.backbone, 0.0, T, L) + cloud.normal
        pts = np.stack([cloud.backbone, y], axis=1)
        c = c + (pts * cloud.ds[:, None]).sum(axis=0) / cloud.ds.sum()
    return c


def body_radius(spec: dict):
    shape = spec["shape"]
    if shape["type"] in ("disc", "circle_surface"):
        return 0.5 * float(shape["D"])
    return None
