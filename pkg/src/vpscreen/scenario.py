"""Scenario files: one JSON document describing a complete run."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ParameterError
from .grids import Grid, ScalarField, read_grid_csv
from .gtransform import build_gtransform
from .profile import calibrate_c_beta, check_beta, extend, profile_by_name
from .solver import SolverConfig, radial_solve, solve
from .sources import ChargeMeasure, PointCharge, gaussian_density

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 2}
_VEC = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "profile": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "beta": _NUM,
                "c_beta": {"oneOf": [_POS, {"const": "auto"}]},
                "r_probe": {"type": "number", "exclusiveMaximum": 0},
                "margin": {"type": "number", "minimum": 0},
            },
        },
        "charges": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["q"],
                        "properties": {"pos": _VEC, "q": _NUM},
                    },
                },
                "gaussians": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["q", "width"],
                        "properties": {"q": _NUM, "width": _POS, "center": _VEC},
                    },
                },
                "density_file": {"type": "string"},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L", "n"],
            "properties": {"L": _POS, "n": _INT},
        },
        "radial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["r_max", "n"],
            "properties": {"r_max": _POS, "n": _INT},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol_fixed_point": _POS,
                "max_iter": {"type": "integer", "minimum": 1},
                "damping": _POS,
                "damping_floor": _POS,
                "cap_active_policy": {"enum": ["warn", "error"]},
                "check_resolution": {"type": "boolean"},
            },
        },
        "gtable": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"r_min": _NUM, "r_max": _NUM, "n": _INT},
        },
        "output": {"type": "string"},
    },
    "oneOf": [{"required": ["grid"]}, {"required": ["radial"]}],
}


@dataclass(frozen=True)
class Scenario:
    """A validated run description.  Relative paths resolve against ``base_dir``."""

    profile: str = "maxwellian"
    beta: float = 0.25
    c_beta: float | None = None
    calibration: dict = field(default_factory=dict)
    points: tuple = ()
    gaussians: tuple = ()
    density_file: str | None = None
    grid: tuple | None = None
    radial: tuple | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    gtable: dict = field(default_factory=dict)
    output: str = "out"
    base_dir: str = "."

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        try:
            jsonschema.validate(doc, SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ParameterError(f"scenario invalid at {path}: {exc.message}") from exc
        prof = doc.get("profile", {})
        ch = doc.get("charges", {})
        c = prof.get("c_beta", "auto")
        calib = {k: prof[k] for k in ("r_probe", "margin") if k in prof}
        beta = float(prof.get("beta", 0.25))
        check_beta(beta)
        grid = (float(doc["grid"]["L"]), int(doc["grid"]["n"])) if "grid" in doc else None
        radial = (float(doc["radial"]["r_max"]), int(doc["radial"]["n"])) if "radial" in doc else None
        points = tuple(PointCharge(tuple(float(x) for x in p.get("pos", (0, 0, 0))), float(p["q"]))
                       for p in ch.get("points", []))
        gaussians = tuple((float(g["q"]), float(g["width"]), tuple(g.get("center", (0.0, 0.0, 0.0))))
                          for g in ch.get("gaussians", []))
        return cls(
            profile=prof.get("name", "maxwellian"),
            beta=beta,
            c_beta=None if c == "auto" else float(c),
            calibration=calib,
            points=points,
            gaussians=gaussians,
            density_file=ch.get("density_file"),
            grid=grid,
            radial=radial,
            solver=SolverConfig(**doc.get("solver", {})),
            gtable=dict(doc.get("gtable", {})),
            output=doc.get("output", "out"),
            base_dir=str(base_dir),
        )

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    # derived pieces -----------------------------------------------------------
    @property
    def is_radial(self):
        return self.radial is not None

    @property
    def theta(self):
        total = sum(p.q for p in self.points) + sum(g[0] for g in self.gaussians)
        if self.density_file:
            total += self.density().integral()
        return float(total)

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def output_dir(self):
        return self.resolve(self.output)

    def base_profile(self):
        return profile_by_name(self.profile)

    def extension(self, beta=None, c_beta=None):
        beta = self.beta if beta is None else beta
        base = self.base_profile()
        c = c_beta if c_beta is not None else self.c_beta
        if c is None:
            c = calibrate_c_beta(base, beta, **self.calibration)
        return extend(base, beta, c)

    def build_gtransform(self, ext):
        return build_gtransform(ext, **self.gtable)

    def mesh(self):
        return Grid(*self.grid) if self.grid else None

    def density(self):
        grid, values = read_grid_csv(self.resolve(self.density_file))
        if self.grid and grid != self.mesh():
            raise ParameterError("density file grid does not match the scenario grid")
        return ScalarField(grid, values)

    def measure(self):
        """Background measure on the scenario grid."""
        grid = self.mesh()
        smooth = None
        for q, width, center in self.gaussians:
            blob = gaussian_density(grid, q, width, center)
            smooth = blob if smooth is None else smooth.with_values(smooth.values + blob.values)
        if self.density_file:
            dens = self.density()
            smooth = dens if smooth is None else smooth.with_values(smooth.values + dens.values)
        return ChargeMeasure(points=self.points, smooth=smooth)

    def solve_with(self, gt):
        if self.is_radial:
            if self.gaussians or self.density_file:
                raise ParameterError("radial scenarios take a single point charge")
            if any(np.any(np.asarray(p.pos) != 0) for p in self.points):
                raise ParameterError("radial scenarios need the charge at the origin")
            return radial_solve(self.solver, gt, self.theta, *self.radial)
        return solve(self.measure(), gt, self.mesh(), self.solver)
