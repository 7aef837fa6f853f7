"""Case files: schema validation and construction of solver inputs.

A case is a JSON object with sections chart, grid, material, loads,
boundary, solver, output.  Validation is strict: unknown keys are
rejected, and every error names the JSON path of the offending entry so
misconfigured runs fail before any assembly starts.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

import numpy as np

from . import constitutive
from .solver import (
    BoundaryConditions,
    EdgeCondition,
    LoadSpec,
    SolverConfig,
)
from .surface import (
    EDGE_NAMES,
    CylinderChart,
    FlatChart,
    Grid,
    ReferenceSurface,
    TabulatedChart,
    build_reference,
)

__all__ = ["ConfigError", "CaseConfig", "load_case", "parse_case"]


class ConfigError(ValueError):
    """Invalid case data; `path` points at the offending JSON entry."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require_mapping(data, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    return data


def _check_keys(data, path, allowed, required=()):
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in data:
            raise ConfigError(path, f"missing required key {key!r}")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(path, "number must be finite")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _vec3(value, path):
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(path, "expected a list of 3 numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _coeffs4(value, path):
    if not isinstance(value, list) or len(value) != 4:
        raise ConfigError(path, "expected a list of 4 numbers")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


@dataclass
class CaseConfig:
    """Validated case data plus the original document for echoing."""

    chart: dict
    grid: dict
    material: dict
    loads: dict
    boundary: dict
    solver: dict
    output: dict
    raw: dict = dc_field(repr=False, default_factory=dict)

    def build_surface(self) -> ReferenceSurface:
        kind = self.chart["kind"]
        if kind == "flat":
            chart = FlatChart()
        elif kind == "cylinder":
            chart = CylinderChart(self.chart["radius"])
        else:
            chart = TabulatedChart.from_csv(self.chart["path"])
        grid = Grid(
            self.grid["n1"], self.grid["n2"],
            tuple(self.grid["x1_lim"]), tuple(self.grid["x2_lim"]),
        )
        return build_reference(chart, grid)

    def build_material(self) -> constitutive.MaterialModel:
        spec = dict(self.material)
        family = spec.pop("family")
        try:
            if family == "custom":
                return constitutive.custom_coefficients(spec["alpha"], spec["beta"])
            if family == "drill_active":
                return constitutive.coefficients_drill_active(**spec)
            spec.setdefault("reduced_shear_correction", 1.0)
            return constitutive.coefficients_drill_free(**spec)
        except ValueError as exc:
            raise ConfigError("material", str(exc)) from exc

    def build_loads(self) -> Optional[LoadSpec]:
        if not self.loads:
            return None
        return LoadSpec(
            body_force=self.loads.get("body_force"),
            director_couple=self.loads.get("director_couple"),
            edge_force={k: np.asarray(v) for k, v in self.loads.get("edge_force", {}).items()},
            edge_couple={k: np.asarray(v) for k, v in self.loads.get("edge_couple", {}).items()},
        )

    def build_boundary(self) -> BoundaryConditions:
        return BoundaryConditions(
            edges={
                name: EdgeCondition(kind=spec["kind"])
                for name, spec in self.boundary.items()
            }
        )

    def build_solver(self) -> SolverConfig:
        try:
            return SolverConfig(**self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError("solver", str(exc)) from exc


def load_case(path) -> CaseConfig:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read case file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_case(data)


def parse_case(data: Any) -> CaseConfig:
    _require_mapping(data, "case")
    _check_keys(
        data, "case",
        allowed=("chart", "grid", "material", "loads", "boundary", "solver", "output"),
        required=("chart", "grid", "material"),
    )
    return CaseConfig(
        chart=_parse_chart(data["chart"]),
        grid=_parse_grid(data["grid"]),
        material=_parse_material(data["material"]),
        loads=_parse_loads(data.get("loads", {})),
        boundary=_parse_boundary(data.get("boundary", {})),
        solver=_parse_solver(data.get("solver", {})),
        output=_parse_output(data.get("output", {})),
        raw=data,
    )


def _parse_chart(data):
    _require_mapping(data, "chart")
    if "kind" not in data:
        raise ConfigError("chart", "missing required key 'kind'")
    kind = data["kind"]
    if kind == "flat":
        _check_keys(data, "chart", allowed=("kind",))
        return {"kind": "flat"}
    if kind == "cylinder":
        _check_keys(data, "chart", allowed=("kind", "radius"), required=("radius",))
        radius = _number(data["radius"], "chart.radius")
        if radius <= 0:
            raise ConfigError("chart.radius", "radius must be positive")
        return {"kind": "cylinder", "radius": radius}
    if kind == "tabulated":
        _check_keys(data, "chart", allowed=("kind", "path"), required=("path",))
        if not isinstance(data["path"], str):
            raise ConfigError("chart.path", "expected a string path")
        return {"kind": "tabulated", "path": data["path"]}
    raise ConfigError("chart.kind", f"unknown chart kind {kind!r}")


def _parse_grid(data):
    _require_mapping(data, "grid")
    _check_keys(
        data, "grid",
        allowed=("n1", "n2", "x1_lim", "x2_lim"),
        required=("n1", "n2", "x1_lim", "x2_lim"),
    )
    out = {"n1": _integer(data["n1"], "grid.n1"), "n2": _integer(data["n2"], "grid.n2")}
    for key in ("x1_lim", "x2_lim"):
        lim = data[key]
        if not isinstance(lim, list) or len(lim) != 2:
            raise ConfigError(f"grid.{key}", "expected [low, high]")
        lo = _number(lim[0], f"grid.{key}[0]")
        hi = _number(lim[1], f"grid.{key}[1]")
        if not lo < hi:
            raise ConfigError(f"grid.{key}", f"bounds must increase, got [{lo}, {hi}]")
        out[key] = [lo, hi]
    for key in ("n1", "n2"):
        if out[key] < 3:
            raise ConfigError(f"grid.{key}", "need at least 3 nodes per direction")
    return out


def _parse_material(data):
    _require_mapping(data, "material")
    if "family" not in data:
        raise ConfigError("material", "missing required key 'family'")
    family = data["family"]
    if family == "custom":
        _check_keys(data, "material", allowed=("family", "alpha", "beta"),
                    required=("alpha", "beta"))
        return {
            "family": "custom",
            "alpha": _coeffs4(data["alpha"], "material.alpha"),
            "beta": _coeffs4(data["beta"], "material.beta"),
        }
    if family not in ("drill_active", "drill_free"):
        raise ConfigError("material.family", f"unknown family {family!r}")
    allowed = (
        "family", "youngs", "poisson", "thickness",
        "shear_correction", "drill_correction", "reduced_shear_correction",
    )
    _check_keys(data, "material", allowed=allowed,
                required=("youngs", "poisson", "thickness"))
    out = {"family": family}
    for key in allowed[1:]:
        if key in data:
            out[key] = _number(data[key], f"material.{key}")
    return out


def _parse_loads(data):
    _require_mapping(data, "loads")
    _check_keys(
        data, "loads",
        allowed=("body_force", "director_couple", "edge_force", "edge_couple"),
    )
    out = {}
    for key in ("body_force", "director_couple"):
        if key in data:
            out[key] = _vec3(data[key], f"loads.{key}")
    for key in ("edge_force", "edge_couple"):
        if key in data:
            table = _require_mapping(data[key], f"loads.{key}")
            parsed = {}
            for name, vec in table.items():
                if name not in EDGE_NAMES:
                    raise ConfigError(f"loads.{key}.{name}", "unknown edge name")
                parsed[name] = _vec3(vec, f"loads.{key}.{name}")
            out[key] = parsed
    return out


def _parse_boundary(data):
    _require_mapping(data, "boundary")
    out = {}
    for name, spec in data.items():
        if name not in EDGE_NAMES:
            raise ConfigError(f"boundary.{name}", "unknown edge name")
        _require_mapping(spec, f"boundary.{name}")
        _check_keys(spec, f"boundary.{name}", allowed=("kind",), required=("kind",))
        if spec["kind"] not in ("dirichlet", "traction"):
            raise ConfigError(
                f"boundary.{name}.kind",
                f"expected 'dirichlet' or 'traction', got {spec['kind']!r}",
            )
        out[name] = {"kind": spec["kind"]}
    return out


def _parse_solver(data):
    _require_mapping(data, "solver")
    allowed = {
        "max_iterations": _integer,
        "gradient_tolerance": _number,
        "backtracking_factor": _number,
        "sufficient_decrease": _number,
        "memory": _integer,
        "energy_model": None,
        "allow_unconstrained": None,
    }
    _check_keys(data, "solver", allowed=tuple(allowed))
    out = {}
    for key, value in data.items():
        conv = allowed[key]
        if key == "energy_model":
            if not isinstance(value, str):
                raise ConfigError("solver.energy_model", "expected a string")
            out[key] = value
        elif key == "allow_unconstrained":
            if not isinstance(value, bool):
                raise ConfigError("solver.allow_unconstrained", "expected a boolean")
            out[key] = value
        else:
            out[key] = conv(value, f"solver.{key}")
    return out


def _parse_output(data):
    _require_mapping(data, "output")
    _check_keys(data, "output", allowed=("result", "fields"))
    for key, value in data.items():
        if not isinstance(value, str):
            raise ConfigError(f"output.{key}", "expected a string path")
    return dict(data)
