"""Declarative run scenarios (YAML) and their validation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

FAMILIES = ("example_7_1", "example_7_2", "custom", "exponential", "potential")
STAGES = ("build", "transform", "weyl", "volterra", "string", "schrodinger", "dynamical")
SEED_FAMILIES = ("example_7_1", "example_7_2", "custom")
# stages that need a GBDT state
NEEDS_BUILD = ("transform", "weyl", "dynamical")
OPTION_KEYS = {
    "build": set(),
    "transform": {"lambdas", "points", "oracle_at"},
    "weyl": {"lambdas", "radii", "lengths", "disk_lambdas"},
    "volterra": {"lambdas", "nodes", "length", "kmax"},
    "string": {"start", "length", "nodes", "lambda"},
    "schrodinger": {"lambdas"},
    "dynamical": {"points_x", "points_t", "step", "t"},
}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


def parse_complex(value: Any, what: str = "value") -> complex:
    """Numbers, or strings in Python complex syntax such as ``"1+1j"``."""
    if isinstance(value, bool):
        raise ScenarioError(f"{what}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ScenarioError(f"{what}: cannot read {value!r} as a complex number")


def parse_real(value: Any, what: str = "value") -> float:
    z = parse_complex(value, what)
    if z.imag != 0:
        raise ScenarioError(f"{what}: expected a real number, got {value!r}")
    return z.real


def parse_matrix(value: Any, what: str = "matrix") -> np.ndarray:
    """Scalar or list of rows."""
    if isinstance(value, list):
        if not value:
            raise ScenarioError(f"{what}: empty matrix")
        rows = value if isinstance(value[0], list) else [value]
        width = len(rows[0])
        if any(not isinstance(r, list) or len(r) != width for r in rows):
            raise ScenarioError(f"{what}: rows must be lists of equal length")
        return np.array([[parse_complex(v, what) for v in r] for r in rows], dtype=complex)
    return np.array([[parse_complex(value, what)]], dtype=complex)


def _linspace_spec(value: Any, what: str) -> np.ndarray:
    if not (isinstance(value, list) and len(value) == 3):
        raise ScenarioError(f"{what}: expected [start, stop, count]")
    lo, hi = parse_real(value[0], what), parse_real(value[1], what)
    count = value[2]
    if not isinstance(count, int) or count < 1:
        raise ScenarioError(f"{what}: count must be a positive integer")
    return np.linspace(lo, hi, count)


def parse_lambdas(value: Any, what: str = "lambdas") -> list[complex]:
    """``{points: [...]}`` and/or ``{rect: {re: [a, b, n], im: [c, d, m]}}`` (row-major in ``im``)."""
    if value is None:
        return []
    if not isinstance(value, dict) or not set(value) <= {"points", "rect"}:
        raise ScenarioError(f"{what}: expected a mapping with keys 'points' and/or 'rect'")
    out = [parse_complex(v, what) for v in value.get("points", []) or []]
    rect = value.get("rect")
    if rect is not None:
        if not isinstance(rect, dict) or set(rect) != {"re", "im"}:
            raise ScenarioError(f"{what}.rect: needs 're' and 'im'")
        for im in _linspace_spec(rect["im"], f"{what}.rect.im"):
            for re in _linspace_spec(rect["re"], f"{what}.rect.re"):
                out.append(complex(re, im))
    return out


@dataclass(frozen=True)
class Scenario:
    name: str
    family: str
    params: dict
    length: float
    nodes: int
    lambdas: tuple
    stages: tuple
    options: dict
    tolerances: dict
    emit: tuple
    sha256: str
    description: str = ""

    def option(self, stage: str, key: str, default: Any = None) -> Any:
        return (self.options.get(stage) or {}).get(key, default)


def _require(data: dict, key: str, kind, what: str):
    if key not in data:
        raise ScenarioError(f"{what}: missing key {key!r}")
    value = data[key]
    if not isinstance(value, kind):
        raise ScenarioError(f"{what}.{key}: wrong type {type(value).__name__}")
    return value


def parse_scenario(text: str, default_tolerances: dict) -> Scenario:
    """Validate scenario text; raises :class:`ScenarioError` on any problem."""
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"YAML parse error: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    allowed = {"name", "description", "system", "grid", "lambdas", "stages", "options", "tolerances", "emit"}
    unknown = set(data) - allowed
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    name = _require(data, "name", str, "scenario")
    system = _require(data, "system", dict, "scenario")
    family = _require(system, "family", str, "system")
    if family not in FAMILIES:
        raise ScenarioError(f"system.family: unknown family {family!r}; choose from {list(FAMILIES)}")
    params = {k: v for k, v in system.items() if k != "family"}
    grid = _require(data, "grid", dict, "scenario")
    length = parse_real(_require(grid, "length", (int, float), "grid"), "grid.length")
    nodes = _require(grid, "nodes", int, "grid")
    if length <= 0 or nodes < 3:
        raise ScenarioError("grid: need length > 0 and nodes >= 3")
    lambdas = parse_lambdas(data.get("lambdas"))
    stages = _require(data, "stages", list, "scenario")
    for s in stages:
        if s not in STAGES:
            raise ScenarioError(f"stages: unknown stage {s!r}; choose from {list(STAGES)}")
    if family in SEED_FAMILIES:
        if any(s in NEEDS_BUILD for s in stages) and "build" not in stages:
            stages = ["build"] + list(stages)
    else:
        bad = [s for s in stages if s == "build" or s in NEEDS_BUILD]
        if bad:
            raise ScenarioError(f"stages {bad} need a GBDT seed family, not {family!r}")
    if family == "potential" and any(s != "schrodinger" for s in stages):
        raise ScenarioError("a potential family only supports the schrodinger stage")
    if "schrodinger" in stages and family != "potential":
        raise ScenarioError("the schrodinger stage needs the potential family")
    # fixed execution order
    stages = tuple(s for s in STAGES if s in stages)
    options = data.get("options") or {}
    if not isinstance(options, dict) or not set(options) <= set(STAGES):
        raise ScenarioError("options: expected a mapping keyed by stage name")
    for stage, opts in options.items():
        if opts is None:
            continue
        if not isinstance(opts, dict):
            raise ScenarioError(f"options.{stage}: expected a mapping")
        unknown = set(opts) - OPTION_KEYS[stage]
        if unknown:
            raise ScenarioError(f"options.{stage}: unknown keys {sorted(unknown)}")
    tolerances = dict(default_tolerances)
    for key, value in (data.get("tolerances") or {}).items():
        if key not in default_tolerances:
            raise ScenarioError(f"tolerances: unknown check {key!r}")
        tolerances[key] = parse_real(value, f"tolerances.{key}")
    emit = data.get("emit") or []
    if not isinstance(emit, list) or not all(isinstance(e, str) for e in emit):
        raise ScenarioError("emit: expected a list of series names")
    return Scenario(
        name=name,
        family=family,
        params=params,
        length=length,
        nodes=nodes,
        lambdas=tuple(lambdas),
        stages=stages,
        options=options,
        tolerances=tolerances,
        emit=tuple(emit),
        sha256=digest,
        description=str(data.get("description", "")),
    )


def bundled_names() -> list[str]:
    folder = resources.files("canonsys") / "scenarios"
    return sorted(p.name[: -len(".yaml")] for p in folder.iterdir() if p.name.endswith(".yaml"))


def read_scenario_text(ref: str) -> str:
    """Text of a scenario given as a file path or a bundled scenario name."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(encoding="utf-8")
    if ref in bundled_names():
        return (resources.files("canonsys") / "scenarios" / f"{ref}.yaml").read_text(encoding="utf-8")
    raise ScenarioError(f"no scenario file or bundled scenario named {ref!r}")
