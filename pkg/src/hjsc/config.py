"""Problem configuration documents (YAML) and their validation.

A document looks like::

    hamiltonian: {p: 2, a: 0.5}
    cost: {family: power-well, center: 0.5}   # or a catalog id: "cost: E2"
    domain: {interval: [-1, 1]}               # or rectangle / disc
    grid: {spacing: 0.001}
    solver: {tol: 1.0e-6}
    curves: {starts: [0.8], horizon: 20}
    diagnostics: {deltas: [0.1, 0.05, 0.025, 0.0125]}

Every failure names the offending field path, e.g. ``solver.tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .costs import FAMILIES, make_cost
from .diagnostics import DEFAULT_DELTAS
from .domain import Domain
from .errors import HJSCError
from .examples import ExampleCase, catalog
from .hamiltonian import PowerHamiltonian, RunningCost
from .solver import SolverConfig


class ConfigError(HJSCError, ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ProblemConfig:
    H: PowerHamiltonian
    f: RunningCost
    domain: Domain
    spacing: float
    solver: SolverConfig = field(default_factory=SolverConfig)
    starts: list = field(default_factory=list)
    horizon: float = 20.0
    curve_dt: Optional[float] = None
    boundary_tolerance: Optional[float] = None
    probe: Optional[float] = None
    deltas: tuple = DEFAULT_DELTAS
    directions: int = 8
    case: Optional[ExampleCase] = None

    @classmethod
    def from_dict(cls, doc: Any) -> "ProblemConfig":
        if not isinstance(doc, dict):
            raise ConfigError("", "config must be a mapping at the top level")
        known = {"example", "hamiltonian", "cost", "domain", "grid", "solver", "curves", "diagnostics"}
        for key in doc:
            if key not in known:
                raise ConfigError(str(key), f"unknown section; expected one of {sorted(known)}")
        case = None
        cost_doc = doc.get("cost")
        case_id = doc.get("example")
        if isinstance(cost_doc, str) and cost_doc not in FAMILIES:
            case_id = cost_doc
        if case_id is not None:
            case = _lookup_case(case_id, "example" if "example" in doc else "cost")

        if "hamiltonian" in doc:
            H = _hamiltonian(_section(doc, "hamiltonian"))
        elif case is not None:
            H = case.H
        else:
            H = PowerHamiltonian()

        if "domain" in doc:
            domain = _domain(doc["domain"], "domain")
        elif case is not None:
            domain = case.domain
        else:
            raise ConfigError("domain", "required unless an example id is given")

        if cost_doc is None or (case is not None and isinstance(cost_doc, str) and cost_doc == case.id):
            if case is None:
                raise ConfigError("cost", "required unless an example id is given")
            f = case.f if domain == case.domain else _cost_from_case(case, domain)
        else:
            f = _cost(cost_doc, domain, "cost")

        grid = _section(doc, "grid")
        _only(grid, "grid", {"spacing"})
        spacing = _number(grid, "spacing", "grid", 1e-3, positive=True)

        sv = _section(doc, "solver")
        _only(sv, "solver", {"dt", "control_radius", "control_samples", "tol", "max_iters", "minimization"})
        solver = SolverConfig(
            dt=_number(sv, "dt", "solver", None, positive=True),
            control_radius=_number(sv, "control_radius", "solver", None, positive=True),
            control_samples=_integer(sv, "control_samples", "solver", None),
            tol=_number(sv, "tol", "solver", 1e-6, positive=True),
            max_iters=_integer(sv, "max_iters", "solver", 200_000),
            minimization=sv.get("minimization"),
        )
        if solver.minimization not in (None, "exact", "sampled"):
            raise ConfigError("solver.minimization", "must be 'exact' or 'sampled'")
        if solver.minimization == "exact" and domain.dim != 1:
            raise ConfigError("solver.minimization", "exact minimization is only available in 1D")
        if solver.dt is not None and not solver.dt < 1.0:
            raise ConfigError("solver.dt", f"must lie in (0, 1), got {solver.dt}")

        cv = _section(doc, "curves")
        _only(cv, "curves", {"starts", "horizon", "dt", "boundary_tolerance"})
        starts = _starts(cv.get("starts", []), domain.dim)
        horizon = _number(cv, "horizon", "curves", 20.0, positive=True)
        curve_dt = _number(cv, "dt", "curves", None, positive=True)
        eps = _number(cv, "boundary_tolerance", "curves", None, positive=True)

        dg = _section(doc, "diagnostics")
        _only(dg, "diagnostics", {"probe", "deltas", "directions"})
        probe = _number(dg, "probe", "diagnostics", None, positive=True)
        deltas = dg.get("deltas", list(DEFAULT_DELTAS))
        if not isinstance(deltas, list) or not deltas:
            raise ConfigError("diagnostics.deltas", "must be a non-empty list")
        deltas = tuple(_coerce(v, f"diagnostics.deltas[{i}]", positive=True) for i, v in enumerate(deltas))
        directions = _integer(dg, "directions", "diagnostics", 8)

        return cls(H, f, domain, spacing, solver, starts, horizon, curve_dt, eps, probe, deltas, directions, case)

    @classmethod
    def load(cls, path) -> "ProblemConfig":
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError("", f"malformed YAML in {path}: {exc}") from exc
        return cls.from_dict(doc if doc is not None else {})


def _lookup_case(case_id, path) -> ExampleCase:
    for case in catalog():
        if case.id == case_id:
            return case
    raise ConfigError(path, f"unknown example id {case_id!r}")


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a mapping")
    return sec


def _only(sec: dict, path: str, allowed: set) -> None:
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", f"unknown field; expected one of {sorted(allowed)}")


def _coerce(v, path: str, positive: bool = False) -> float:
    # YAML 1.1 reads "1e-3" as a string
    if isinstance(v, bool):
        raise ConfigError(path, "expected a number, got a boolean")
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ConfigError(path, "must be finite")
    if positive and not x > 0:
        raise ConfigError(path, f"must be positive, got {x}")
    return x


def _number(sec: dict, key: str, prefix: str, default, positive: bool = False):
    if key not in sec or sec[key] is None:
        return default
    return _coerce(sec[key], f"{prefix}.{key}", positive)


def _integer(sec: dict, key: str, prefix: str, default):
    if key not in sec or sec[key] is None:
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{prefix}.{key}", f"expected a positive integer, got {v!r}")
    return v


def _hamiltonian(sec: dict) -> PowerHamiltonian:
    _only(sec, "hamiltonian", {"p", "a"})
    p = _number(sec, "p", "hamiltonian", 2.0)
    a = _number(sec, "a", "hamiltonian", 1.0)
    if not 1.0 < p <= 2.0:
        raise ConfigError("hamiltonian.p", f"must lie in (1, 2], got {p}")
    if not a > 0:
        raise ConfigError("hamiltonian.a", f"must be positive, got {a}")
    return PowerHamiltonian(p, a)


def _pair(v, path: str) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(path, "expected [lower, upper]")
    lo, hi = (_coerce(x, f"{path}[{i}]") for i, x in enumerate(v))
    if not lo < hi:
        raise ConfigError(path, f"lower {lo} must be below upper {hi}")
    return lo, hi


def _domain(sec, path: str) -> Domain:
    if not isinstance(sec, dict) or len(sec) != 1:
        raise ConfigError(path, "expected exactly one of interval / rectangle / disc")
    (kind, spec), = sec.items()
    sub = f"{path}.{kind}"
    if kind == "interval":
        return Domain.interval(*_pair(spec, sub))
    if kind == "rectangle":
        if not isinstance(spec, (list, tuple)) or len(spec) != 2:
            raise ConfigError(sub, "expected [[xlo, xhi], [ylo, yhi]]")
        return Domain.rectangle(_pair(spec[0], f"{sub}[0]"), _pair(spec[1], f"{sub}[1]"))
    if kind == "disc":
        if not isinstance(spec, dict):
            raise ConfigError(sub, "expected {center: [x, y], radius: r}")
        _only(spec, sub, {"center", "radius"})
        center = spec.get("center", [0.0, 0.0])
        if not isinstance(center, (list, tuple)) or len(center) != 2:
            raise ConfigError(f"{sub}.center", "expected [x, y]")
        c = tuple(_coerce(x, f"{sub}.center[{i}]") for i, x in enumerate(center))
        return Domain.disc(c, _number(spec, "radius", sub, 1.0, positive=True))
    raise ConfigError(path, f"unknown domain kind {kind!r}; expected interval, rectangle or disc")


def _cost(spec, domain: Domain, path: str) -> RunningCost:
    if isinstance(spec, str):
        spec = {"family": spec}
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(path, "expected a catalog id or {family: <name>, ...parameters}")
    family = spec["family"]
    if family not in FAMILIES:
        raise ConfigError(f"{path}.family", f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    params = {}
    for k, v in spec.items():
        if k == "family":
            continue
        params[k] = int(v) if k == "m" and isinstance(v, int) else _coerce(v, f"{path}.{k}")
    try:
        return make_cost(family, domain, **params)
    except TypeError as exc:
        raise ConfigError(path, f"bad parameters for {family}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _cost_from_case(case: ExampleCase, domain: Domain) -> RunningCost:
    if case.f.dim != domain.dim:
        raise ConfigError("domain", f"example {case.id} is {case.f.dim}D but the domain is {domain.dim}D")
    return make_cost(case.f.name, domain, **_case_params(case))


def _case_params(case: ExampleCase) -> dict:
    return {"power-well": {"center": 0.5}, "bump": {"m": 1}}.get(case.f.name, {})


def _starts(raw, dim: int) -> list:
    if not isinstance(raw, list):
        raise ConfigError("curves.starts", "must be a list of points")
    out = []
    for i, item in enumerate(raw):
        path = f"curves.starts[{i}]"
        vals = item if isinstance(item, list) else [item]
        if len(vals) != dim:
            raise ConfigError(path, f"expected {dim} coordinate(s), got {len(vals)}")
        out.append(np.array([_coerce(v, f"{path}") for v in vals]))
    return out
