"""Semiconcavity measurements and structural checks on solved fields."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .curves import MinimizingCurve
from .domain import as_points
from .errors import ParameterRangeError
from .hamiltonian import PowerHamiltonian, RunningCost
from .solver import Grid, ValueField, f_on_grid

DEFAULT_DELTAS = (0.1, 0.05, 0.025, 0.0125)


def probe_directions(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.ones((1, 1))
    theta = np.pi * np.arange(count) / count
    return np.c_[np.cos(theta), np.sin(theta)]


def second_difference_at(u: ValueField, x, probe: float, directions: int = 8) -> np.ndarray:
    """Sup over directions of ``(u(x+h) - 2u(x) + u(x-h)) / |h|^2`` at arbitrary points.

    Directions with either probe point outside the closed domain are
    skipped; a point with no usable direction gets NaN.
    """
    pts = as_points(x, u.grid.dimension)
    u0 = u(pts)
    best = np.full(len(pts), -np.inf)
    for e in probe_directions(u.grid.dimension, directions):
        h = probe * e
        sd = (u(pts + h) - 2.0 * u0 + u(pts - h)) / probe**2
        best = np.where(np.isnan(sd), best, np.maximum(best, sd))
    return np.where(np.isfinite(best), best, np.nan)


@dataclass(frozen=True, eq=False)
class SecondDifferenceField:
    values: np.ndarray = field(repr=False)
    skipped: np.ndarray = field(repr=False)
    probe: float = 0.0

    def max(self) -> float:
        return float(np.nanmax(self.values))


def second_difference_field(u: ValueField, probe: Optional[float] = None, directions: int = 8) -> SecondDifferenceField:
    """Second-difference quotient at every admissible node (NaN where skipped).

    ``probe`` defaults to four grid spacings and may not be smaller than two.
    """
    grid = u.grid
    if probe is None:
        probe = 4.0 * grid.min_spacing
    if probe < 2.0 * grid.min_spacing - 1e-15:
        raise ParameterRangeError(f"probe {probe} is below two grid spacings")
    vals = np.full(len(grid.points), np.nan)
    adm = grid.admissible
    vals[adm] = second_difference_at(u, grid.points[adm], probe, directions)
    skipped = adm & np.isnan(vals)
    return SecondDifferenceField(vals, skipped, float(probe))


@dataclass(frozen=True, eq=False)
class Condition3Result:
    C_est: float
    profile: np.ndarray = field(repr=False)
    excluded: np.ndarray = field(repr=False)
    applicable: bool = True
    divergent: bool = False


def condition3_check(f: RunningCost, H: PowerHamiltonian, grid: Grid) -> Condition3Result:
    """Grid sup of ``|Df| / (f - min f)^(1/p)`` over interior nodes.

    Nodes where ``f`` equals its minimum are excluded. The result is flagged
    divergent when the largest ratio in the outer tenth of the domain (by
    boundary distance) exceeds ten times the median ratio of the inner half.
    """
    pts = grid.points
    interior = grid.interior
    fv = f(pts)
    gap = fv - f.min_value
    excluded = interior & (gap <= 1e-14)
    use = interior & ~excluded
    profile = np.full(len(pts), np.nan)
    if not np.any(use):
        return Condition3Result(math.nan, profile, excluded, applicable=False)
    gnorm = np.linalg.norm(f.gradient(pts[use]), axis=1)
    profile[use] = gnorm / gap[use] ** (1.0 / H.p)
    dist = grid.domain.distance_to_boundary(pts)
    dmax = dist[use].max()
    outer = use & (dist <= 0.1 * dmax)
    inner = use & (dist >= 0.5 * dmax)
    divergent = False
    if np.any(outer) and np.any(inner):
        mid = np.median(profile[inner])
        divergent = bool(profile[outer].max() > 10.0 * max(mid, 1e-300))
    return Condition3Result(float(np.nanmax(profile)), profile, excluded, True, divergent)


def subsolution_constant(C: float, p: float) -> float:
    """``min{1/2, 2^(-1/p) / C}``."""
    if not C > 0:
        raise ParameterRangeError(f"constant C must be positive, got {C}")
    return min(0.5, 2.0 ** (-1.0 / p) / C)


def hitting_time_floor(c0: float, p: float) -> float:
    """Lower bound ``c0 / (p (1 - c0))`` for boundary hitting times."""
    if not 0.0 < c0 <= 0.5:
        raise ParameterRangeError(f"c0 must lie in (0, 1/2], got {c0}")
    return c0 / (p * (1.0 - c0))


@dataclass(frozen=True)
class SandwichReport:
    lower_violation: float
    upper_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.lower_violation <= self.tol and self.upper_violation <= self.tol

    @property
    def violation(self) -> float:
        return max(self.lower_violation, self.upper_violation)


def sandwich_check(u: ValueField, f: RunningCost, c0: float, tol: float) -> SandwichReport:
    """Check ``c0 (f - m) <= u - m <= f - m`` on admissible nodes, ``m = min f``."""
    grid = u.grid
    adm = grid.admissible
    fv = f(grid.points[adm]) - f.min_value
    uv = u.values[adm] - f.min_value
    lower = float(np.max(c0 * fv - uv))
    upper = float(np.max(uv - fv))
    return SandwichReport(lower, upper, float(tol))


@dataclass(frozen=True)
class BoundRow:
    start: tuple
    measured: float
    hitting_time: float
    T: float
    bound_shape: float
    inv_distance: float
    ratio: float


def semiconcavity_bound_check(
    u: ValueField,
    curves: Iterable[MinimizingCurve],
    probe: Optional[float] = None,
    directions: int = 8,
) -> list:
    """Measured second difference at each curve start against ``1 + 1/T``.

    ``T`` is the hitting time capped at the curve's horizon.
    """
    if probe is None:
        probe = 4.0 * u.grid.min_spacing
    rows = []
    for c in curves:
        measured = float(second_difference_at(u, c.start, probe, directions)[0])
        T = min(c.hitting_time, c.horizon)
        shape = 1.0 + 1.0 / T if T > 0 else math.inf
        dist = float(u.grid.domain.distance_to_boundary(c.start)[0])
        rows.append(
            BoundRow(
                tuple(np.atleast_1d(c.start).tolist()),
                measured,
                c.hitting_time,
                T,
                shape,
                1.0 / dist if dist > 0 else math.inf,
                measured / shape,
            )
        )
    return rows


def boundary_layer_maxima(
    u: ValueField,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    probe: Optional[float] = None,
    directions: int = 8,
) -> np.ndarray:
    """Max second difference on the level sets ``dist(x, boundary) = delta``.

    In 1D these are the two points at distance delta from the endpoints;
    in 2D the nodes within half a spacing of the level set.
    """
    grid = u.grid
    if probe is None:
        probe = 4.0 * grid.min_spacing
    out = []
    for delta in deltas:
        if grid.dimension == 1:
            pts = np.array([grid.domain.lower[0] + delta, grid.domain.upper[0] - delta])
        else:
            dist = grid.domain.distance_to_boundary(grid.points)
            sel = grid.interior & (np.abs(dist - delta) <= 0.5 * grid.min_spacing)
            pts = grid.points[sel]
        vals = second_difference_at(u, pts, probe, directions) if len(pts) else np.array([np.nan])
        out.append(float(np.nanmax(vals)) if np.any(~np.isnan(vals)) else math.nan)
    return np.asarray(out)


def region_maxima(
    u: ValueField,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    probe: Optional[float] = None,
    directions: int = 8,
) -> np.ndarray:
    """Sup of the second-difference field over nodes at distance >= delta.

    This is the semiconcavity constant measured on shrinking neighbourhoods
    of the boundary being excluded; it stays bounded exactly when the
    measured constant is global. Unlike the level-set values it does not
    shrink when the curvature itself vanishes at the boundary.
    """
    grid = u.grid
    sdf = second_difference_field(u, probe, directions)
    dist = grid.domain.distance_to_boundary(grid.points)
    out = []
    for delta in deltas:
        sel = grid.admissible & (dist >= delta - 1e-12) & ~np.isnan(sdf.values)
        out.append(float(sdf.values[sel].max()) if np.any(sel) else math.nan)
    return np.asarray(out)


def relative_spread(values: Sequence[float]) -> float:
    """``(max - min) / min`` of a positive sequence."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.min())


def is_blowup_trend(maxima: Sequence[float], ratio: float = 3.0) -> bool:
    """Strictly increasing as delta shrinks, with last/first above ``ratio``."""
    m = np.asarray(maxima, dtype=float)
    return bool(np.all(np.diff(m) > 0) and m[-1] / m[0] > ratio)


def is_bounded_trend(maxima: Sequence[float], spread: float = 0.25, atol: float = 1e-9) -> bool:
    """Relative spread below ``spread``; sequences that never exceed ``atol`` count as bounded."""
    m = np.asarray(maxima, dtype=float)
    if np.all(m <= atol):
        return True
    return bool(np.all(m > 0) and relative_spread(m) < spread)


@dataclass
class DiagnosticsReport:
    second_diff_field: np.ndarray
    condition3_profile: np.ndarray
    C_est: float
    c0: float
    sandwich_violation: float
    sandwich_passed: bool
    hitting_lower_bound: float
    deltas: tuple
    boundary_blowup_trend: np.ndarray
    region_maxima: np.ndarray
    probe: float
    bound_rows: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-ready scalars and flags (per-node arrays omitted)."""
        return {
            "C_est": _num(self.C_est),
            "c0": _num(self.c0),
            "sandwich_violation": _num(self.sandwich_violation),
            "sandwich_passed": self.sandwich_passed,
            "hitting_lower_bound": _num(self.hitting_lower_bound),
            "probe": self.probe,
            "deltas": list(self.deltas),
            "boundary_blowup_trend": [_num(v) for v in self.boundary_blowup_trend],
            "region_maxima": [_num(v) for v in self.region_maxima],
            "second_difference_max": _num(float(np.nanmax(self.second_diff_field)))
            if np.any(~np.isnan(self.second_diff_field))
            else None,
            "bound_rows": [{k: _num(v) if isinstance(v, float) else v for k, v in asdict(r).items()} for r in self.bound_rows],
            "flags": dict(self.flags),
        }


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def diagnose(
    u: ValueField,
    H: PowerHamiltonian,
    f: RunningCost,
    curves: Sequence[MinimizingCurve] = (),
    probe: Optional[float] = None,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    tol: Optional[float] = None,
    directions: int = 8,
) -> DiagnosticsReport:
    """Run every check on one solved field and collect verdict flags."""
    grid = u.grid
    if probe is None:
        probe = 4.0 * grid.min_spacing
    if tol is None:
        tol = 2.0 * (u.residual if np.isfinite(u.residual) else 0.0) + grid.min_spacing
    sdf = second_difference_field(u, probe, directions)
    c3 = condition3_check(f, H, grid)
    if c3.applicable and c3.C_est > 0:
        c0 = subsolution_constant(c3.C_est, H.p)
    else:
        c0 = 0.5
    sw = sandwich_check(u, f, c0, tol)
    floor = hitting_time_floor(c0, H.p)
    valid = [d for d in deltas if d >= probe]
    trend = boundary_layer_maxima(u, valid, probe, directions) if valid else np.array([])
    regional = region_maxima(u, valid, probe, directions) if valid else np.array([])
    rows = semiconcavity_bound_check(u, curves, probe, directions) if curves else []
    flags = {
        "condition3_divergent": c3.divergent,
        "boundary_is_min": f.boundary_is_min,
        "sandwich_passed": sw.passed,
    }
    finite_trend = len(trend) >= 2 and np.all(np.isfinite(trend))
    flags["blowup_at_boundary"] = bool(finite_trend and is_blowup_trend(trend))
    finite_region = len(regional) >= 2 and np.all(np.isfinite(regional))
    flags["globally_semiconcave"] = bool(
        finite_region and not flags["blowup_at_boundary"] and is_bounded_trend(regional)
    )
    if curves:
        flags["finite_hitting_time"] = any(c.escaped for c in curves)
        flags["infinite_hitting_time"] = not flags["finite_hitting_time"]
        flags["hitting_times_above_floor"] = all(min(c.hitting_time, c.horizon) > floor for c in curves)
    return DiagnosticsReport(
        sdf.values,
        c3.profile,
        c3.C_est,
        c0,
        sw.violation - sw.tol,
        sw.passed,
        floor,
        tuple(valid),
        trend,
        regional,
        float(probe),
        rows,
        flags,
    )


__all__ = [
    "Condition3Result",
    "DiagnosticsReport",
    "SandwichReport",
    "SecondDifferenceField",
    "boundary_layer_maxima",
    "condition3_check",
    "diagnose",
    "f_on_grid",
    "hitting_time_floor",
    "is_blowup_trend",
    "is_bounded_trend",
    "relative_spread",
    "sandwich_check",
    "second_difference_at",
    "second_difference_field",
    "semiconcavity_bound_check",
    "subsolution_constant",
]
