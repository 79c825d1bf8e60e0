"""Worked one-dimensional problems with closed-form or integrated references."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .costs import make_cost
from .domain import Domain, as_points
from .errors import DomainError
from .hamiltonian import PowerHamiltonian, RunningCost
from .reference import Reference1D, integrate_branch

VERDICTS = ("globally_semiconcave", "blowup_at_boundary", "infinite_hitting_time", "finite_hitting_time")


@dataclass(eq=False)
class ExampleCase:
    id: str
    title: str
    H: PowerHamiltonian
    f: RunningCost
    domain: Domain
    verdicts: frozenset
    reference_builder: Optional[Callable[["ExampleCase"], Callable]] = field(default=None, repr=False)
    reference_curve: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(default=None, repr=False)
    # where reference_u is trusted; None means the whole closed domain
    reference_support: Optional[tuple] = None

    def __post_init__(self):
        unknown = set(self.verdicts) - set(VERDICTS)
        if unknown:
            raise ValueError(f"unknown verdicts {unknown}")
        if "globally_semiconcave" in self.verdicts and "blowup_at_boundary" in self.verdicts:
            raise ValueError("a case cannot be both globally semiconcave and blow up")
        if "infinite_hitting_time" in self.verdicts and "finite_hitting_time" in self.verdicts:
            raise ValueError("hitting-time verdicts are exclusive")

    @cached_property
    def reference_u(self) -> Optional[Callable]:
        return None if self.reference_builder is None else self.reference_builder(self)

    def reference_mask(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.reference_support is None:
            return np.ones(x.shape, dtype=bool)
        lo, hi = self.reference_support
        return (x >= lo) & (x <= hi)


def _e2_curve(x0: float, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if abs(x0) <= 0.5:
        return np.full(s.shape, float(x0))
    anchor = math.copysign(0.5, x0)
    return anchor + (x0 - anchor) * np.exp(-s)


def _e1_reference(case: ExampleCase) -> Reference1D:
    right = integrate_branch(case.H, case.f, 1.0, 0.0, -1, 0.0, step=1e-5)
    return Reference1D.stitch(right.mirrored(), right)


def _e5_reference(case: ExampleCase) -> Reference1D:
    right = integrate_branch(case.H, case.f, 1.0, 0.0, -1, 0.0, step=1e-5)
    return Reference1D.stitch(right.mirrored(), right)


def catalog() -> list:
    """The five example problems, all on (-1, 1)."""
    dom = Domain.interval(-1.0, 1.0)
    cases = [
        ExampleCase(
            "E1",
            "cone f = 1 - |x|, a = 1, p = 2",
            PowerHamiltonian(2.0, 1.0),
            make_cost("abs-cone", dom),
            dom,
            frozenset({"blowup_at_boundary", "finite_hitting_time"}),
            _e1_reference,
        ),
        ExampleCase(
            "E2",
            "flat-bottom well f = (|x| - 1/2)^2 outside (-1/2, 1/2), a = 1/2, p = 2",
            PowerHamiltonian(2.0, 0.5),
            make_cost("power-well", dom, center=0.5),
            dom,
            frozenset({"globally_semiconcave", "infinite_hitting_time"}),
            lambda case: (lambda x: 0.5 * np.where(np.abs(x) >= 0.5, (np.abs(x) - 0.5) ** 2, 0.0)),
            _e2_curve,
        ),
        ExampleCase(
            "E3",
            "quadratic f = x^2, a = 1/2, p = 2",
            PowerHamiltonian(2.0, 0.5),
            make_cost("quadratic", dom),
            dom,
            frozenset({"globally_semiconcave"}),
            lambda case: (lambda x: 0.5 * np.asarray(x, dtype=float) ** 2),
            lambda x0, s: x0 * np.exp(-np.asarray(s, dtype=float)),
        ),
        ExampleCase(
            "E4",
            "f2 = x^2 on [-1/2, 1/2], -|x|/4 + 3/8 outside, a = 1/2, p = 2",
            PowerHamiltonian(2.0, 0.5),
            make_cost("piecewise-f2", dom),
            dom,
            frozenset({"blowup_at_boundary"}),
            lambda case: (lambda x: 0.5 * np.asarray(x, dtype=float) ** 2),
            reference_support=(-0.1, 0.1),
        ),
        ExampleCase(
            "E5",
            "bump f = (1 - x^2)^2, a = 1, p = 2",
            PowerHamiltonian(2.0, 1.0),
            make_cost("bump", dom, m=1),
            dom,
            frozenset({"globally_semiconcave", "infinite_hitting_time"}),
            _e5_reference,
        ),
        ExampleCase(
            "E5-p1.5",
            "bump f = (1 - x^2)^2, a = 1, p = 3/2",
            PowerHamiltonian(1.5, 1.0),
            make_cost("bump", dom, m=1),
            dom,
            frozenset({"globally_semiconcave", "infinite_hitting_time"}),
            _e5_reference,
        ),
    ]
    return cases


def get_case(case_id: str) -> ExampleCase:
    for case in catalog():
        if case.id == case_id:
            return case
    raise KeyError(f"unknown example {case_id!r}")


# ---------------------------------------------------------------------------
# explicit competitor paths


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    """Linear interpolation of ``knots`` at ``times``, constant afterwards."""

    times: np.ndarray
    knots: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        k = np.asarray(self.knots, dtype=float)
        if k.ndim == 1:
            k = k[:, None]
        if len(t) != len(k) or len(t) < 1 or np.any(np.diff(t) <= 0) or t[0] != 0.0:
            raise ValueError("times must start at 0 and increase, one per knot")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "knots", k)

    @property
    def breakpoints(self) -> np.ndarray:
        return self.times

    def position(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.stack([np.interp(s, self.times, self.knots[:, k]) for k in range(self.knots.shape[1])], axis=-1)

    def velocity(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if len(self.times) == 1:
            return np.zeros((len(s), self.knots.shape[1]))
        slopes = np.diff(self.knots, axis=0) / np.diff(self.times)[:, None]
        seg = np.searchsorted(self.times, s, side="right") - 1
        out = np.zeros((len(s), self.knots.shape[1]))
        inside = (seg >= 0) & (seg < len(slopes))
        out[inside] = slopes[seg[inside]]
        return out


def path_cost(
    H: PowerHamiltonian,
    f: RunningCost,
    path,
    horizon: float,
    domain: Optional[Domain] = None,
    check_samples: int = 2001,
) -> float:
    """Discounted cost ``int e^{-s} L(path, -path')`` by adaptive quadrature.

    Each smooth piece between breakpoints is integrated separately up to
    ``horizon``; beyond it the path is taken to rest at ``path(horizon)``,
    contributing ``e^{-horizon} f(path(horizon))``.
    """
    if domain is not None:
        s = np.linspace(0.0, horizon, check_samples)
        if not np.all(domain.contains_closed(path.position(s))):
            raise DomainError("competitor path leaves the closed domain")
    C, q = H.legendre_coeff, H.q

    def integrand(s):
        v = path.velocity(s)[0]
        return math.exp(-s) * (C * float(np.linalg.norm(v)) ** q + float(f(path.position(s))[0]))

    cuts = [b for b in getattr(path, "breakpoints", []) if 0.0 < b < horizon]
    edges = [0.0, *sorted(cuts), horizon]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    end = path.position(horizon)
    total += math.exp(-horizon) * float(f(end)[0])
    return total


def random_competitor(rng: np.random.Generator, x0, domain: Domain, n_knots: int = 4, horizon: float = 6.0):
    """A random admissible piecewise-linear path from ``x0``."""
    x0 = as_points(x0, domain.dim)[0]
    times = np.concatenate([[0.0], np.sort(rng.uniform(0.0, horizon, n_knots - 1))])
    times = np.unique(times)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    knots = [x0]
    while len(knots) < len(times):
        cand = rng.uniform(lo, hi)
        if domain.contains_closed(cand)[0]:
            knots.append(cand)
    return PiecewiseLinearPath(times, np.asarray(knots))


def matching_halfwidth(u, reference: Callable, tol: float) -> float:
    """Largest ``w`` with ``|u - reference| <= tol`` at every node in ``[-w, w]`` (1D)."""
    x = u.grid.points[:, 0]
    bad = np.abs(u.values - reference(x)) > tol
    if not np.any(bad):
        return float(np.max(np.abs(x)))
    return float(np.min(np.abs(x[bad]))) - u.grid.min_spacing
