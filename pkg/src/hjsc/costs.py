"""Builtin running-cost families.

Every family is radial: in one dimension ``r = |x|``, in two ``r = |x|_2``.
A family supplies the profile ``g(r)`` and its derivative; the gradient is
``g'(r) x / r`` (zero at the origin, where every family here is either
smooth with ``g'(0) = 0`` or has a cone tip and picks the zero subgradient).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .domain import Domain, as_points, boundary_samples
from .hamiltonian import RunningCost, validate_gradient

# name -> (profile, derivative, upper bound on the profile's second derivative)
Profile = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray], float]


def _abs_cone(radius: float = 1.0) -> Profile:
    return (lambda r: radius - r, lambda r: -np.ones_like(r), 0.0)


def _power_well(center: float = 0.5) -> Profile:
    def g(r):
        return np.where(r >= center, (r - center) ** 2, 0.0)

    def dg(r):
        return np.where(r >= center, 2.0 * (r - center), 0.0)

    return g, dg, 2.0


def _quadratic(scale: float = 1.0) -> Profile:
    return (lambda r: scale * r**2, lambda r: 2.0 * scale * r, 2.0 * scale)


def _bump(m: int = 1) -> Profile:
    m = int(m)
    if m < 1:
        raise ValueError("bump exponent m must be >= 1")
    k = 2 * m

    def g(r):
        return np.clip(1.0 - r**2, 0.0, None) ** k

    def dg(r):
        return -2.0 * k * r * np.clip(1.0 - r**2, 0.0, None) ** (k - 1)

    # sup of d2/dr2 over [0, 1] is attained at r = 1 for m = 1 (value 8)
    r = np.linspace(0.0, 1.0, 2001)
    d2 = np.gradient(dg(r), r)
    return g, dg, float(d2.max())


def _piecewise_f2() -> Profile:
    def g(r):
        return np.where(r <= 0.5, r**2, -r / 4.0 + 3.0 / 8.0)

    def dg(r):
        return np.where(r <= 0.5, 2.0 * r, -0.25)

    return g, dg, 2.0


def _constant(value: float = 0.0) -> Profile:
    return (lambda r: np.full_like(r, value), lambda r: np.zeros_like(r), 0.0)


FAMILIES = {
    "abs-cone": _abs_cone,
    "power-well": _power_well,
    "quadratic": _quadratic,
    "bump": _bump,
    "piecewise-f2": _piecewise_f2,
    "constant": _constant,
}


def sampled_minimum(f: RunningCost, domain: Domain, n: int = 2001) -> float:
    """Grid minimum of ``f`` over the closed domain, refined 4x near the argmin."""
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    per_axis = n if domain.dim == 1 else int(np.sqrt(n * 50))
    axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(domain.dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    pts = np.vstack([pts[domain.contains_closed(pts)], boundary_samples(domain)])
    pts = pts[domain.contains_closed(pts)]
    vals = f(pts)
    best = pts[np.argmin(vals)]
    h = (hi - lo) / (per_axis - 1)
    fine = [np.linspace(best[k] - h[k], best[k] + h[k], 9) for k in range(domain.dim)]
    fpts = np.stack(np.meshgrid(*fine, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    fpts = fpts[domain.contains_closed(fpts)]
    return float(min(vals.min(), f(fpts).min() if len(fpts) else np.inf))


def make_cost(family: str, domain: Domain, validate: bool = True, **params) -> RunningCost:
    """Build a RunningCost from a builtin family on ``domain``.

    ``min_value`` is the sampled minimum over the closed domain, snapped to
    zero when within 1e-12 of it; ``boundary_is_min`` is read off boundary
    samples.
    """
    if family not in FAMILIES:
        raise KeyError(f"unknown cost family {family!r}; choose from {sorted(FAMILIES)}")
    g, dg, d2max = FAMILIES[family](**params)
    dim = domain.dim

    def f_eval(pts):
        pts = as_points(pts, dim)
        return g(np.linalg.norm(pts, axis=-1))

    def f_grad(pts):
        pts = as_points(pts, dim)
        r = np.linalg.norm(pts, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, dg(r) / r, 0.0)
        return scale[:, None] * pts

    provisional = RunningCost(f_eval, f_grad, -np.inf, dim=dim, name=family)
    fmin = sampled_minimum(provisional, domain)
    if abs(fmin) < 1e-12:
        fmin = 0.0
    on_boundary = provisional(boundary_samples(domain))
    boundary_is_min = bool(np.all(np.abs(on_boundary - fmin) <= 1e-9))
    cost = RunningCost(
        f_eval,
        f_grad,
        fmin,
        boundary_is_min=boundary_is_min,
        semiconcavity_constant_hint=d2max,
        dim=dim,
        name=family,
    )
    if validate:
        validate_gradient(cost, domain)
    return cost


def max_value(f: RunningCost, domain: Domain, n: int = 2001) -> float:
    neg = RunningCost(lambda p: -f.eval(p), lambda p: -f.grad(p), -np.inf, dim=f.dim)
    return -sampled_minimum(neg, domain, n)
