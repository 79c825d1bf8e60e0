"""Minimizing curves: feedback extraction, Hamilton's ODE, pathwise checks.

Along a minimizer the velocity is tied to the value gradient by
``Du(xi) = -q C |xi'|^(q-2) xi'``, so a solved field yields curves through
the feedback ``xi' = feedback_velocity(H, grad u(xi))``. Independently the
pair ``(xi, eta)`` with ``eta = e^{-s} q C |xi'|^(q-2) xi'`` obeys

    xi'  = a p e^{s (p-1)} |eta|^(p-2) eta
    eta' = e^{-s} Df(xi)

which ``hamilton_ode`` integrates from a caller-supplied costate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .domain import as_points
from .errors import DomainError, RunawayError, StencilError
from .hamiltonian import PowerHamiltonian, RunningCost
from .solver import ValueField


@dataclass(frozen=True, eq=False)
class MinimizingCurve:
    start: np.ndarray
    times: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    velocities: np.ndarray = field(repr=False)
    costate: np.ndarray = field(repr=False)
    running_cost: np.ndarray = field(repr=False)
    hitting_time: float = math.inf
    horizon: float = math.inf
    boundary_tolerance: float = 0.0
    method: str = "feedback"

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def escaped(self) -> bool:
        return math.isfinite(self.hitting_time)

    @property
    def stationary(self) -> bool:
        return bool(np.all(np.linalg.norm(self.velocities, axis=1) == 0.0))

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def position_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.stack([np.interp(s, self.times, self.positions[:, k]) for k in range(self.dim)], axis=-1)

    def cost_at(self, s) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.times, self.running_cost)


def _finish_curve(H, f, start, times, pos, vel, hitting, horizon, eps, method, costate=None):
    speed = np.linalg.norm(vel, axis=1)
    if costate is None:
        costate = np.exp(-times)[:, None] * H.momentum(vel)
    integrand = np.exp(-times) * (H.legendre_coeff * speed**H.q + f(pos))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (integrand[1:] + integrand[:-1]))])
    return MinimizingCurve(
        np.asarray(start, dtype=float),
        times,
        pos,
        vel,
        costate,
        cum,
        float(hitting),
        float(horizon),
        float(eps),
        method,
    )


def curve_from_samples(
    H: PowerHamiltonian,
    f: RunningCost,
    times,
    positions,
    velocities,
    hitting_time: float = math.inf,
    method: str = "samples",
) -> MinimizingCurve:
    """Wrap externally sampled ``(s, xi, xi')`` data, e.g. a closed-form curve."""
    times = np.asarray(times, dtype=float)
    pos = as_points(positions, f.dim)
    vel = as_points(velocities, f.dim)
    if not (len(times) == len(pos) == len(vel)) or np.any(np.diff(times) <= 0):
        raise ValueError("need increasing times and one position and velocity per time")
    return _finish_curve(H, f, pos[0], times, pos, vel, hitting_time, float(times[-1]), 0.0, method)


# ---------------------------------------------------------------------------
# feedback extraction


@njit(cache=True)
def _interp(pt, origin, spacing, shape, nodal):
    """Multilinear interpolation of nodal rows, ignoring NaN corners."""
    d = pt.shape[0]
    m = nodal.shape[1]
    cell = np.empty(d, dtype=np.int64)
    t = np.empty(d)
    for k in range(d):
        r = (pt[k] - origin[k]) / spacing[k]
        c = int(math.floor(r))
        c = min(max(c, 0), shape[k] - 2)
        tk = r - c
        t[k] = min(max(tk, 0.0), 1.0)
        cell[k] = c
    out = np.zeros(m)
    total = 0.0
    for corner in range(2**d):
        w = 1.0
        flat = 0
        for k in range(d):
            bit = (corner >> k) & 1
            w *= t[k] if bit == 1 else 1.0 - t[k]
            flat = flat * shape[k] + cell[k] + bit
        if w == 0.0:
            continue
        row = nodal[flat]
        if math.isnan(row[0]):
            continue
        for j in range(m):
            out[j] += w * row[j]
        total += w
    if total <= 1e-12:
        out[:] = np.nan
        return out
    for j in range(m):
        out[j] /= total
    return out


@njit(cache=True)
def _velocity(pt, origin, spacing, shape, grad_nodes, qc, expo, g_floor):
    g = _interp(pt, origin, spacing, shape, grad_nodes)
    d = g.shape[0]
    v = np.zeros(d)
    if math.isnan(g[0]):
        v[:] = np.nan
        return v
    n = 0.0
    for k in range(d):
        n += g[k] * g[k]
    n = math.sqrt(n)
    if n < g_floor:
        return v
    speed = (n / qc) ** expo
    for k in range(d):
        v[k] = -speed * g[k] / n
    return v


@njit(cache=True)
def _feedback_heun(x0, dt, nsteps, origin, spacing, shape, grad_nodes, sd_nodes, qc, expo, g_floor, eps):
    d = x0.shape[0]
    times = np.empty(nsteps + 1)
    pos = np.empty((nsteps + 1, d))
    vel = np.empty((nsteps + 1, d))
    times[0] = 0.0
    pos[0] = x0
    hit = np.inf
    n_used = nsteps
    x = x0.copy()
    v1 = _velocity(x, origin, spacing, shape, grad_nodes, qc, expo, g_floor)
    if math.isnan(v1[0]):
        return times[:1], pos[:1], vel[:1], -1.0
    vel[0] = v1
    sd_x = _interp(x, origin, spacing, shape, sd_nodes)[0]
    for n in range(nsteps):
        still = True
        for k in range(d):
            if v1[k] != 0.0:
                still = False
        if still:
            # stationary: the curve rests here for the remaining horizon
            for j in range(n + 1, nsteps + 1):
                times[j] = (j) * dt
                pos[j] = x
                vel[j] = 0.0
            break
        xp = x + dt * v1
        sd_p = _interp(xp, origin, spacing, shape, sd_nodes)[0]
        xn = xp
        if not math.isnan(sd_p) and sd_p < -eps:
            v2 = _velocity(xp, origin, spacing, shape, grad_nodes, qc, expo, g_floor)
            if not math.isnan(v2[0]):
                xn = x + 0.5 * dt * (v1 + v2)
        sd_n = _interp(xn, origin, spacing, shape, sd_nodes)[0]
        if math.isnan(sd_n) or sd_n >= -eps:
            # first crossing of the level {sd = -eps}, linear in the step
            theta = 1.0
            if not math.isnan(sd_n) and sd_n != sd_x:
                theta = min(max((-eps - sd_x) / (sd_n - sd_x), 0.0), 1.0)
            x = x + theta * (xn - x)
            times[n + 1] = n * dt + theta * dt
            pos[n + 1] = x
            v_end = _velocity(x, origin, spacing, shape, grad_nodes, qc, expo, g_floor)
            if math.isnan(v_end[0]):
                v_end = v1
            vel[n + 1] = v_end
            hit = times[n + 1]
            n_used = n + 1
            break
        x = xn
        sd_x = sd_n
        v1 = _velocity(x, origin, spacing, shape, grad_nodes, qc, expo, g_floor)
        if math.isnan(v1[0]):
            return times[: n + 1], pos[: n + 1], vel[: n + 1], -2.0
        times[n + 1] = (n + 1) * dt
        pos[n + 1] = x
        vel[n + 1] = v1
    return times[: n_used + 1], pos[: n_used + 1], vel[: n_used + 1], hit


def default_g_floor(f_max: float) -> float:
    return 1e-8 * (1.0 + abs(f_max))


def extract_curve(
    u: ValueField,
    H: PowerHamiltonian,
    f: RunningCost,
    x0,
    horizon: float,
    dt_curve: Optional[float] = None,
    boundary_tolerance: Optional[float] = None,
    g_floor: Optional[float] = None,
) -> MinimizingCurve:
    """Integrate the gradient feedback from ``x0`` with Heun's method.

    Stops at ``horizon`` or at the first time the curve comes within
    ``boundary_tolerance`` (default two grid spacings) of the boundary, which
    is then recorded as the hitting time. Where ``|grad u|`` drops below
    ``g_floor`` the curve rests.
    """
    grid = u.grid
    domain = grid.domain
    pt = as_points(x0, grid.dimension)[0]
    eps = 2.0 * grid.min_spacing if boundary_tolerance is None else float(boundary_tolerance)
    sd0 = domain.signed_distance(pt)[0]
    if not sd0 < -domain.boundary_tolerance:
        raise DomainError(f"start point {pt} is not interior")
    if g_floor is None:
        g_floor = default_g_floor(float(np.nanmax(f(grid.points[grid.admissible]))))
    dt = grid.min_spacing / 2.0 if dt_curve is None else float(dt_curve)
    nsteps = max(1, int(math.ceil(horizon / dt - 1e-9)))
    dt = horizon / nsteps
    sd_nodes = np.where(grid.admissible, domain.signed_distance(grid.points), np.nan)[:, None]
    times, pos, vel, hit = _feedback_heun(
        pt.copy(),
        dt,
        nsteps,
        grid.origin,
        np.asarray(grid.spacing, dtype=float),
        np.asarray(grid.shape, dtype=np.int64),
        np.ascontiguousarray(u.nodal_gradient()),
        np.ascontiguousarray(sd_nodes),
        H.q * H.legendre_coeff,
        1.0 / (H.q - 1.0),
        float(g_floor),
        eps,
    )
    if hit < 0:
        raise StencilError(f"gradient stencil unavailable along the curve from {pt} (t={times[-1]:.4f})")
    if sd0 >= -eps:
        hit = 0.0
    return _finish_curve(H, f, pt, times, pos, vel, hit, horizon, eps, "feedback")


# ---------------------------------------------------------------------------
# Hamilton's ODE


def hamilton_ode(
    H: PowerHamiltonian,
    f: RunningCost,
    x0,
    eta0,
    horizon: float,
    dt_curve: float = 1e-3,
    domain=None,
    boundary_tolerance: float = 0.0,
) -> MinimizingCurve:
    """RK4 for the characteristic system from ``(x0, eta0)``.

    With a ``domain`` the integration stops at the first time the curve
    reaches distance ``boundary_tolerance`` of the boundary (hitting time
    recorded). Leaving the domain's bounding box raises RunawayError, the
    signature of a shot that is not minimizing.
    """
    dim = f.dim
    x = as_points(x0, dim)[0].copy()
    eta = as_points(eta0, dim)[0].copy()
    if domain is not None and not domain.contains_closed(x)[0]:
        raise DomainError(f"start point {x} is outside the closed domain")
    ap = H.a * H.p
    pm2 = H.p - 2.0
    pm1 = H.p - 1.0

    def xdot(s, e):
        n = np.linalg.norm(e)
        if n == 0.0:
            return np.zeros_like(e)
        return ap * math.exp(s * pm1) * n**pm2 * e

    def etadot(s, xx):
        return math.exp(-s) * f.gradient(xx)[0]

    nsteps = max(1, int(math.ceil(horizon / dt_curve - 1e-9)))
    h = horizon / nsteps
    times = [0.0]
    pos = [x.copy()]
    etas = [eta.copy()]
    hit = math.inf
    lo = hi = None
    if domain is not None:
        lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
        sd_prev = domain.signed_distance(x)[0]
    for n in range(nsteps):
        s = n * h
        k1x, k1e = xdot(s, eta), etadot(s, x)
        k2x, k2e = xdot(s + h / 2, eta + h / 2 * k1e), etadot(s + h / 2, x + h / 2 * k1x)
        k3x, k3e = xdot(s + h / 2, eta + h / 2 * k2e), etadot(s + h / 2, x + h / 2 * k2x)
        k4x, k4e = xdot(s + h, eta + h * k3e), etadot(s + h, x + h * k3x)
        xn = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        en = eta + h / 6 * (k1e + 2 * k2e + 2 * k3e + k4e)
        if domain is not None:
            sd = domain.signed_distance(xn)[0]
            if sd >= -boundary_tolerance:
                theta = 1.0
                if sd != sd_prev:
                    theta = min(max((-boundary_tolerance - sd_prev) / (sd - sd_prev), 0.0), 1.0)
                xn = x + theta * (xn - x)
                en = eta + theta * (en - eta)
                times.append(s + theta * h)
                pos.append(xn)
                etas.append(en)
                hit = times[-1]
                break
            if np.any(xn < lo - 1e-9) or np.any(xn > hi + 1e-9):
                raise RunawayError(f"trajectory left the bounding box at s={s + h:.4f}", s + h)
            sd_prev = sd
        x, eta = xn, en
        times.append(s + h)
        pos.append(x.copy())
        etas.append(eta.copy())
    times = np.asarray(times)
    pos = np.asarray(pos)
    etas = np.asarray(etas)
    vel = np.array([xdot(s, e) for s, e in zip(times, etas)])
    return _finish_curve(
        H, f, pos[0], times, pos, vel, hit, horizon, boundary_tolerance, "hamilton", costate=etas
    )


# ---------------------------------------------------------------------------
# pathwise checks


def el_residual(curve: MinimizingCurve, H: PowerHamiltonian, f: RunningCost, g_floor: float = 1e-8) -> float:
    """Sup deviation of ``d/ds(e^{-s} q C |xi'|^(q-2) xi')`` from ``e^{-s} Df(xi)``.

    Evaluated at interior samples whose velocity and both neighbours'
    exceed ``g_floor`` in norm; zero for a stationary curve.
    """
    if curve.stationary or len(curve.times) < 3:
        return 0.0
    s = curve.times
    mom = np.exp(-s)[:, None] * H.momentum(curve.velocities)
    moving = np.linalg.norm(curve.velocities, axis=1) > g_floor
    ok = moving[1:-1] & moving[:-2] & moving[2:]
    if not np.any(ok):
        return 0.0
    dm = np.gradient(mom, s, axis=0, edge_order=2)[1:-1]
    force = np.exp(-s[1:-1])[:, None] * f.gradient(curve.positions[1:-1])
    dev = np.linalg.norm(dm - force, axis=1)
    return float(dev[ok].max())


def dpp_defect(curve: MinimizingCurve, u: ValueField, s) -> np.ndarray:
    """``u(x0) - [cost(0..s) + e^{-s} u(xi(s))]`` at times ``s``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < curve.times[0] - 1e-12) or np.any(s > curve.end_time + 1e-12):
        raise ValueError("requested times fall outside the curve's range")
    u0 = u(curve.start)[0]
    tail = u(curve.position_at(s))
    out = u0 - (curve.cost_at(s) + np.exp(-s) * tail)
    return out if out.size > 1 else float(out[0])


def value_drift(curve: MinimizingCurve, u: ValueField) -> float:
    """Spread of ``cost(s) + e^{-s} u(xi(s))`` over the curve's samples."""
    vals = curve.running_cost + np.exp(-curve.times) * u(curve.positions)
    return float(np.nanmax(vals) - np.nanmin(vals))


def speed_gradient_gap(curve: MinimizingCurve, u: ValueField, H: PowerHamiltonian) -> float:
    """Sup of ``| q C |xi'|^(q-1) - |grad u(xi)| |`` over samples."""
    speed = np.linalg.norm(curve.velocities, axis=1)
    grad = u.gradient(curve.positions)
    return float(np.max(np.abs(H.q * H.legendre_coeff * speed ** (H.q - 1.0) - np.linalg.norm(grad, axis=1))))


def energy_identity(curve: MinimizingCurve, u: ValueField, f: RunningCost, H: PowerHamiltonian):
    """Quadrature of ``p (f - u)`` along the curve from the argmax of ``f``.

    Returns ``(integral, u(xi(t1)), t1)``; along a minimizer that never
    reaches the boundary the integral tends to ``u(xi(t1)) - lim u(xi(s))``.
    """
    fv = f(curve.positions)
    uv = u(curve.positions)
    i1 = int(np.argmax(fv))
    s = curve.times[i1:]
    integrand = H.p * (fv[i1:] - uv[i1:])
    integral = float(np.sum(0.5 * np.diff(s) * (integrand[1:] + integrand[:-1])))
    return integral, float(uv[i1]), float(curve.times[i1])
