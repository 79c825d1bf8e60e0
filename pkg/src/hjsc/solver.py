"""Semi-Lagrangian value iteration for the state-constrained problem.

The discrete dynamic programming step at an admissible node ``x`` is

    u_new(x) = min_w  (1 - e^{-dt}) L(x, w) + e^{-dt} U(x - dt w)

over controls ``|w| <= R`` whose foot point ``x - dt w`` stays in the
closed domain. ``U`` is the multilinear interpolant of the previous iterate
restricted to admissible corners. The zero control is always available, so
the admissible set is never empty.

Two minimizations are offered. ``sampled`` takes the min over a fixed
control set; its foot stencils do not depend on the iterate, so they are
assembled once and each sweep is a gather and a min. ``exact`` (1D only)
minimizes over the whole interval ``[-R, R]``: on each grid cell ``U`` is
affine, so the minimizer there is the clipped stationary point of
``C|w|^q + slope * w``. Sampled speeds cannot resolve the slow optimal
motions next to the boundary, where ``u`` itself is tiny, so the exact mode
is the 1D default.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numba import njit

from .costs import max_value
from .domain import BOUNDARY, EXTERIOR, INTERIOR, Domain, as_points
from .errors import DomainError, NonConvergenceError, StencilError
from .hamiltonian import PowerHamiltonian, RunningCost, feedback_speed

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    spacing: tuple
    shape: tuple
    points: np.ndarray = field(repr=False)
    tags: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.domain.dim

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.domain.lower, dtype=float)

    @property
    def admissible(self) -> np.ndarray:
        return self.tags != EXTERIOR

    @property
    def interior(self) -> np.ndarray:
        return self.tags == INTERIOR

    @property
    def min_spacing(self) -> float:
        return float(min(self.spacing))

    def axes(self) -> list:
        o = self.origin
        return [o[k] + self.spacing[k] * np.arange(self.shape[k]) for k in range(self.dimension)]

    def node_index(self, x) -> int:
        """Flat index of the lattice node at ``x`` (must coincide with a node)."""
        pt = as_points(x, self.dimension)[0]
        rel = (pt - self.origin) / np.asarray(self.spacing)
        ij = np.rint(rel).astype(int)
        if np.any(np.abs(rel - ij) > 1e-6) or np.any(ij < 0) or np.any(ij >= np.asarray(self.shape)):
            raise DomainError(f"{pt} is not a grid node")
        return int(np.ravel_multi_index(tuple(ij), self.shape))


def build_grid(domain: Domain, target_spacing: float) -> Grid:
    """Uniform lattice over the bounding box with spacing <= target on each axis."""
    extent = np.subtract(domain.upper, domain.lower)
    if not (target_spacing > 0 and target_spacing <= domain.diameter / 4 + 1e-15):
        raise DomainError(f"target spacing {target_spacing} must lie in (0, diameter/4]")
    counts = [int(np.ceil(e / target_spacing - 1e-9)) + 1 for e in extent]
    spacing = tuple(float(e / (n - 1)) for e, n in zip(extent, counts))
    axes = [domain.lower[k] + spacing[k] * np.arange(counts[k]) for k in range(domain.dim)]
    for k in range(domain.dim):
        axes[k][-1] = domain.upper[k]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    tags = domain.classify(pts)
    interior = (tags == INTERIOR).reshape(counts)
    for k in range(domain.dim):
        if interior.sum(axis=k).max() < 3:
            raise DomainError("degenerate domain: fewer than 3 interior nodes along some axis")
    return Grid(domain, spacing, tuple(counts), pts, tags)


# ---------------------------------------------------------------------------
# interpolation


def _stencil(grid: Grid, pts: np.ndarray):
    """Corner indices and constrained multilinear weights for each point.

    Returns ``(idx, wts, ok)`` with shapes (N, 2^d), (N, 2^d), (N,). Corners
    outside the closed domain receive weight zero and the rest are
    renormalized; ``ok`` is False where no admissible corner remains or the
    point lies outside the closed domain.
    """
    d = grid.dimension
    pts = np.asarray(pts, dtype=float).reshape(-1, d)
    shape = np.asarray(grid.shape)
    rel = (pts - grid.origin) / np.asarray(grid.spacing)
    cell = np.clip(np.floor(rel).astype(np.int64), 0, shape - 2)
    t = np.clip(rel - cell, 0.0, 1.0)
    n = len(pts)
    idx = np.empty((n, 2**d), dtype=np.int64)
    wts = np.empty((n, 2**d))
    for c in range(2**d):
        offs = np.array([(c >> k) & 1 for k in range(d)])
        ij = cell + offs
        idx[:, c] = np.ravel_multi_index(tuple(ij.T), grid.shape)
        wts[:, c] = np.prod(np.where(offs == 1, t, 1.0 - t), axis=1)
    wts = np.where(grid.admissible[idx], wts, 0.0)
    total = wts.sum(axis=1)
    ok = (total > 1e-12) & grid.domain.contains_closed(pts)
    wts = np.where(ok[:, None], wts / np.where(total > 0, total, 1.0)[:, None], 0.0)
    return idx, wts, ok


@dataclass(frozen=True, eq=False)
class ValueField:
    grid: Grid
    values: np.ndarray = field(repr=False)
    residual: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals[~self.grid.admissible] = np.nan
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, x) -> np.ndarray:
        return self.interpolate(x)

    def interpolate(self, x) -> np.ndarray:
        """Constrained multilinear interpolant; NaN where undefined."""
        pts = as_points(x, self.grid.dimension)
        idx, wts, ok = _stencil(self.grid, pts)
        vals = np.where(wts > 0, self.values[idx], 0.0)
        out = np.sum(wts * vals, axis=1)
        out[~ok] = np.nan
        return out

    def gradient(self, x, h: Optional[float] = None) -> np.ndarray:
        """Central differences of the interpolant, one-sided near the boundary."""
        pts = as_points(x, self.grid.dimension)
        d = self.grid.dimension
        steps = self.grid.spacing if h is None else (h,) * d
        u0 = self.interpolate(pts)
        if np.any(np.isnan(u0)):
            raise StencilError("gradient requested outside the closed domain")
        out = np.empty_like(pts)
        for k in range(d):
            e = np.zeros(d)
            e[k] = steps[k]
            up = self.interpolate(pts + e)
            dn = self.interpolate(pts - e)
            both = ~np.isnan(up) & ~np.isnan(dn)
            g = np.where(both, (up - dn) / (2 * steps[k]), np.nan)
            g = np.where(~both & ~np.isnan(up), (up - u0) / steps[k], g)
            g = np.where(~both & ~np.isnan(dn), (u0 - dn) / steps[k], g)
            if np.any(np.isnan(g)):
                raise StencilError("no admissible neighbour along some axis for the gradient stencil")
            out[:, k] = g
        return out

    def nodal_gradient(self) -> np.ndarray:
        """Gradient at every node, shape (M, d); NaN at exterior nodes.

        Multilinear interpolation of this array reproduces ``gradient`` with
        the default step wherever both axis neighbours are admissible.
        """
        cached = self.__dict__.get("_nodal_gradient")
        if cached is not None:
            return cached
        grid = self.grid
        vals = self.node_values()
        adm = grid.admissible.reshape(grid.shape)
        out = np.full(grid.shape + (grid.dimension,), np.nan)
        for k in range(grid.dimension):
            h = grid.spacing[k]
            fwd = np.full(grid.shape, np.nan)
            bwd = np.full(grid.shape, np.nan)
            sl_hi = [slice(None)] * grid.dimension
            sl_lo = [slice(None)] * grid.dimension
            sl_hi[k] = slice(1, None)
            sl_lo[k] = slice(None, -1)
            diff = (vals[tuple(sl_hi)] - vals[tuple(sl_lo)]) / h
            fwd[tuple(sl_lo)] = diff
            bwd[tuple(sl_hi)] = diff
            g = np.where(np.isnan(fwd) | np.isnan(bwd), np.nan, 0.5 * (fwd + bwd))
            g = np.where(np.isnan(g), fwd, g)
            g = np.where(np.isnan(g), bwd, g)
            out[..., k] = np.where(adm, g, np.nan)
        out = out.reshape(-1, grid.dimension)
        out.setflags(write=False)
        self.__dict__["_nodal_gradient"] = out
        return out

    def node_values(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "ValueField":
        return replace(self, values=np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# configuration and controls


@dataclass(frozen=True)
class SolverConfig:
    """Value-iteration settings; ``None`` entries are filled from the problem."""

    dt: Optional[float] = None
    control_radius: Optional[float] = None
    control_samples: Optional[int] = None
    tol: float = 1e-6
    max_iters: int = 200_000
    minimization: Optional[str] = None  # "exact" (1D) or "sampled"

    def resolved(self, H: PowerHamiltonian, f: RunningCost, grid: Grid) -> "SolverConfig":
        dt = grid.min_spacing if self.dt is None else self.dt
        radius = self.control_radius
        if radius is None:
            radius = default_control_radius(H, f, grid.domain)
        samples = self.control_samples
        if samples is None:
            samples = 81 if grid.dimension == 1 else 65
        mode = self.minimization
        if mode is None:
            mode = "exact" if grid.dimension == 1 else "sampled"
        cfg = SolverConfig(dt, radius, samples, self.tol, self.max_iters, mode)
        cfg.validate(grid.dimension)
        return cfg

    def validate(self, dim: int) -> None:
        if self.dt is None or not (0.0 < self.dt < 1.0):
            raise ValueError(f"dt must lie in (0, 1), got {self.dt}")
        if self.control_radius is None or self.control_radius <= 0:
            raise ValueError(f"control radius must be positive, got {self.control_radius}")
        floor = 9 if dim == 1 else 33
        if self.control_samples is None or self.control_samples < floor:
            raise ValueError(f"need at least {floor} control samples in {dim}D")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.minimization not in ("exact", "sampled"):
            raise ValueError(f"minimization must be 'exact' or 'sampled', got {self.minimization!r}")
        if self.minimization == "exact" and dim != 1:
            raise ValueError("exact minimization is only available in 1D")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def default_control_radius(H: PowerHamiltonian, f: RunningCost, domain: Domain) -> float:
    """Twice the optimal speed at the largest gradient ``a|g|^p <= 2 osc f`` allows."""
    osc = max_value(f, domain) - f.min_value
    g_max = (2.0 * osc / H.a) ** (1.0 / H.p)
    radius = 2.0 * float(feedback_speed(H, g_max))
    return radius if radius > 0 else 1.0


def control_set(radius: float, samples: int, dim: int) -> np.ndarray:
    """Sampled controls, shape (K, dim); the zero control comes first."""
    if dim == 1:
        k = samples if samples % 2 == 1 else samples + 1
        speeds = np.linspace(-radius, radius, k)
        speeds = np.concatenate([[0.0], speeds[speeds != 0.0]])
        return speeds[:, None]
    rings = max(1, int(np.sqrt((samples - 1) / 8)))
    angles = max(8, (samples - 1) // rings)
    theta = 2 * np.pi * np.arange(angles) / angles
    dirs = np.c_[np.cos(theta), np.sin(theta)]
    ctrl = [np.zeros((1, 2))]
    for j in range(1, rings + 1):
        ctrl.append(radius * j / rings * dirs)
    return np.vstack(ctrl)


@njit(cache=True)
def _sweep(values, nodes, cost, idx, wts, discount, out):
    n, k, c = idx.shape
    for i in range(n):
        best = np.inf
        for j in range(k):
            cj = cost[i, j]
            if cj == np.inf:
                continue
            acc = 0.0
            for m in range(c):
                w = wts[i, j, m]
                if w != 0.0:
                    acc += w * values[idx[i, j, m]]
            cand = cj + discount * acc
            if cand < best:
                best = cand
        out[nodes[i]] = best
    return out


@njit(cache=True)
def _sweep_exact_1d(values, xs, fx, dt, radius, weight, C, q, discount, out, controls):
    n = xs.shape[0]
    inv = 1.0 / (q - 1.0)
    for i in range(n):
        x = xs[i]
        ylo = max(xs[0], x - dt * radius)
        yhi = min(xs[n - 1], x + dt * radius)
        j = i
        while j > 0 and xs[j] > ylo:
            j -= 1
        best_w = 0.0
        base = weight * fx[i]
        best = base + discount * values[i]
        while j < n - 1 and xs[j] < yhi:
            a = max(xs[j], ylo)
            b = min(xs[j + 1], yhi)
            if b > a:
                slope = (values[j + 1] - values[j]) / (xs[j + 1] - xs[j])
                # stationary point of weight*C|w|^q + discount*slope*(x - dt w)
                mag = (discount * abs(slope) * dt / (weight * q * C)) ** inv
                w = mag if slope > 0 else -mag
                y = min(max(x - dt * w, a), b)
                w = (x - y) / dt
                cand = base + weight * C * abs(w) ** q + discount * (values[j] + slope * (y - xs[j]))
                if cand < best:
                    best = cand
                    best_w = w
            j += 1
        out[i] = best
        controls[i] = best_w
    return out


class BellmanOperator:
    """Assembled semi-Lagrangian update for one (grid, H, f, config)."""

    def __init__(self, H: PowerHamiltonian, f: RunningCost, grid: Grid, cfg: SolverConfig):
        self.grid = grid
        self.cfg = cfg
        self.discount = float(np.exp(-cfg.dt))
        self.exact = cfg.minimization == "exact"
        if self.exact:
            if not np.all(grid.admissible):
                raise StencilError("exact minimization needs an all-admissible 1D grid")
            self.nodes = np.arange(len(grid.points))
            self._xs = np.ascontiguousarray(grid.points[:, 0])
            self._fx = np.ascontiguousarray(f(grid.points), dtype=float)
            self._H = H
            return
        self.controls = control_set(cfg.control_radius, cfg.control_samples, grid.dimension)
        self.nodes = np.flatnonzero(grid.admissible)
        x = grid.points[self.nodes]
        n, k = len(self.nodes), len(self.controls)
        feet = x[:, None, :] - cfg.dt * self.controls[None, :, :]
        idx, wts, ok = _stencil(grid, feet.reshape(-1, grid.dimension))
        corners = idx.shape[1]
        self.idx = idx.reshape(n, k, corners)
        self.wts = wts.reshape(n, k, corners)
        ok = ok.reshape(n, k)
        ok[:, 0] = True  # zero control: the foot is the node itself
        self.idx[:, 0, :] = self.nodes[:, None]
        self.wts[:, 0, :] = 0.0
        self.wts[:, 0, 0] = 1.0
        running = (1.0 - self.discount) * (
            H.lagrangian_kinetic(self.controls)[None, :] + f(x)[:, None]
        )
        self.cost = np.where(ok, running, np.inf)
        self.admissible_controls = ok
        # drop corners that carry no weight anywhere to shorten the gather
        keep = np.any(self.wts > 0, axis=(0, 1))
        self.idx = np.ascontiguousarray(self.idx[:, :, keep], dtype=np.int32)
        self.wts = np.ascontiguousarray(self.wts[:, :, keep])

    def _exact(self, values):
        out = np.full(values.shape, np.nan)
        ctrl = np.zeros(values.shape)
        H = self._H
        _sweep_exact_1d(
            np.ascontiguousarray(values, dtype=float), self._xs, self._fx, self.cfg.dt, self.cfg.control_radius,
            1.0 - self.discount, H.legendre_coeff, H.q, self.discount, out, ctrl,
        )
        return out, ctrl

    def candidates(self, values: np.ndarray) -> np.ndarray:
        """Per (node, control) value of the minimized expression (sampled mode)."""
        if self.exact:
            raise StencilError("candidates are only tabulated in sampled mode")
        safe = np.where(np.isnan(values), 0.0, values)
        interp = np.einsum("nkc,nkc->nk", self.wts, safe[self.idx])
        return self.cost + self.discount * interp

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.exact:
            return self._exact(values)[0]
        out = np.full(values.shape, np.nan)
        return _sweep(np.ascontiguousarray(values, dtype=float), self.nodes, self.cost, self.idx, self.wts, self.discount, out)

    def argmin_controls(self, values: np.ndarray) -> np.ndarray:
        """A minimizing control per admissible node, shape (n, dim)."""
        if self.exact:
            return self._exact(values)[1][self.nodes, None]
        return self.controls[np.argmin(self.candidates(values), axis=1)]


def bellman_update(u_prev: ValueField, H: PowerHamiltonian, f: RunningCost, cfg: SolverConfig) -> ValueField:
    """One Jacobi sweep of the semi-Lagrangian dynamic programming step."""
    cfg = cfg.resolved(H, f, u_prev.grid)
    op = BellmanOperator(H, f, u_prev.grid, cfg)
    return u_prev.with_values(op.apply(u_prev.values))


def solve(
    H: PowerHamiltonian,
    f: RunningCost,
    grid: Grid,
    cfg: SolverConfig = SolverConfig(),
    initial: Optional[np.ndarray] = None,
) -> ValueField:
    """Iterate the Bellman update from ``u0 = f`` to the discrete fixed point.

    Staying put shows ``T f <= f``, so by monotonicity the iterates decrease
    to the fixed point. Starting from ``f`` rather than the constant ``max f``
    leaves the zero set of ``f`` exactly at zero instead of a ``tol``-sized
    offset. ``initial`` overrides the start. Stops once the sup-norm update is at most ``tol * (1 - e^{-dt})``, which
    bounds the distance to the fixed point by ``tol``. Raises
    NonConvergenceError after ``max_iters`` sweeps.
    """
    cfg = cfg.resolved(H, f, grid)
    op = BellmanOperator(H, f, grid, cfg)
    fvals = np.full(len(grid.points), np.nan)
    fvals[op.nodes] = f(grid.points[op.nodes])
    if initial is None:
        u = fvals.copy()
    else:
        u = np.array(initial, dtype=float)
    u[~grid.admissible] = np.nan
    threshold = cfg.tol * (1.0 - op.discount)
    start = time.perf_counter()
    residual = np.inf
    nodes = op.nodes
    for it in range(1, cfg.max_iters + 1):
        new = op.apply(u)
        residual = float(np.max(np.abs(new[nodes] - u[nodes])))
        u = new
        if residual <= threshold:
            logger.info("converged in %d sweeps (%.2fs), residual %.3e", it, time.perf_counter() - start, residual)
            return ValueField(grid, u, residual, it)
    raise NonConvergenceError(
        f"value iteration did not converge in {cfg.max_iters} sweeps (last update {residual:.3e})",
        residual,
        cfg.max_iters,
    )


def pde_residual(u: ValueField, H: PowerHamiltonian, f: RunningCost, x) -> float:
    """``u + a|D_h u|^p - f`` at a node, using the larger one-sided difference per axis."""
    grid = u.grid
    i = x if isinstance(x, (int, np.integer)) else grid.node_index(x)
    if not grid.admissible[i]:
        raise StencilError("residual requested at a non-admissible node")
    ij = np.array(np.unravel_index(i, grid.shape))
    vals = u.values
    grad = np.zeros(grid.dimension)
    for k in range(grid.dimension):
        diffs = []
        for step in (-1, 1):
            nb = ij.copy()
            nb[k] += step
            if 0 <= nb[k] < grid.shape[k]:
                j = np.ravel_multi_index(tuple(nb), grid.shape)
                if grid.admissible[j]:
                    diffs.append((vals[j] - vals[i]) / (step * grid.spacing[k]))
        if not diffs:
            raise StencilError(f"node {grid.points[i]} has no admissible neighbour along axis {k}")
        grad[k] = max(diffs, key=abs)
    return float(vals[i] + H.kinetic(grad) - f(grid.points[i])[0])


def f_on_grid(f: RunningCost, grid: Grid) -> np.ndarray:
    out = np.full(len(grid.points), np.nan)
    adm = grid.admissible
    out[adm] = f(grid.points[adm])
    return out


__all__ = [
    "BOUNDARY",
    "BellmanOperator",
    "Grid",
    "SolverConfig",
    "ValueField",
    "bellman_update",
    "build_grid",
    "control_set",
    "default_control_radius",
    "f_on_grid",
    "pde_residual",
    "solve",
]
