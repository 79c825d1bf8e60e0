"""Power Hamiltonians ``a|beta|^p - f(x)`` and their Legendre algebra.

For ``H(x, beta) = a|beta|^p - f(x)`` with ``1 < p <= 2`` the Lagrangian is
``L(x, v) = C|v|^q + f(x)`` where ``q = p/(p-1)`` and
``C = (p-1) a^(1-q) p^(-q)``. With ``a = 1`` this is ``q^-1 p^(-q/p)``.
The optimal velocity for a value gradient ``g`` points along ``-g`` with
speed ``(|g| / (q C))^(1/(q-1))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .domain import Domain, as_points
from .errors import DomainError, GradientMismatchError, ParameterRangeError


def _check_params(a: float, p: float) -> None:
    if not (np.isfinite(p) and 1.0 < p <= 2.0):
        raise ParameterRangeError(f"exponent p must lie in (1, 2], got {p}")
    if not (np.isfinite(a) and a > 0.0):
        raise ParameterRangeError(f"coefficient a must be positive, got {a}")


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


def legendre_coeff(a: float, p: float) -> float:
    """Coefficient ``C`` with ``sup_beta (beta.v - a|beta|^p) = C|v|^q``."""
    _check_params(a, p)
    q = conjugate_exponent(p)
    return (p - 1.0) * a ** (1.0 - q) * p ** (-q)


@dataclass(frozen=True)
class PowerHamiltonian:
    p: float = 2.0
    a: float = 1.0

    def __post_init__(self):
        _check_params(self.a, self.p)

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    @property
    def legendre_coeff(self) -> float:
        return legendre_coeff(self.a, self.p)

    def kinetic(self, g) -> np.ndarray:
        """``a|g|^p`` along the last axis."""
        return self.a * _norm(g) ** self.p

    def lagrangian_kinetic(self, v) -> np.ndarray:
        """``C|v|^q`` along the last axis."""
        return self.legendre_coeff * _norm(v) ** self.q

    def momentum(self, v) -> np.ndarray:
        """``D_v L = q C |v|^(q-2) v``; zero at ``v = 0`` since ``q >= 2``."""
        v = np.asarray(v, dtype=float)
        n = _norm(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(n > 0, self.q * self.legendre_coeff * n ** (self.q - 2.0), 0.0)
        return scale[..., None] * v if v.ndim else scale * v


def _norm(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return np.abs(g)
    return np.linalg.norm(g, axis=-1)


@dataclass(frozen=True)
class RunningCost:
    """The state cost ``f`` with its gradient.

    ``eval`` maps an (N, d) array to (N,), ``grad`` maps it to (N, d).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    min_value: float
    boundary_is_min: bool = False
    semiconcavity_constant_hint: Optional[float] = None
    dim: int = 1
    name: str = "f"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.eval(as_points(x, self.dim)), dtype=float).reshape(-1)

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self.grad(as_points(x, self.dim)), dtype=float).reshape(-1, self.dim)


def validate_gradient(
    f: RunningCost,
    domain: Domain,
    n_points: int = 25,
    rtol: float = 1e-4,
    step: float = 1e-5,
    seed: int = 0,
) -> None:
    """Compare ``f.grad`` with central differences of ``f.eval``.

    Raises GradientMismatchError when some component differs by more than
    ``rtol * (1 + |Df|)`` at any of ``n_points`` random interior points, or
    when a sampled value falls below ``f.min_value``.
    """
    rng = np.random.default_rng(seed)
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    pts = []
    while len(pts) < n_points:
        cand = rng.uniform(lo, hi, size=(4 * n_points, domain.dim))
        inside = domain.signed_distance(cand) < -2 * step
        pts.extend(cand[inside])
    pts = np.asarray(pts[:n_points])
    g = f.gradient(pts)
    fd = np.empty_like(g)
    for k in range(domain.dim):
        e = np.zeros(domain.dim)
        e[k] = step
        fd[:, k] = (f(pts + e) - f(pts - e)) / (2 * step)
    err = np.abs(fd - g).max(axis=-1)
    bad = err > rtol * (1.0 + np.linalg.norm(g, axis=-1))
    if np.any(bad):
        i = int(np.argmax(err))
        raise GradientMismatchError(
            f"gradient of {f.name} disagrees with finite differences at {pts[i]}: "
            f"analytic {g[i]}, numeric {fd[i]}"
        )
    vals = f(pts)
    if np.any(vals < f.min_value - 1e-12):
        raise GradientMismatchError(f"{f.name} takes values below its declared minimum {f.min_value}")


def lagrangian(H: PowerHamiltonian, f: RunningCost, x, v, domain: Optional[Domain] = None) -> np.ndarray:
    """``C|v|^q + f(x)``; checks ``x`` against ``domain`` when one is given."""
    pts = as_points(x, f.dim)
    if domain is not None and not np.all(domain.contains_closed(pts)):
        raise DomainError("lagrangian evaluated outside the closed domain")
    vel = as_points(v, f.dim)
    out = H.lagrangian_kinetic(vel) + f(pts)
    return out if out.size > 1 else float(out[0])


def feedback_speed(H: PowerHamiltonian, g) -> np.ndarray:
    """Optimal speed ``(|g| / (q C))^(1/(q-1))`` for value gradient ``g``.

    For ``a = 1`` this is ``p |g|^(1/(q-1))``. Scalars are treated as 1-d
    gradients; for arrays the last axis holds the components.
    """
    n = _norm(g)
    return (n / (H.q * H.legendre_coeff)) ** (1.0 / (H.q - 1.0))


def feedback_velocity(H: PowerHamiltonian, g) -> np.ndarray:
    """Velocity ``v`` solving ``-q C |v|^(q-2) v = g`` (zero when ``g = 0``)."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return -np.sign(g) * feedback_speed(H, g)
    n = _norm(g)
    speed = feedback_speed(H, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(n > 0, speed / n, 0.0)
    return -scale[..., None] * g


def gradient_bound(H: PowerHamiltonian, f_max: float, u_min: float) -> float:
    """Largest admissible ``|Du|`` from ``a|Du|^p <= f - u <= max f - min u``."""
    return (max(f_max - u_min, 0.0) / H.a) ** (1.0 / H.p)


def numeric_conjugate(H: PowerHamiltonian, v, beta_max: float = None, n_beta: int = 200001) -> np.ndarray:
    """Brute-force ``sup_beta (beta v - a|beta|^p)`` over a 1-d beta grid.

    Used by the ``legendre`` command to display the grid estimate next to
    the closed form; accuracy improves with ``n_beta``.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if beta_max is None:
        # maximizer is |beta| = (|v|/(a p))^(1/(p-1)); cover it with margin
        beta_max = 2.0 * float(np.max((np.abs(v) / (H.a * H.p)) ** (1.0 / (H.p - 1.0)))) + 1.0
    beta = np.linspace(-beta_max, beta_max, n_beta)
    vals = beta[None, :] * v[:, None] - H.a * np.abs(beta[None, :]) ** H.p
    return vals.max(axis=1)
