"""High-accuracy 1D reference profiles from the characteristic ODE.

Away from contact with ``f``, a 1D solution satisfies
``u' = s ((f - u)/a)^(1/p)`` with a branch sign ``s``; the caller chooses
the sign and the stitch points, the integrator supplies accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import BranchInvalidError, SingularCurvatureError
from .hamiltonian import PowerHamiltonian, RunningCost


@dataclass(frozen=True, eq=False)
class Reference1D:
    """Dense samples ``(x, u, u')`` on ``[lo, hi]`` with branch bookkeeping.

    ``branches`` lists ``(x_lo, x_hi, sign)`` triples; ``contacts`` lists
    abscissae where ``u`` touched ``f``.
    """

    H: PowerHamiltonian
    f: RunningCost
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    du: np.ndarray = field(repr=False)
    branches: tuple = ()
    contacts: tuple = ()

    def __post_init__(self):
        order = np.argsort(self.x, kind="stable")
        x, u, du = self.x[order], self.u[order], self.du[order]
        keep = np.concatenate([[True], np.diff(x) > 0])
        object.__setattr__(self, "x", x[keep])
        object.__setattr__(self, "u", u[keep])
        object.__setattr__(self, "du", du[keep])
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.x, self.u, self.du))

    @property
    def interval(self) -> tuple:
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, x) -> np.ndarray:
        return self._spline(np.asarray(x, dtype=float))

    def derivative(self, x) -> np.ndarray:
        return self._spline(np.asarray(x, dtype=float), 1)

    def residual(self) -> np.ndarray:
        """``u + a|u'|^p - f`` at every sample."""
        return self.u + self.H.a * np.abs(self.du) ** self.H.p - self.f(self.x)

    def branch_at(self, x: float) -> int:
        for lo, hi, sign in self.branches:
            if lo <= x <= hi:
                return sign
        raise ValueError(f"{x} lies outside every recorded branch")

    def mirrored(self) -> "Reference1D":
        """Reflect through the origin: ``u(-x) = u(x)``, ``u'(-x) = -u'(x)``."""
        return Reference1D(
            self.H,
            self.f,
            -self.x[::-1],
            self.u[::-1],
            -self.du[::-1],
            tuple((-hi, -lo, -s) for lo, hi, s in self.branches),
            tuple(-c for c in self.contacts),
        )

    @staticmethod
    def stitch(*parts: "Reference1D") -> "Reference1D":
        first = parts[0]
        return Reference1D(
            first.H,
            first.f,
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.u for p in parts]),
            np.concatenate([p.du for p in parts]),
            tuple(b for p in parts for b in p.branches),
            tuple(c for p in parts for c in p.contacts),
        )


def integrate_branch(
    H: PowerHamiltonian,
    f: RunningCost,
    x_start: float,
    u_start: float,
    sign: int,
    x_end: float,
    step: float = 1e-5,
    contact_tol: float = 1e-12,
    invalid_tol: float = 1e-9,
) -> Reference1D:
    """RK4 for ``u' = sign ((f - u)/a)^(1/p)`` from ``x_start`` to ``x_end``.

    ``f - u`` is clamped at zero; where it vanishes and ``f' = 0`` the
    profile follows ``u = f`` (flat contact). A step that leaves ``u`` above
    ``f`` by more than ``invalid_tol`` raises BranchInvalidError.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    if u_start > f(x_start)[0] + invalid_tol:
        raise BranchInvalidError(f"u_start={u_start} exceeds f({x_start})")
    span = x_end - x_start
    n = max(1, int(np.ceil(abs(span) / step - 1e-9)))
    h = span / n
    xs = x_start + h * np.arange(n + 1)
    xs[-1] = x_end
    mids = 0.5 * (xs[:-1] + xs[1:])
    fx = f(xs)
    fm = f(mids)
    dfx = f.gradient(xs)[:, 0]
    a = H.a
    inv_p = 1.0 / H.p

    def rhs(fv, uv):
        w = fv - uv
        return sign * (w / a) ** inv_p if w > 0.0 else 0.0

    u = np.empty(n + 1)
    u[0] = min(u_start, fx[0])
    contacts = []
    flat = lambda i: abs(dfx[i]) <= 1e-12  # noqa: E731
    for i in range(n):
        ui = u[i]
        if fx[i] - ui <= contact_tol and flat(i) and flat(i + 1) and fm[i] == fx[i]:
            contacts.append(float(xs[i]))
            u[i + 1] = fx[i + 1]
            continue
        k1 = rhs(fx[i], ui)
        k2 = rhs(fm[i], ui + 0.5 * h * k1)
        k3 = rhs(fm[i], ui + 0.5 * h * k2)
        k4 = rhs(fx[i + 1], ui + h * k3)
        un = ui + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        gap = fx[i + 1] - un
        if gap < 0.0:
            if gap < -invalid_tol:
                raise BranchInvalidError(
                    f"u exceeds f by {-gap:.3e} at x={xs[i + 1]:.6f}; branch sign {sign} is wrong here"
                )
            un = fx[i + 1]
            contacts.append(float(xs[i + 1]))
        u[i + 1] = un
    w = np.clip(fx - u, 0.0, None)
    du = sign * (w / a) ** inv_p
    on_f = w <= contact_tol
    du = np.where(on_f & (np.abs(dfx) <= 1e-12), 0.0, du)
    lo, hi = sorted((float(x_start), float(x_end)))
    return Reference1D(H, f, xs, u, du, ((lo, hi, sign),), tuple(_dedupe(contacts, abs(h))))


def _dedupe(points, h):
    out = []
    for p in points:
        if not out or abs(p - out[-1]) > 1.5 * h:
            out.append(p)
    return out


def curvature_estimate(ref: Reference1D, x: float) -> float:
    """``u''`` from differentiating ``u + a|u'|^p = f`` once:

        u'' = (f' - u') / (p a sign(u') |u'|^(p-1))

    Raises SingularCurvatureError where ``u'`` vanishes.
    """
    x = float(x)
    lo, hi = ref.interval
    if not lo < x < hi:
        raise ValueError(f"{x} is not strictly inside the reference interval [{lo}, {hi}]")
    du = float(ref.derivative(x))
    if du == 0.0 or abs(du) < 1e-14:
        raise SingularCurvatureError(f"u'({x}) = 0: curvature formula is singular")
    H = ref.H
    df = float(ref.f.gradient(x)[0, 0])
    return (df - du) / (H.p * H.a * np.sign(du) * abs(du) ** (H.p - 1.0))
