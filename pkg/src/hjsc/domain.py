"""Bounded domains in one and two dimensions.

A domain is described by a signed distance-like function ``phi`` with
``Omega = {phi < 0}`` and a bounding box containing the closure. Intervals and
rectangles get an exact signed distance; implicit regions use whatever
function the caller supplies (for discs it is exact as well).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

INTERIOR = 0
BOUNDARY = 1
EXTERIOR = 2


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to an array of shape (N, dim).

    A scalar or a 1-d array in one dimension is read as a list of abscissae;
    a 1-d array of length ``dim`` in higher dimension is a single point.
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DomainError(f"expected a point with {dim} coordinates, got {arr.shape}")
        return arr.reshape(1, dim)
    if arr.shape[-1] != dim:
        raise DomainError(f"expected trailing dimension {dim}, got {arr.shape}")
    return arr.reshape(-1, dim)


@dataclass(frozen=True)
class Domain:
    kind: str
    lower: tuple
    upper: tuple
    phi: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    boundary_tolerance: float = 1e-9

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle", "implicit"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if len(self.lower) != len(self.upper) or len(self.lower) not in (1, 2):
            raise DomainError("bounding box must be 1- or 2-dimensional")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise DomainError("bounding box has non-positive extent")
        if self.kind == "implicit" and self.phi is None:
            raise DomainError("implicit domain needs a level-set function")
        if self.boundary_tolerance < 0:
            raise DomainError("boundary tolerance must be non-negative")

    # constructors ---------------------------------------------------------

    @classmethod
    def interval(cls, a: float, b: float, boundary_tolerance: float = 1e-9) -> "Domain":
        return cls("interval", (float(a),), (float(b),), None, boundary_tolerance)

    @classmethod
    def rectangle(cls, xlim, ylim, boundary_tolerance: float = 1e-9) -> "Domain":
        return cls(
            "rectangle",
            (float(xlim[0]), float(ylim[0])),
            (float(xlim[1]), float(ylim[1])),
            None,
            boundary_tolerance,
        )

    @classmethod
    def implicit(cls, phi, lower, upper, boundary_tolerance: float = 1e-9) -> "Domain":
        return cls("implicit", tuple(map(float, lower)), tuple(map(float, upper)), phi, boundary_tolerance)

    @classmethod
    def disc(cls, center=(0.0, 0.0), radius: float = 1.0, boundary_tolerance: float = 1e-9) -> "Domain":
        c = np.asarray(center, dtype=float)
        r = float(radius)

        def phi(pts):
            return np.linalg.norm(pts - c, axis=-1) - r

        return cls.implicit(phi, c - r, c + r, boundary_tolerance)

    # geometry -------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    def signed_distance(self, x) -> np.ndarray:
        """Negative inside, zero on the boundary, positive outside."""
        pts = as_points(x, self.dim)
        if self.kind == "implicit":
            return np.asarray(self.phi(pts), dtype=float).reshape(-1)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        # exact inside; outside only the sign matters here
        return np.max(np.maximum(lo - pts, pts - hi), axis=-1)

    def distance_to_boundary(self, x) -> np.ndarray:
        return np.abs(self.signed_distance(x))

    def classify(self, x) -> np.ndarray:
        sd = self.signed_distance(x)
        out = np.full(sd.shape, EXTERIOR, dtype=np.int8)
        out[sd < -self.boundary_tolerance] = INTERIOR
        out[np.abs(sd) <= self.boundary_tolerance] = BOUNDARY
        return out

    def contains_closed(self, x) -> np.ndarray:
        return self.signed_distance(x) <= self.boundary_tolerance

    def contains_open(self, x) -> np.ndarray:
        return self.signed_distance(x) < -self.boundary_tolerance

    def require_closed(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        if not np.all(self.contains_closed(pts)):
            raise DomainError(f"point(s) outside the closed domain: {pts[~self.contains_closed(pts)][:3]}")
        return pts


def boundary_samples(domain: Domain, n: int = 64) -> np.ndarray:
    """Points on (or within tolerance of) the boundary, shape (M, dim)."""
    if domain.kind == "interval":
        return np.array([[domain.lower[0]], [domain.upper[0]]])
    if domain.kind == "rectangle":
        (x0, y0), (x1, y1) = domain.lower, domain.upper
        t = np.linspace(0.0, 1.0, n)
        edges = [
            np.c_[x0 + t * (x1 - x0), np.full(n, y0)],
            np.c_[x0 + t * (x1 - x0), np.full(n, y1)],
            np.c_[np.full(n, x0), y0 + t * (y1 - y0)],
            np.c_[np.full(n, x1), y0 + t * (y1 - y0)],
        ]
        return np.vstack(edges)
    # implicit: seed on a lattice near the zero set, then Newton-project
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    axes = [np.linspace(lo[k], hi[k], n) for k in range(domain.dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    h = np.max(hi - lo) / (n - 1)
    pts = pts[np.abs(domain.signed_distance(pts)) < 2 * h]
    eps = 1e-7 * max(1.0, domain.diameter)
    for _ in range(20):
        phi = domain.signed_distance(pts)
        grad = np.empty_like(pts)
        for k in range(domain.dim):
            e = np.zeros(domain.dim)
            e[k] = eps
            grad[:, k] = (domain.signed_distance(pts + e) - domain.signed_distance(pts - e)) / (2 * eps)
        g2 = np.maximum(np.sum(grad**2, axis=-1), 1e-30)
        pts = pts - (phi / g2)[:, None] * grad
    return pts
