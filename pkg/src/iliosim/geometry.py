"""Low-level vector and ellipse-distance primitives.

All lengths are millimetres. 3D vectors are represented as plain float
triples in the domain types and converted to numpy arrays here; batch
entry points accept (N, 3) arrays directly.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

UNIT_TOL = 1e-9
GEOM_TOL = 1e-6

Vec3 = tuple[float, float, float]


def vec(p: Sequence[float]) -> np.ndarray:
    return np.asarray(p, dtype=float)


def as_tuple(p: Iterable[float]) -> Vec3:
    # + 0.0 normalizes IEEE negative zeros for stable serialization
    x, y, z = (float(c) + 0.0 for c in p)
    return (x, y, z)


def norm(p: Sequence[float]) -> float:
    return float(np.linalg.norm(vec(p)))


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.dot(vec(a), vec(b)))


def cross(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    return np.cross(vec(a), vec(b))


def normalize(p: Sequence[float]) -> np.ndarray:
    v = vec(p)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def is_unit(p: Sequence[float], tol: float = UNIT_TOL) -> bool:
    return abs(norm(p) - 1.0) <= tol


def rotation_about(axis: Sequence[float], angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    u = normalize(axis)
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    ux, uy, uz = u
    k = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return c * np.eye(3) + s * k + (1.0 - c) * np.outer(u, u)


def plane_tangent_basis(normal: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal (t1, t2) spanning the plane with this normal.

    t1 = normalize(normal x global_z) unless the normal is near-parallel to
    z, in which case global_y seeds the construction. t2 = normal x t1.
    """
    n = normalize(normal)
    seed = np.array([0.0, 0.0, 1.0])
    t1 = np.cross(n, seed)
    if np.linalg.norm(t1) < 1e-6:
        seed = np.array([0.0, 1.0, 0.0])
        t1 = np.cross(n, seed)
    t1 = t1 / np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


# --- exact signed distance from a 2D point to an axis-aligned ellipse ----------
#
# Solved via the standard root-finding formulation: for a query (x0, y0)
# with x0, y0 >= 0 and ellipse semi-axes A >= B (general A, B handled by
# swapping coordinates), the foot point is
#     (A^2 x0 / (t + A^2), B^2 y0 / (t + B^2))
# where t is the unique root of
#     F(t) = (A x0 / (t + A^2))^2 + (B y0 / (t + B^2))^2 - 1
# on (-B^2, inf). F is strictly decreasing there, so bisection is
# unconditionally convergent; 90 iterations drive the bracket below
# double-precision resolution. Points on the major axis (y0 == 0) need
# the closed-form branch because the bracket degenerates.

_BISECT_ITERS = 90
_AXIS_EPS = 1e-14


def _ellipse_distance_xy(x: np.ndarray, y: np.ndarray, a: float, b: float) -> np.ndarray:
    """Unsigned distances from points (|x|, |y|) to the ellipse boundary.

    Expects a >= b > 0; x, y are taken by absolute value (the ellipse is
    symmetric in both axes).
    """
    x = np.abs(np.asarray(x, dtype=float))
    y = np.abs(np.asarray(y, dtype=float))
    out = np.empty_like(x)

    if a == b:
        return np.abs(np.hypot(x, y) - a)

    on_major = y <= _AXIS_EPS
    if np.any(on_major):
        xm = x[on_major]
        cusp = (a * a - b * b) / a
        inner = xm < cusp
        dm = np.empty_like(xm)
        # Inside the evolute cusp the foot point leaves the major axis.
        xc = xm[inner] * a * a / (a * a - b * b)
        yc = b * np.sqrt(np.clip(1.0 - (xc / a) ** 2, 0.0, None))
        dm[inner] = np.hypot(xm[inner] - xc, yc)
        dm[~inner] = np.abs(xm[~inner] - a)
        out[on_major] = dm

    gen = ~on_major
    if np.any(gen):
        xg = x[gen]
        yg = y[gen]
        lo = np.full_like(xg, -b * b)
        hi = -b * b + np.hypot(a * xg, b * yg)  # F(hi) <= 0 by construction
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            f = (a * xg / (mid + a * a)) ** 2 + (b * yg / (mid + b * b)) ** 2 - 1.0
            pos = f >= 0.0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        t = 0.5 * (lo + hi)
        xc = a * a * xg / (t + a * a)
        yc = b * b * yg / (t + b * b)
        out[gen] = np.hypot(xg - xc, yg - yc)

    return out


def ellipse_signed_distance(x, y, a: float, b: float) -> np.ndarray:
    """Signed distance to the ellipse x^2/a^2 + y^2/b^2 = 1 (negative inside)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = _ellipse_distance_xy(x, y, a, b)
    inside = (x / a) ** 2 + (y / b) ** 2 <= 1.0
    return np.where(inside, -d, d)


def ellipse_signed_distance_bounds(x, y, a: float, b: float):
    """Cheap (lower, upper) bounds on the signed ellipse distance.

    From the gauge s = hypot(x/a, y/b): the gradient norm of the gauge
    lies in [1/a, 1/b], so the distance is within [b|s-1|, a|s-1|],
    signed by inside/outside.
    """
    s = np.hypot(np.asarray(x, dtype=float) / a, np.asarray(y, dtype=float) / b)
    outside = s >= 1.0
    lower = np.where(outside, b * (s - 1.0), a * (s - 1.0))
    upper = np.where(outside, a * (s - 1.0), b * (s - 1.0))
    return lower, upper


def capped_cylinder_signed_distance(
    radial: np.ndarray, axial: np.ndarray
) -> np.ndarray:
    """Combine radial and axial (slab) signed distances into the solid SDF.

    Exact for the intersection of an elliptic cylinder with an axial slab,
    provided `radial` is the exact 2D signed distance to the cross-section
    ellipse and `axial` the signed distance to the slab.
    """
    radial = np.asarray(radial, dtype=float)
    axial = np.asarray(axial, dtype=float)
    outside = np.hypot(np.maximum(radial, 0.0), np.maximum(axial, 0.0))
    inside = np.minimum(np.maximum(radial, axial), 0.0)
    return outside + inside
