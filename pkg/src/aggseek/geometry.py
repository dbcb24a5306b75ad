"""Compact convex constraint sets (boxes and balls) and their cone projections.

Every set supports three operations: Euclidean point projection, projection of a
velocity onto the tangent cone at a feasible point, and the complementary
projection onto the normal cone. Tangent + normal reconstruct the input vector
exactly and are mutually orthogonal (Moreau decomposition), which the test suite
uses as the internal consistency law.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

# a point counts as "on the boundary" within this distance
ACTIVITY_TOL = 1e-10
# points farther outside the set than this are rejected by the cone projections
MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {y : lo <= y <= hi}, componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("empty box: lo > hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball {y : ||y - center|| <= radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.ndim != 1:
            raise ValueError("ball center must be a 1-D array")
        r = float(self.radius)
        if not r > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.shape[0]


ConvexSet = Union[Box, Ball]


def _check_dim(s: ConvexSet, y: np.ndarray, name: str) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (s.dim,):
        raise ValueError(f"{name} has dimension {y.shape}, set has dimension {s.dim}")
    return y


def project(s: ConvexSet, y: np.ndarray) -> np.ndarray:
    """Euclidean projection of y onto the set.

    Box: componentwise clamp. Ball: radial shrink when outside, identity inside.
    """
    y = _check_dim(s, y, "point")
    if isinstance(s, Box):
        return np.clip(y, s.lo, s.hi)
    d = y - s.center
    norm = float(np.linalg.norm(d))
    if norm <= s.radius:
        return y.copy()
    return s.center + d * (s.radius / norm)


def distance(s: ConvexSet, y: np.ndarray) -> float:
    """Euclidean distance from y to the set (zero for members)."""
    y = _check_dim(s, y, "point")
    return float(np.linalg.norm(y - project(s, y)))


def contains(s: ConvexSet, y: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    return distance(s, y) <= tol


def _require_member(s: ConvexSet, x: np.ndarray) -> np.ndarray:
    x = _check_dim(s, x, "point")
    d = float(np.linalg.norm(x - project(s, x)))
    if d > MEMBERSHIP_TOL:
        raise ValueError(f"point lies outside the set (distance {d:.3e})")
    return x


def tangent_project(s: ConvexSet, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project the velocity v onto the tangent cone of the set at x.

    Equals lim_{eps -> 0+} (project(x + eps*v) - x) / eps. Closed forms:

    Box: copy v, zero out component j when x_j sits at the lower bound with
    v_j < 0 or at the upper bound with v_j > 0 ("at" meaning within the
    activity tolerance).

    Ball: v unchanged in the interior; on the boundary remove the outward
    radial part, v - max(0, u.v) u with u the outward unit normal.

    Raises ValueError when x lies outside the set beyond tolerance.
    """
    x = _require_member(s, x)
    v = _check_dim(s, v, "vector")
    if isinstance(s, Box):
        out = v.copy()
        at_lo = (x - s.lo <= ACTIVITY_TOL) & (v < 0)
        at_hi = (s.hi - x <= ACTIVITY_TOL) & (v > 0)
        out[at_lo | at_hi] = 0.0
        return out
    d = x - s.center
    norm = float(np.linalg.norm(d))
    if norm < s.radius - ACTIVITY_TOL:
        return v.copy()
    u = d / norm
    return v - max(0.0, float(u @ v)) * u


def normal_project(s: ConvexSet, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project v onto the normal cone at x: the Moreau complement of tangent_project."""
    x = _check_dim(s, x, "point")
    v = _check_dim(s, v, "vector")
    return v - tangent_project(s, x, v)


def set_center(s: ConvexSet) -> np.ndarray:
    """Deterministic interior representative: box midpoint or ball center."""
    if isinstance(s, Box):
        return s.center
    return s.center.copy()


def set_from_document(fragment: dict) -> ConvexSet:
    """Build a set from its scenario-file fragment.

    Accepts {"box": {"lo": [...], "hi": [...]}} or
    {"ball": {"center": [...], "radius": r}}.
    """
    if not isinstance(fragment, dict) or len(fragment) != 1:
        raise ValueError(f"set fragment must have exactly one of 'box'/'ball': {fragment!r}")
    kind, body = next(iter(fragment.items()))
    if kind == "box":
        try:
            return Box(np.asarray(body["lo"], dtype=float), np.asarray(body["hi"], dtype=float))
        except KeyError as e:
            raise ValueError(f"box fragment missing field {e}") from None
    if kind == "ball":
        try:
            return Ball(np.asarray(body["center"], dtype=float), float(body["radius"]))
        except KeyError as e:
            raise ValueError(f"ball fragment missing field {e}") from None
    raise ValueError(f"unknown set kind {kind!r}")
