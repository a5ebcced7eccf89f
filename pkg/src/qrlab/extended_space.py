"""Points of the one-point compactification of R^n and the chordal metric.

Two representations are used throughout the package:

* :class:`ExtendedPoint` is the immutable public value type.
* "Point arrays" of shape ``(N, n)`` are used in vectorised code; a row of
  ``+inf`` entries stands for the point at infinity.  Conversion helpers
  live here so the sentinel never leaks into :class:`ExtendedPoint`.

Stereographic convention: infinity lifts to the north pole ``(0, ..., 0, 1)``
of the unit sphere in R^{n+1} and the origin lifts to the south pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError

#: Finite points with norm above this are treated as infinity in dynamics.
INFINITY_RADIUS = 1e12


@dataclass(frozen=True)
class ExtendedPoint:
    dim: int
    coords: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"ambient dimension must be >= 2, got {self.dim}")
        if self.coords is not None:
            coords = tuple(float(c) for c in self.coords)
            if len(coords) != self.dim:
                raise DimensionMismatchError(
                    f"expected {self.dim} coordinates, got {len(coords)}")
            if not all(math.isfinite(c) for c in coords):
                raise ValueError(f"non-finite coordinate in {coords}")
            object.__setattr__(self, "coords", coords)

    @classmethod
    def finite(cls, *coords: float) -> "ExtendedPoint":
        if len(coords) == 1 and isinstance(coords[0], (Sequence, np.ndarray)):
            coords = tuple(coords[0])
        return cls(len(coords), tuple(coords))

    @classmethod
    def infinity(cls, dim: int) -> "ExtendedPoint":
        return cls(dim, None)

    @classmethod
    def from_complex(cls, z: complex) -> "ExtendedPoint":
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return cls.infinity(2)
        return cls(2, (z.real, z.imag))

    @classmethod
    def from_row(cls, row) -> "ExtendedPoint":
        row = np.asarray(row, dtype=float)
        if np.isinf(row).any() or np.linalg.norm(row) > INFINITY_RADIUS:
            return cls.infinity(row.shape[0])
        return cls(row.shape[0], tuple(row.tolist()))

    @property
    def is_infinity(self) -> bool:
        return self.coords is None

    @property
    def kind(self) -> str:
        return "infinity" if self.is_infinity else "finite"

    def to_row(self) -> np.ndarray:
        if self.is_infinity:
            return np.full(self.dim, np.inf)
        return np.array(self.coords, dtype=float)

    def to_complex(self) -> complex:
        if self.dim != 2:
            raise DimensionMismatchError("complex view only exists for n = 2")
        if self.is_infinity:
            return complex(np.inf, 0.0)
        return complex(self.coords[0], self.coords[1])

    def norm(self) -> float:
        return math.inf if self.is_infinity else math.hypot(*self.coords)

    def __repr__(self):
        if self.is_infinity:
            return f"ExtendedPoint(inf, dim={self.dim})"
        return f"ExtendedPoint({', '.join(f'{c:.6g}' for c in self.coords)})"


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere S^n in R^{n+1}."""

    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        norm = math.sqrt(sum(c * c for c in coords))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"not on the unit sphere: |s| = {norm!r}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords) - 1

    def to_array(self) -> np.ndarray:
        return np.array(self.coords)


# -- array helpers -----------------------------------------------------------

def as_point_array(points) -> np.ndarray:
    """Stack ExtendedPoints (or pass an array through) into an (N, n) array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        return arr.reshape(1, -1) if arr.ndim == 1 else arr
    if isinstance(points, ExtendedPoint):
        return points.to_row()[None, :]
    rows = [p.to_row() if isinstance(p, ExtendedPoint) else np.asarray(p, dtype=float)
            for p in points]
    if not rows:
        raise ValueError("empty point list")
    return np.vstack(rows)


def to_points(arr: np.ndarray) -> list[ExtendedPoint]:
    return [ExtendedPoint.from_row(r) for r in np.atleast_2d(arr)]


def infinite_rows(arr: np.ndarray) -> np.ndarray:
    return ~np.isfinite(arr).all(axis=-1)


def normalize_infinity(arr: np.ndarray) -> np.ndarray:
    """Replace rows with norm above INFINITY_RADIUS (or NaN/inf) by inf rows."""
    arr = np.array(arr, dtype=float, copy=True)
    with np.errstate(invalid="ignore", over="ignore"):
        bad = ~np.isfinite(arr).all(axis=-1)
        bad |= np.linalg.norm(np.where(np.isfinite(arr), arr, 0.0), axis=-1) > INFINITY_RADIUS
    arr[bad] = np.inf
    return arr


def lift_array(arr: np.ndarray) -> np.ndarray:
    """Stereographic lift of an (N, n) point array to (N, n+1) sphere coordinates."""
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    inf = infinite_rows(arr)
    x = np.where(inf[:, None], 0.0, arr)
    sq = np.einsum("ij,ij->i", x, x)
    out = np.empty((arr.shape[0], arr.shape[1] + 1))
    out[:, :-1] = 2.0 * x / (1.0 + sq)[:, None]
    out[:, -1] = (sq - 1.0) / (sq + 1.0)
    out[inf] = 0.0
    out[inf, -1] = 1.0
    return out


def unlift_array(sphere: np.ndarray) -> np.ndarray:
    """Inverse stereographic projection; the north pole maps to an inf row.

    Near the north pole ``1 - s_n`` is computed as ``|s'|^2 / (1 + s_n)`` to
    keep relative accuracy for large |x|.
    """
    s = np.atleast_2d(np.asarray(sphere, dtype=float))
    head, last = s[:, :-1], s[:, -1]
    sq_head = np.einsum("ij,ij->i", head, head)
    upper = last > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.where(upper, sq_head / (1.0 + last), 1.0 - last)
        out = head / denom[:, None]
    return normalize_infinity(np.where((denom == 0.0)[:, None], np.inf, out))


def chordal_distance_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise chordal distance, closed form, broadcasting over rows."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    a, b = np.broadcast_arrays(a, b)
    ia, ib = infinite_rows(a), infinite_rows(b)
    a0 = np.where(ia[:, None], 0.0, a)
    b0 = np.where(ib[:, None], 0.0, b)
    na = np.sqrt(1.0 + np.einsum("ij,ij->i", a0, a0))
    nb = np.sqrt(1.0 + np.einsum("ij,ij->i", b0, b0))
    d = 2.0 * np.linalg.norm(a0 - b0, axis=1) / (na * nb)
    d = np.where(ia & ~ib, 2.0 / nb, d)
    d = np.where(ib & ~ia, 2.0 / na, d)
    d = np.where(ia & ib, 0.0, d)
    return np.minimum(d, 2.0)


# -- public scalar API -------------------------------------------------------

def chordal_distance(x: ExtendedPoint, y: ExtendedPoint) -> float:
    if x.dim != y.dim:
        raise DimensionMismatchError(
            f"chordal distance between dimensions {x.dim} and {y.dim}")
    return float(chordal_distance_array(x.to_row(), y.to_row())[0])


def stereographic_lift(x: ExtendedPoint) -> SpherePoint:
    return SpherePoint(tuple(lift_array(x.to_row())[0]))


def stereographic_unlift(s: SpherePoint) -> ExtendedPoint:
    return ExtendedPoint.from_row(unlift_array(s.to_array())[0])


def uniform_sphere(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on S^n in R^{n+1} via normalised Gaussian vectors."""
    g = rng.standard_normal((count, n + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_chordal_uniform(n: int, count: int, rng_seed: int) -> list[ExtendedPoint]:
    """Points of R̄^n whose lifts are i.i.d. uniform on S^n."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return to_points(sample_chordal_uniform_array(n, count, rng_seed))


def sample_chordal_uniform_array(n: int, count: int, rng_seed: int) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    return unlift_array(uniform_sphere(n, count, rng))


def sphere_area(d: int) -> float:
    """H^d measure of the unit sphere S^d in R^{d+1}."""
    return 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def chordal_ball_sample(center: np.ndarray, radius: float, count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Uniform (surface measure) sample of the chordal ball B_chi(center, radius).

    Returned in sphere coordinates, shape (count, n+1).
    """
    s0 = lift_array(center)[0]
    n = s0.shape[0] - 1
    a = 2.0 * math.asin(min(radius, 2.0) / 2.0)
    # polar angle density on S^n is proportional to sin^{n-1}; rejection sample
    angles = np.empty(0)
    while angles.size < count:
        cand = rng.uniform(0.0, a, size=2 * count)
        accept = rng.uniform(size=cand.size) < (np.sin(cand) / np.sin(min(a, math.pi / 2))) ** (n - 1)
        angles = np.concatenate([angles, cand[accept]])
    angles = angles[:count]
    return _rotate_from(s0, angles, rng)


def chordal_sphere_sample(center: np.ndarray, radius: float, count: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of the chordal sphere {chi(center, .) = radius}, in sphere coordinates."""
    s0 = lift_array(center)[0]
    angles = np.full(count, 2.0 * math.asin(min(radius, 2.0) / 2.0))
    return _rotate_from(s0, angles, rng)


def _rotate_from(s0, angles, rng):
    """Move s0 along uniformly random great circles by the given angles."""
    tangent = rng.standard_normal((angles.size, s0.shape[0]))
    tangent -= np.outer(tangent @ s0, s0)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    return np.cos(angles)[:, None] * s0 + np.sin(angles)[:, None] * tangent


def points_from(values: Iterable) -> list[ExtendedPoint]:
    return [v if isinstance(v, ExtendedPoint) else ExtendedPoint.finite(v) for v in values]
