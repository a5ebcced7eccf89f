"""Counting functions n(E, y) and their spherical and global averages.

Multiplicities come from the preimage slots of the catalog maps: a point of
local index i fills i slots, so counting slots inside E is exactly n(E, y).
Iterates are handled by :class:`~qrlab.maps.Iterate`, whose slots compose
the exact inverse branches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .extended_space import (ExtendedPoint, as_point_array, chordal_distance_array,
                             infinite_rows, uniform_sphere, unlift_array)
from .maps import Iterate, PowerMap, QRMap, Winding

DEFAULT_SHARDS = 8
CHUNK_ROWS = 2 ** 20


@dataclass(frozen=True)
class Region:
    """A closed ball (Euclidean or chordal) or, with ``center=None``, all of R̄ⁿ."""

    center: ExtendedPoint | None = None
    radius: float = math.inf
    metric: str = "euclidean"

    def __post_init__(self):
        if self.center is None:
            return
        if self.metric not in ("euclidean", "chordal"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.metric == "chordal" and self.radius > 2:
            raise ValueError("chordal radii are at most 2")
        if self.metric == "euclidean" and self.center.is_infinity:
            raise ValueError("a Euclidean ball needs a finite center")

    @classmethod
    def ball(cls, center, radius, metric="euclidean") -> "Region":
        if not isinstance(center, ExtendedPoint):
            center = ExtendedPoint.finite(*center)
        return cls(center, float(radius), metric)

    @property
    def is_everything(self) -> bool:
        return self.center is None

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1])
        if self.is_everything:
            inside = np.ones(flat.shape[0], dtype=bool)
        elif self.metric == "chordal":
            inside = chordal_distance_array(flat, self.center.to_row()) <= self.radius
        else:
            fin = ~infinite_rows(flat)
            d = np.linalg.norm(np.where(fin[:, None], flat, 0.0) - self.center.to_row(), axis=1)
            inside = fin & (d <= self.radius)
        return inside.reshape(pts.shape[:-1])

    def to_dict(self) -> dict:
        if self.is_everything:
            return {"region": "all"}
        return {"center": None if self.center.is_infinity else list(self.center.coords),
                "radius": self.radius, "metric": self.metric}


EVERYTHING = Region()


@dataclass(frozen=True)
class AverageResult:
    estimate: float
    std_error: float
    samples: int
    exact: bool


def count_array(fmap: QRMap, region: Region, ys) -> np.ndarray:
    """n(region, y) for every row y."""
    slots = fmap.preimage_slots(as_point_array(ys))
    return region.contains(slots).sum(axis=1)


def count_in(fmap: QRMap, region: Region, y: ExtendedPoint) -> int:
    return int(count_array(fmap, region, y.to_row()[None, :])[0])


def _chunked_counts(fmap: QRMap, region: Region, ys: np.ndarray) -> np.ndarray:
    step = max(1, CHUNK_ROWS // fmap.degree)
    return np.concatenate([count_array(fmap, region, ys[i:i + step])
                           for i in range(0, ys.shape[0], step)])


def _moments(counts: np.ndarray) -> tuple[int, float, float]:
    c = counts.astype(float)
    return c.size, float(c.sum()), float((c * c).sum())


def _combine(parts) -> AverageResult:
    total = sum(p[0] for p in parts)
    s1 = sum(p[1] for p in parts)
    s2 = sum(p[2] for p in parts)
    mean = s1 / total
    var = max(s2 / total - mean * mean, 0.0)
    if total > 1:
        var *= total / (total - 1)
    se = math.sqrt(var / total)
    if var <= 1e-24 * max(mean * mean, 1.0):
        se = 0.0
    return AverageResult(mean, se, total, se == 0.0)


def _shard_sizes(samples: int, shards: int) -> list[int]:
    base, extra = divmod(samples, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _sharded(fn, samples: int, rng_seed: int, shards: int, threads: int):
    """Run fn(count, generator) on independent seed-derived shards.

    The shard layout depends only on (samples, rng_seed, shards), so the
    result does not depend on the thread count.
    """
    seqs = np.random.SeedSequence(rng_seed).spawn(shards)
    jobs = [(n, np.random.default_rng(s)) for n, s in zip(_shard_sizes(samples, shards), seqs) if n]
    if threads <= 1:
        return [fn(n, g) for n, g in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _radial_exponent(fmap: QRMap) -> float | None:
    """e such that n(B(0,R), y) = deg * 1{|y| <= R^e} (off a null set), if known."""
    if type(fmap) is PowerMap:
        return float(fmap.d)
    if isinstance(fmap, Winding):
        return 1.0
    return None


def _sphere_fraction_inside(n: int, a: float, t: float, rho: float) -> float | None:
    """H^{n-1} fraction of S(z, t), |z| = a, lying in the closed ball B(0, rho)."""
    if a == 0.0:
        return 1.0 if t <= rho else 0.0
    c = (rho * rho - a * a - t * t) / (2 * a * t)
    c = min(max(c, -1.0), 1.0)
    if n == 2:
        return 1.0 - math.acos(c) / math.pi
    if n == 3:
        return (c + 1.0) / 2.0
    return None


def sphere_average(fmap: QRMap, region: Region, z: ExtendedPoint, t: float,
                   samples: int = 10000, rng_seed: int = 0, exact: bool = True,
                   shards: int = DEFAULT_SHARDS, threads: int = 1) -> AverageResult:
    """Average of n(region, y) over the Euclidean sphere S(z, t).

    With ``exact`` set, maps whose counting function is radial on balls about
    the origin use the closed-form arc/cap fraction instead of sampling.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if samples < 100:
        raise ValueError("samples must be >= 100")
    if z.is_infinity:
        raise ValueError("sphere center must be finite")
    e = _radial_exponent(fmap)
    if exact and e is not None and not region.is_everything and region.metric == "euclidean" \
            and np.all(region.center.to_row() == 0):
        frac = _sphere_fraction_inside(fmap.dim, z.norm(), t, region.radius ** e)
        if frac is not None:
            return AverageResult(fmap.degree * frac, 0.0, 0, True)
    center = z.to_row()

    def shard(count, rng):
        u = rng.standard_normal((count, fmap.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return _moments(_chunked_counts(fmap, region, center + t * u))

    return _combine(_sharded(shard, samples, rng_seed, shards, threads))


def global_average(fmap: QRMap, region: Region = EVERYTHING, samples: int = 10000,
                   rng_seed: int = 0, shards: int = DEFAULT_SHARDS,
                   threads: int = 1) -> AverageResult:
    """Average of n(region, y) over y uniform on the sphere model."""
    if samples < 100:
        raise ValueError("samples must be >= 100")

    def shard(count, rng):
        ys = unlift_array(uniform_sphere(fmap.dim, count, rng))
        return _moments(_chunked_counts(fmap, region, ys))

    return _combine(_sharded(shard, samples, rng_seed, shards, threads))


@dataclass
class GrowthTable:
    rows: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    julia_rate: float = float("nan")
    fatou_rate: float = float("nan")
    truncated: bool = False
    delta: float = 0.1

    header = ("k", "julia_estimate", "julia_std_error", "fatou_estimate", "fatou_std_error")

    def to_dict(self) -> dict:
        return {"columns": list(self.header), "rows": [list(r) for r in self.rows],
                "julia_rate": self.julia_rate, "fatou_rate": self.fatou_rate,
                "truncated": self.truncated, "delta": self.delta}


def fitted_rate(ks, values, tail_from: int | None = None) -> float:
    """exp of the least-squares slope of log(values) against k over the tail.

    Zero entries are dropped; fewer than two positive entries give rate 0.
    """
    ks = np.asarray(ks, dtype=float)
    vals = np.asarray(values, dtype=float)
    keep = vals > 0
    if tail_from is not None:
        keep &= ks >= tail_from
    if keep.sum() < 2:
        return 0.0
    slope = np.polyfit(ks[keep], np.log(vals[keep]), 1)[0]
    return float(math.exp(slope))


def growth_contrast(fmap: QRMap, x_julia: ExtendedPoint, x_fatou: ExtendedPoint,
                    k_max: int, delta: float = 0.1, samples: int = 20000,
                    rng_seed: int = 0, budget: int = 10 ** 6, shards: int = DEFAULT_SHARDS,
                    threads: int = 1) -> GrowthTable:
    """A(B_chi(x, delta), f^k) for k = 1..k_max at a Julia and a Fatou base point.

    The same y-samples are used for every k and both base points.  Rates are
    fitted on the last three k, after the image of the ball has wrapped
    around and the transient faster-than-degree growth is over.
    """
    table = GrowthTable(delta=delta)
    julia_ball = Region(x_julia, delta, "chordal")
    fatou_ball = Region(x_fatou, delta, "chordal")
    for k in range(1, k_max + 1):
        if fmap.degree ** k > budget:
            table.truncated = True
            break
        fk = Iterate(fmap, k)
        res_j = global_average(fk, julia_ball, samples, rng_seed, shards, threads)
        res_f = global_average(fk, fatou_ball, samples, rng_seed, shards, threads)
        table.rows.append((k, res_j.estimate, res_j.std_error, res_f.estimate, res_f.std_error))
    if table.rows:
        ks = [r[0] for r in table.rows]
        tail = max(1, ks[-1] - 2)
        table.julia_rate = fitted_rate(ks, [r[1] for r in table.rows], tail)
        table.fatou_rate = fitted_rate(ks, [r[3] for r in table.rows], tail)
    return table

