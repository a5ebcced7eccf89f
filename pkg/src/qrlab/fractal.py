"""Gauge functions, atomic preimage measures, box counting and dimension bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import DEFAULT_BUDGET, JuliaCloud, full_preimage_tree, nearest_neighbor_spacing
from .extended_space import (ExtendedPoint, as_point_array, chordal_distance_array,
                             infinite_rows, lift_array, to_points)
from .maps import QRMap


# -- gauge functions -------------------------------------------------------------

@dataclass(frozen=True)
class GaugeFunction:
    """h(t) = t^exponent (form "power") or ((1/scale) log(1/t))^exponent ("log_power").

    The logarithmic form needs a negative exponent and a domain inside (0, 1).
    Construction checks that h is positive and increasing on 1000 points of
    the domain (0, eta].
    """

    form: str
    exponent: float
    scale: float = 1.0
    eta: float = math.inf

    def __post_init__(self):
        if self.form not in ("power", "log_power"):
            raise ValueError(f"unknown gauge form {self.form!r}")
        if self.form == "log_power":
            if math.isinf(self.eta):
                object.__setattr__(self, "eta", 0.5)
            if not 0 < self.eta < 1:
                raise ValueError("logarithmic gauges live on (0, eta] with eta < 1")
            if self.scale <= 0:
                raise ValueError("scale must be positive")
        top = self.eta if math.isfinite(self.eta) else 1.0
        grid = np.linspace(top / 1000, top, 1000)
        values = self(grid)
        if not (np.all(values > 0) and np.all(np.diff(values) > 0)):
            raise ValueError(f"{self} is not a positive increasing function on its domain")

    @classmethod
    def power(cls, d: float) -> "GaugeFunction":
        return cls("power", float(d))

    @classmethod
    def log_power(cls, q: float, b: float = 1.0, eta: float = 0.5) -> "GaugeFunction":
        return cls("log_power", float(q), float(b), float(eta))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "power":
            out = t ** self.exponent
        else:
            with np.errstate(divide="ignore"):
                out = (np.log(1.0 / t) / self.scale) ** self.exponent
        return float(out) if out.ndim == 0 else out

    def in_domain(self, t) -> bool:
        t = np.asarray(t, dtype=float)
        return bool(np.all((t > 0) & (t <= self.eta)))

    def to_dict(self) -> dict:
        return {"form": self.form, "exponent": self.exponent, "scale": self.scale,
                "eta": self.eta if math.isfinite(self.eta) else None}


def holder_gauge(m: int, alpha: float, c_scale: float = 1.0) -> GaugeFunction:
    """Logarithmic gauge with exponent log m / log alpha for a Hoelder map with m-fold preimages."""
    if int(m) != m or m < 2:
        raise ValueError("m must be an integer >= 2")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return GaugeFunction.log_power(math.log(m) / math.log(alpha), c_scale)


def capacity_gauge(n: int, epsilon: float) -> GaugeFunction:
    """h(t) = (log 1/t)^(1 - n - epsilon); positive content under it forces positive capacity."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return GaugeFunction.log_power(1.0 - n - epsilon)


def lipschitz_dim_bound(m: int, L: float) -> float:
    """Lower bound log m / log L for the dimension of a set with m separated preimages."""
    if int(m) != m or m < 2:
        raise ValueError("m must be an integer >= 2")
    if not L > 1:
        raise ValueError(f"the Lipschitz constant must exceed 1, got {L}")
    return math.log(m) / math.log(L)


# -- atomic measures ---------------------------------------------------------------

@dataclass
class AtomicMeasure:
    points: np.ndarray = field(repr=False)      # (M, n)
    weights: list[Fraction] = field(repr=False)

    def __post_init__(self):
        self.points = as_point_array(self.points)
        if len(self.weights) != self.points.shape[0]:
            raise ValueError("one weight per atom is required")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if sum(self.weights, Fraction(0)) != 1:
            raise ValueError("weights must sum to exactly 1")

    @classmethod
    def uniform(cls, points) -> "AtomicMeasure":
        pts = as_point_array(points)
        return cls(pts, [Fraction(1, pts.shape[0])] * pts.shape[0])

    @property
    def atoms(self) -> list[tuple[ExtendedPoint, Fraction]]:
        return list(zip(to_points(self.points), self.weights))

    @property
    def total_mass(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def float_weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def __len__(self):
        return self.points.shape[0]

    def to_dict(self) -> dict:
        return {"atoms": [[None if not np.isfinite(r).all() else r.tolist(), str(w)]
                          for r, w in zip(self.points, self.weights)]}


def preimage_measure(fmap: QRMap, y: ExtendedPoint, k: int,
                     budget: int = DEFAULT_BUDGET) -> AtomicMeasure:
    """nu_k: atoms on f^{-k}(y) weighted by i(x, f^k) / deg(f)^k."""
    level = full_preimage_tree(fmap, y, k, budget).levels[-1]
    total = fmap.degree ** k
    return AtomicMeasure(level.points, [Fraction(int(i), total) for i in level.indices])


def pushforward(measure: AtomicMeasure, fmap: QRMap, support, tol: float = 1e-9) -> AtomicMeasure:
    """f_* measure expressed on ``support``; every image atom must land on a support point."""
    target = as_point_array(support)
    images = fmap.eval_array(measure.points)
    dist, idx = cKDTree(lift_array(target)).query(lift_array(images))
    if dist.max() > tol:
        raise ValueError(f"an image atom is {dist.max():.3g} away from the support")
    weights = [Fraction(0)] * target.shape[0]
    for j, w in zip(idx, measure.weights):
        weights[j] += w
    return AtomicMeasure(target, weights)


def _ball_masses(points: np.ndarray, weights: np.ndarray, centers: np.ndarray,
                 r: float, metric: str) -> np.ndarray:
    if metric == "chordal":
        tree = cKDTree(lift_array(points))
        hits = tree.query_ball_point(lift_array(centers), r)
    elif metric == "euclidean":
        fin = ~infinite_rows(points)
        tree = cKDTree(points[fin])
        w_fin = weights[fin]
        hits = tree.query_ball_point(centers, r)
        return np.array([w_fin[h].sum() for h in hits])
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return np.array([weights[h].sum() for h in hits])


def mass_distribution_check(measure: AtomicMeasure, gauge: GaugeFunction, centers, radii,
                            metric: str = "chordal") -> float:
    """max over centers and radii of measure(B(x, r)) / h(r)."""
    radii = [float(r) for r in radii]
    if not gauge.in_domain(radii):
        raise ValueError(f"radii {radii} leave the gauge domain (0, {gauge.eta}]")
    ctr = as_point_array(centers)
    w = measure.float_weights()
    worst = 0.0
    for r in radii:
        masses = _ball_masses(measure.points, w, ctr, r, metric)
        worst = max(worst, float(masses.max()) / gauge(r))
    return worst


# -- box counting ------------------------------------------------------------------

@dataclass
class DimensionEstimate:
    value: float
    scales_used: list[tuple[float, int]]
    fit_r2: float

    def to_dict(self) -> dict:
        return {"value": self.value, "fit_r2": self.fit_r2,
                "scales": [[s, c] for s, c in self.scales_used]}


def box_counts(points: np.ndarray, sizes) -> list[int]:
    """Number of occupied axis-aligned boxes for each box size."""
    lo = points.min(axis=0)
    out = []
    for s in sizes:
        keys = np.floor((points - lo) / s).astype(np.int64)
        out.append(int(np.unique(keys, axis=0).shape[0]))
    return out


def box_dimension(cloud, scale_min: float | None = None, scale_max: float | None = None,
                  n_scales: int = 8) -> DimensionEstimate:
    """Least-squares slope of log N(s) against log(1/s) on a geometric ladder.

    Infinite points are dropped.  Defaults: scale_max is a quarter of the
    cloud's extent and scale_min is scale_max / 16.
    """
    arr = cloud.array if isinstance(cloud, JuliaCloud) else as_point_array(cloud)
    arr = arr[~infinite_rows(arr)]
    if arr.shape[0] == 0:
        return DimensionEstimate(0.0, [], 1.0)
    extent = float((arr.max(axis=0) - arr.min(axis=0)).max())
    if extent == 0.0:
        return DimensionEstimate(0.0, [], 1.0)
    if scale_max is None:
        scale_max = extent / 4
    if scale_min is None:
        scale_min = scale_max / 16
    if not 0 < scale_min < scale_max:
        raise ValueError("need 0 < scale_min < scale_max")
    if n_scales < 4:
        raise ValueError("the fit needs at least 4 scales")
    sizes = np.geomspace(scale_max, scale_min, n_scales)
    counts = box_counts(arr, sizes)
    x, y = np.log(1.0 / sizes), np.log(counts)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else 1.0
    return DimensionEstimate(max(float(slope), 0.0), list(zip(sizes.tolist(), counts)), r2)


# -- separated preimages and gauge checks ----------------------------------------------

@dataclass
class AuditResult:
    m: int
    delta: float
    L: float
    hypothesis_met: bool
    bound: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lipschitz_estimate(fmap: QRMap, points: np.ndarray, pair_radius: float = 0.01,
                       floor: float = 1e-9, max_pairs: int = 2_000_000,
                       rng_seed: int = 0) -> float:
    """max chi(f(x), f(x')) / chi(x, x') over pairs closer than pair_radius."""
    lifted = lift_array(points)
    pairs = cKDTree(lifted).query_pairs(pair_radius, output_type="ndarray")
    if pairs.shape[0] > max_pairs:
        keep = np.random.default_rng(rng_seed).choice(pairs.shape[0], max_pairs, replace=False)
        pairs = pairs[keep]
    if pairs.shape[0] == 0:
        return float("nan")
    images = fmap.eval_array(points)
    d = chordal_distance_array(points[pairs[:, 0]], points[pairs[:, 1]])
    ok = d >= floor
    if not ok.any():
        return float("nan")
    di = chordal_distance_array(images[pairs[ok, 0]], images[pairs[ok, 1]])
    return float((di / d[ok]).max())


def separated_preimage_audit(fmap: QRMap, cloud, m_target: int = 2,
                             pair_radius: float = 0.01) -> AuditResult:
    """Separated-preimage data (m, delta, L) of a Julia cloud and the dimension bound.

    For every cloud point y the distinct preimages lying within three cloud
    spacings of the cloud are kept; m is the smallest number kept and delta
    the smallest chordal separation among kept preimages.
    """
    arr = cloud.array if isinstance(cloud, JuliaCloud) else as_point_array(cloud)
    spacing = nearest_neighbor_spacing(arr)
    tree = cKDTree(lift_array(arr))
    slots = fmap.preimage_slots(arr)
    n_pts, deg, n = slots.shape
    near = tree.query(lift_array(slots.reshape(-1, n)))[0].reshape(n_pts, deg) <= 3 * spacing
    m, delta = deg, math.inf
    for i in range(n_pts):
        kept = np.unique(slots[i][near[i]], axis=0)
        m = min(m, kept.shape[0])
        if kept.shape[0] >= 2:
            a, b = np.triu_indices(kept.shape[0], 1)
            delta = min(delta, float(chordal_distance_array(kept[a], kept[b]).min()))
    L = lipschitz_estimate(fmap, arr, pair_radius)
    met = m >= max(2, m_target)
    bound = lipschitz_dim_bound(m, L) if met and L > 1 else 0.0
    return AuditResult(int(m), delta if m >= 2 else 0.0, L, met, bound)


@dataclass
class GaugeCheck:
    upper_content: float
    lower_certificate: float
    max_ratio: float
    gauge: GaugeFunction

    def to_dict(self) -> dict:
        return {"upper_content": self.upper_content, "lower_certificate": self.lower_certificate,
                "max_ratio": self.max_ratio, "gauge": self.gauge.to_dict()}


def gauge_content_upper(points: np.ndarray, gauge: GaugeFunction, n_scales: int = 12) -> float:
    """min over box sizes s of N(s) h(diam of a box); 0 for a single point."""
    pts = points[~infinite_rows(points)]
    if pts.shape[0] == 0 or float(np.ptp(pts, axis=0).max()) == 0.0:
        return 0.0
    dim = pts.shape[1]
    top = min(gauge.eta, float(np.ptp(pts, axis=0).max()) * math.sqrt(dim)) / math.sqrt(dim)
    sizes = np.geomspace(top, top * 1e-3, n_scales)
    counts = box_counts(pts, sizes)
    return float(min(c * gauge(s * math.sqrt(dim)) for s, c in zip(sizes, counts)))


def capacity_gauge_check(cloud, n: int, epsilon: float, measure: AtomicMeasure | None = None,
                         radii=(0.2, 0.1, 0.05, 0.02), max_centers: int = 500,
                         rng_seed: int = 0) -> GaugeCheck:
    """Upper content and mass-distribution certificate for h(t) = (log 1/t)^(1-n-eps).

    Without a measure the uniform measure on the cloud is used.  The centers
    are (up to ``max_centers``) atoms of the measure.
    """
    gauge = capacity_gauge(n, epsilon)
    arr = cloud.array if isinstance(cloud, JuliaCloud) else as_point_array(cloud)
    upper = gauge_content_upper(arr, gauge)
    if measure is None:
        measure = AtomicMeasure.uniform(arr)
    centers = measure.points
    if centers.shape[0] > max_centers:
        pick = np.random.default_rng(rng_seed).choice(centers.shape[0], max_centers, replace=False)
        centers = centers[np.sort(pick)]
    ratio = mass_distribution_check(measure, gauge, centers, radii)
    return GaugeCheck(upper, 1.0 / ratio if ratio > 0 else 0.0, ratio, gauge)


# -- Hoelder distortion at branch points -----------------------------------------------

def _invert(x: np.ndarray) -> np.ndarray:
    """x -> x / |x|^2, exchanging 0 and infinity."""
    out = np.full_like(x, np.inf)
    inf = infinite_rows(x)
    sq = np.einsum("ij,ij->i", np.where(inf[:, None], 0.0, x), np.where(inf[:, None], 0.0, x))
    fin = ~inf & (sq > 0)
    out[fin] = x[fin] / sq[fin, None]
    out[inf] = 0.0
    return out


def holder_ratios(fmap: QRMap, x0: ExtendedPoint, mu: float, unit_sample: np.ndarray,
                  r_max: float) -> float:
    """max |g(y) - g(x0)| / |y - x0|^mu over the scaled sample, g = f near a finite x0.

    At infinity the map is read in the inversion chart, where x0 becomes 0.
    """
    y = unit_sample * r_max
    if x0.is_infinity:
        if not fmap.polynomial_type:
            raise ValueError("inversion chart needs f(inf) = inf")
        gy = _invert(fmap.eval_array(_invert(y)))
        num = np.linalg.norm(gy, axis=1)
        den = np.linalg.norm(y, axis=1)
    else:
        base = x0.to_row()
        fy = fmap.eval_array(base + y)
        num = np.linalg.norm(fy - fmap.eval_array(base[None, :])[0], axis=1)
        den = np.linalg.norm(y, axis=1)
    ok = den > 0
    return float((num[ok] / den[ok] ** mu).max())


def unit_ball_sample(n: int, samples: int, rng_seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    u = rng.standard_normal((samples, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rng.uniform(size=(samples, 1)) ** (1.0 / n)


def holder_distortion_check(fmap: QRMap, x0: ExtendedPoint, mu: float, r_max: float,
                            samples: int = 4000, rng_seed: int = 0) -> float:
    """worst_B = max over y in B(x0, r_max) of |f(y) - f(x0)| / |y - x0|^mu."""
    return holder_ratios(fmap, x0, mu, unit_ball_sample(fmap.dim, samples, rng_seed), r_max)


def holder_exponent(fmap: QRMap, index: int) -> float:
    """(i / K_I)^(1/(n-1))."""
    return (index / fmap.inner_dilatation) ** (1.0 / (fmap.dim - 1))


@dataclass
class HolderStability:
    mu: float
    radii: tuple[float, ...]
    worst_B: list[float]
    slope: float
    stable: bool


def holder_stability(fmap: QRMap, x0: ExtendedPoint, mu: float,
                     radii=(0.1, 0.05, 0.025), samples: int = 4000, rng_seed: int = 0,
                     slope_tolerance: float = -0.1) -> HolderStability:
    """worst_B at halving radii (common random numbers) and its log-log slope.

    A slope below ``slope_tolerance`` means worst_B blows up as r_max -> 0.
    """
    unit = unit_ball_sample(fmap.dim, samples, rng_seed)
    values = [holder_ratios(fmap, x0, mu, unit, r) for r in radii]
    slope = float(np.polyfit(np.log(radii), np.log(values), 1)[0])
    return HolderStability(mu, tuple(radii), values, slope, slope >= slope_tolerance)
