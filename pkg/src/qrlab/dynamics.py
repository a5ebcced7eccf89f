"""Forward and backward orbits, Julia-set sampling and coverage diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetExceededError, ExceptionalSeedError, NotPeriodicError
from .extended_space import (ExtendedPoint, as_point_array, chordal_ball_sample,
                             chordal_distance_array, chordal_sphere_sample,
                             lift_array, to_points, unlift_array)
from .maps import QRMap

DEFAULT_BUDGET = 10 ** 6
PERIOD_TOLERANCE = 1e-9
PROBE_RADII = (1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class OrbitRecord:
    points: tuple[ExtendedPoint, ...]
    escaped_at: int | None = None


def forward_orbit(fmap: QRMap, x: ExtendedPoint, N: int,
                  escape_radius: float = 1e6) -> OrbitRecord:
    """x, f(x), ..., f^N(x), cut at the first iterate outside B(escape_radius)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    row = x.to_row()[None, :]
    points = [x]
    if x.norm() > escape_radius:
        return OrbitRecord(tuple(points), 0)
    for k in range(1, N + 1):
        row = fmap.eval_array(row)
        p = ExtendedPoint.from_row(row[0])
        points.append(p)
        if p.norm() > escape_radius:
            return OrbitRecord(tuple(points), k)
    return OrbitRecord(tuple(points), None)


# -- preimage trees ------------------------------------------------------------

@dataclass
class TreeLevel:
    points: np.ndarray      # (M, n)
    indices: np.ndarray     # cumulated local index i(x, f^j), int64
    parents: np.ndarray     # row of the image point in the previous level

    def __len__(self):
        return self.points.shape[0]


@dataclass
class PreimageTree:
    root: ExtendedPoint
    depth: int
    levels: list[TreeLevel]

    def level_points(self, j: int) -> list[ExtendedPoint]:
        return to_points(self.levels[j].points)

    def index_sum(self, j: int) -> int:
        return int(self.levels[j].indices.sum())


def _group_children(slots: np.ndarray, parent_index: np.ndarray):
    """Collapse identical slots per parent; returns points, indices, parents."""
    m, deg, n = slots.shape
    flat = slots.reshape(m * deg, n)
    parent = np.repeat(np.arange(m), deg)
    keys = np.concatenate([parent[:, None].astype(float), flat], axis=1)
    # inf rows compare equal to each other, which is what we want for infinity
    uniq, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    order = np.argsort(first)
    first, counts = first[order], counts[order]
    par = parent[first]
    return flat[first], counts * parent_index[par], par


def full_preimage_tree(fmap: QRMap, y: ExtendedPoint, k: int,
                       budget: int = DEFAULT_BUDGET) -> PreimageTree:
    """All of f^{-j}(y), j <= k, with cumulated indices and parent pointers."""
    if k < 0:
        raise ValueError("depth must be >= 0")
    required = fmap.degree ** k
    if required > budget:
        raise BudgetExceededError(required, budget)
    root = y.to_row()[None, :]
    levels = [TreeLevel(root, np.ones(1, dtype=np.int64), np.full(1, -1))]
    for _ in range(k):
        prev = levels[-1]
        slots = fmap.preimage_slots(prev.points)
        pts, idx, par = _group_children(slots, prev.indices)
        levels.append(TreeLevel(pts, idx, par))
    return PreimageTree(y, k, levels)


# -- Julia clouds --------------------------------------------------------------

@dataclass
class JuliaCloud:
    array: np.ndarray = field(repr=False)
    depth: int
    map: QRMap
    method: str
    seed: ExtendedPoint
    rng_seed: int | None = None

    @property
    def points(self) -> list[ExtendedPoint]:
        return to_points(self.array)

    def __len__(self):
        return self.array.shape[0]


def random_backward_paths(fmap: QRMap, start: np.ndarray, depth: int,
                          rng: np.random.Generator) -> np.ndarray:
    """One random backward path per row of ``start``.

    Each step picks one of the ``degree`` preimage slots uniformly; since a
    point of local index i fills i slots, the branch is chosen with
    probability proportional to the local index.
    """
    pts = as_point_array(start).copy()
    rows = np.arange(pts.shape[0])
    for _ in range(depth):
        slots = fmap.preimage_slots(pts)
        pts = slots[rows, rng.integers(fmap.degree, size=pts.shape[0])]
    return pts


def sample_julia(fmap: QRMap, seed: ExtendedPoint, depth: int, count: int,
                 rng_seed: int = 0, method: str = "random-branch",
                 budget: int = DEFAULT_BUDGET) -> JuliaCloud:
    """Backward-orbit sample of the Julia set started at ``seed``."""
    if depth < 1 or count < 1:
        raise ValueError("depth and count must be >= 1")
    for xi, _, _ in totally_invariant_points(fmap):
        if chordal_distance_array(xi.to_row(), seed.to_row())[0] <= PERIOD_TOLERANCE:
            raise ExceptionalSeedError(
                f"seed {seed} has a finite backward orbit under {fmap.name}")
    if method == "random-branch":
        rng = np.random.default_rng(rng_seed)
        start = np.repeat(seed.to_row()[None, :], count, axis=0)
        arr = random_backward_paths(fmap, start, depth, rng)
    elif method == "full-tree":
        arr = full_preimage_tree(fmap, seed, depth, budget).levels[-1].points
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return JuliaCloud(arr, depth, fmap, method, seed, rng_seed)


# -- point-set geometry in the chordal metric ------------------------------------

def nearest_neighbor_spacing(points) -> float:
    """Largest chordal distance from a cloud point to its nearest neighbor."""
    lifted = lift_array(as_point_array(points))
    if lifted.shape[0] < 2:
        return 0.0
    dist, _ = cKDTree(lifted).query(lifted, k=2)
    return float(dist[:, 1].max())


def hausdorff_chordal(a, b) -> float:
    la, lb = lift_array(as_point_array(a)), lift_array(as_point_array(b))
    d_ab = cKDTree(lb).query(la)[0].max()
    d_ba = cKDTree(la).query(lb)[0].max()
    return float(max(d_ab, d_ba))


def invariance_residual(fmap: QRMap, cloud) -> tuple[float, float]:
    """(Hausdorff distance between f(cloud) and cloud, cloud spacing)."""
    arr = cloud.array if isinstance(cloud, JuliaCloud) else as_point_array(cloud)
    return hausdorff_chordal(fmap.eval_array(arr), arr), nearest_neighbor_spacing(arr)


# -- periodic points -----------------------------------------------------------

def _iterate(fmap: QRMap, arr: np.ndarray, p: int) -> np.ndarray:
    for _ in range(p):
        arr = fmap.eval_array(arr)
    return arr


def classify_periodic(fmap: QRMap, xi: ExtendedPoint, p: int, margin: float = 0.05,
                      samples: int = 200, radii=PROBE_RADII, rng_seed: int = 0) -> str:
    """'attracting', 'repelling' or 'neither' by chordal contraction ratios."""
    row = xi.to_row()[None, :]
    if chordal_distance_array(_iterate(fmap, row, p), row)[0] > PERIOD_TOLERANCE:
        raise NotPeriodicError(f"{xi} is not {p}-periodic for {fmap.name}")
    rng = np.random.default_rng(rng_seed)
    attracting = repelling = True
    for r in radii:
        z = unlift_array(chordal_sphere_sample(row, r, samples, rng))
        ratio = chordal_distance_array(_iterate(fmap, z, p), row) / \
            chordal_distance_array(z, row)
        attracting &= bool(ratio.max() < 1 - margin)
        repelling &= bool(ratio.min() > 1 + margin)
    if attracting:
        return "attracting"
    if repelling:
        return "repelling"
    return "neither"


def totally_invariant_points(fmap: QRMap, max_period: int = 6):
    """Catalog periodic points whose full preimage at the period is themselves.

    Such a cycle consists of branch points of maximal index, so only the
    catalog branch points need to be examined.  Returns (point, period,
    classification) triples.
    """
    out = []
    for bp in fmap.branch_points:
        if bp.index != fmap.degree:
            continue
        row = bp.point.to_row()[None, :]
        orbit, cur, period = [row], row, None
        for p in range(1, max_period + 1):
            cur = fmap.eval_array(cur)
            if chordal_distance_array(cur, row)[0] <= PERIOD_TOLERANCE:
                period = p
                break
            orbit.append(cur)
        if period is None:
            continue
        if all(fmap.local_index_array(o)[0] == fmap.degree for o in orbit):
            out.append((bp.point, period, classify_periodic(fmap, bp.point, period)))
    return out


def exceptional_candidates(fmap: QRMap) -> list[ExtendedPoint]:
    """Totally invariant periodic points that are verified attracting."""
    return [xi for xi, _, kind in totally_invariant_points(fmap) if kind == "attracting"]


# -- coverage of the sphere by forward orbits ---------------------------------------

@dataclass(frozen=True)
class SphereGrid:
    """Equal-area cells on S^n for n = 2 or 3.

    n = 2: ``resolution`` bands of equal height (Archimedes) times
    2*resolution longitude sectors.  n = 3: Hopf coordinates
    (u = s0^2 + s1^2, angle of (s0, s1), angle of (s2, s3)), each split in
    ``resolution`` equal parts; the uniform measure is a product there.
    """

    dim: int
    resolution: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("sphere grids exist for n = 2 and n = 3")
        if self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")

    @property
    def shape(self) -> tuple[int, ...]:
        r = self.resolution
        return (r, 2 * r) if self.dim == 2 else (r, r, r)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def cell_of(self, sphere: np.ndarray) -> np.ndarray:
        """Flat cell ids of points given in sphere coordinates."""
        s = np.atleast_2d(sphere)
        shape = self.shape
        if self.dim == 2:
            band = (s[:, 2] + 1.0) / 2.0
            angle = (np.arctan2(s[:, 1], s[:, 0]) + np.pi) / (2 * np.pi)
            coords = [band, angle]
        else:
            u = s[:, 0] ** 2 + s[:, 1] ** 2
            a1 = (np.arctan2(s[:, 1], s[:, 0]) + np.pi) / (2 * np.pi)
            a2 = (np.arctan2(s[:, 3], s[:, 2]) + np.pi) / (2 * np.pi)
            coords = [u, a1, a2]
        idx = [np.clip((c * m).astype(int), 0, m - 1) for c, m in zip(coords, shape)]
        return np.ravel_multi_index(idx, shape)

    def centers(self) -> np.ndarray:
        """Sphere coordinates of every cell center, in flat-id order."""
        axes = [(np.arange(m) + 0.5) / m for m in self.shape]
        mesh = [g.ravel() for g in np.meshgrid(*axes, indexing="ij")]
        if self.dim == 2:
            z = 2.0 * mesh[0] - 1.0
            phi = 2 * np.pi * mesh[1] - np.pi
            rho = np.sqrt(1.0 - z ** 2)
            return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
        u, a1, a2 = mesh[0], 2 * np.pi * mesh[1] - np.pi, 2 * np.pi * mesh[2] - np.pi
        p, q = np.sqrt(u), np.sqrt(1.0 - u)
        return np.stack([p * np.cos(a1), p * np.sin(a1), q * np.cos(a2), q * np.sin(a2)], axis=1)

    def cells_of_points(self, points: np.ndarray) -> np.ndarray:
        return self.cell_of(lift_array(points))


@dataclass
class CoverageResult:
    covered_fraction: float
    history: list[float]
    grid: SphereGrid
    covered: np.ndarray = field(repr=False)   # boolean per flat cell id


def expansion_coverage(fmap: QRMap, x: ExtendedPoint, radius: float, iterations: int,
                       grid_resolution: int, samples: int | None = None,
                       rng_seed: int = 0) -> CoverageResult:
    """Cells of an equal-area sphere grid met by f^j(B_chi(x, radius)), 1 <= j <= iterations.

    The default sample size grows with the grid (16 points per cell) so that
    refining the grid does not open sampling holes.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    grid = SphereGrid(fmap.dim, grid_resolution)
    if samples is None:
        samples = max(20000, 16 * grid.size)
    rng = np.random.default_rng(rng_seed)
    pts = unlift_array(chordal_ball_sample(x.to_row(), radius, samples, rng))
    covered = np.zeros(grid.size, dtype=bool)
    history = []
    for _ in range(iterations):
        pts = fmap.eval_array(pts)
        covered[grid.cells_of_points(pts)] = True
        history.append(float(covered.mean()))
    return CoverageResult(history[-1] if history else 0.0, history, grid, covered)


def expansion_test(fmap: QRMap, x: ExtendedPoint, radius: float, iterations: int,
                   grid_resolution: int, samples: int | None = None, rng_seed: int = 0) -> float:
    return expansion_coverage(fmap, x, radius, iterations, grid_resolution,
                              samples, rng_seed).covered_fraction


def min_distance_to_cloud(points, cloud) -> float:
    """Smallest chordal distance from any of ``points`` to the cloud."""
    pts = as_point_array(points)
    if pts.shape[0] == 0:
        return math.inf
    arr = cloud.array if isinstance(cloud, JuliaCloud) else as_point_array(cloud)
    return float(cKDTree(lift_array(arr)).query(lift_array(pts))[0].min())

