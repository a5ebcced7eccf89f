"""Condenser capacity by minimising the discrete n-Dirichlet energy on a grid.

The grid is a regular lattice of nodes.  Each lattice cube is split into n!
simplices (Freudenthal/Kuhn triangulation) and the potential is taken
piecewise linear on them.  On the simplex following the axis permutation
``sigma`` the gradient components are plain edge differences along the path
``v0 -> v0 + e_sigma0 -> ...``, so only axis-aligned edges ever enter the
energy.  For p = 2 this reproduces the (2n+1)-point Laplacian exactly.

The p-energy (p = n) is minimised by a preconditioned nonlinear relaxation:
the lagged-diffusivity (Kacanov) matrix is the preconditioner, a line
search on the directional derivative picks the step and an Armijo check
guarantees a non-increasing energy history.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp

from .errors import DegenerateCondenserError
from .extended_space import lift_array, sphere_area, unlift_array

REGULARIZATION = 1e-8


def ring_capacity_exact(n: int, r: float, s: float) -> float:
    """Capacity of the ring condenser (B(s), closed B(r)), 0 < r < s."""
    if not 0 < r < s:
        raise ValueError(f"need 0 < r < s, got r={r}, s={s}")
    return sphere_area(n - 1) * math.log(s / r) ** (1 - n)


@dataclass
class Condenser:
    """A grid-discretised condenser (G, C).

    Masks live on grid *nodes*: ``domain_mask`` marks nodes of G and
    ``core_mask`` nodes of C.  The potential is pinned to 1 on C and to 0
    outside G.
    """

    grid_spacing: float
    domain_mask: np.ndarray
    core_mask: np.ndarray
    origin: np.ndarray | None = None
    potential: np.ndarray | None = None

    def __post_init__(self):
        self.domain_mask = np.asarray(self.domain_mask, dtype=bool)
        self.core_mask = np.asarray(self.core_mask, dtype=bool)
        if self.origin is None:
            self.origin = np.zeros(self.dim)
        self.origin = np.asarray(self.origin, dtype=float)

    @property
    def dim(self) -> int:
        return self.domain_mask.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.domain_mask.shape

    def node_coordinates(self) -> list[np.ndarray]:
        """Open meshgrid of node coordinates, one array per axis."""
        axes = [self.origin[a] + self.grid_spacing * np.arange(m)
                for a, m in enumerate(self.shape)]
        return np.meshgrid(*axes, indexing="ij", sparse=True)

    def validate(self):
        if self.grid_spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.core_mask.shape != self.domain_mask.shape:
            raise ValueError("core and domain masks differ in shape")
        if not self.core_mask.any():
            raise DegenerateCondenserError("core C is empty on the grid")
        if (self.core_mask & ~self.domain_mask).any():
            raise DegenerateCondenserError("core C is not contained in G")
        for a in range(self.dim):
            for end in (0, -1):
                face = np.take(self.domain_mask, end, axis=a)
                if face.any():
                    raise DegenerateCondenserError(
                        "G reaches the grid boundary; enlarge the grid")
        outside = ~self.domain_mask
        for a in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[a], hi[a] = slice(0, -1), slice(1, None)
            touching = (self.core_mask[tuple(lo)] & outside[tuple(hi)]) | \
                       (self.core_mask[tuple(hi)] & outside[tuple(lo)])
            if touching.any():
                raise DegenerateCondenserError("core C touches the boundary of G")

    def boundary_values(self) -> np.ndarray:
        return self.core_mask.astype(float)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "shape": list(self.shape),
            "grid_spacing": self.grid_spacing,
            "origin": self.origin.tolist(),
            "domain_nodes": int(self.domain_mask.sum()),
            "core_nodes": int(self.core_mask.sum()),
        }


@dataclass
class CapacityResult:
    value: float
    energy_history: list[float]
    grid_spacing: float
    converged: bool
    iterations: int = 0
    seconds: float = 0.0
    potential: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "energy_history": self.energy_history,
            "grid_spacing": self.grid_spacing,
            "converged": self.converged,
            "iterations": self.iterations,
            "seconds": self.seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# -- condenser builders ------------------------------------------------------

def grid_condenser(n: int, resolution: int, half_width: float, domain_fn, core_fn) -> Condenser:
    """Condenser on the node grid of [-half_width, half_width]^n.

    ``domain_fn`` and ``core_fn`` take the open meshgrid and return masks.
    """
    h = 2.0 * half_width / (resolution - 1)
    axes = [-half_width + h * np.arange(resolution)] * n
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    dom = np.broadcast_to(domain_fn(mesh), (resolution,) * n).copy()
    core = np.broadcast_to(core_fn(mesh), (resolution,) * n).copy() & dom
    return Condenser(h, dom, core, origin=np.full(n, -half_width))


def _radius(mesh, center=None):
    if center is None:
        center = np.zeros(len(mesh))
    return np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, center)))


def ball_condenser(n: int, resolution: int, outer: float, core_fn,
                   outer_center=None) -> Condenser:
    """G = B(outer_center, outer); the grid leaves two spare node layers outside G."""
    half_width = outer * (resolution - 1) / (resolution - 5)
    if outer_center is not None:
        half_width += float(np.max(np.abs(outer_center)))
    return grid_condenser(n, resolution, half_width,
                          lambda m: _radius(m, outer_center) < outer, core_fn)


def annulus_condenser(n: int, r: float, s: float, resolution: int) -> Condenser:
    """The ring condenser (B(s), closed B(r)) on a resolution^n grid."""
    if not 0 < r < s:
        raise ValueError(f"need 0 < r < s, got r={r}, s={s}")
    return ball_condenser(n, resolution, s, lambda m: _radius(m) <= r)


def single_node_condenser(n: int, resolution: int, outer: float, center=None) -> Condenser:
    """Core is the single grid node nearest ``center`` (default origin)."""
    cond = ball_condenser(n, resolution, outer, lambda m: np.zeros(1, dtype=bool))
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    idx = np.rint((center - cond.origin) / cond.grid_spacing).astype(int)
    cond.core_mask[tuple(idx)] = True
    return cond


# -- energy ------------------------------------------------------------------

def _path_offsets(perm):
    n = len(perm)
    offsets = [np.zeros(n, dtype=int)]
    for a in perm:
        nxt = offsets[-1].copy()
        nxt[a] = 1
        offsets.append(nxt)
    return offsets


def _cell_view(u, offset):
    return u[tuple(slice(o, u.shape[a] - 1 + o) for a, o in enumerate(offset))]


class _Energy:
    """Discrete energy sum_T vol(T) (|grad u|^2 + eps^2)^(p/2) on the Kuhn mesh."""

    def __init__(self, shape, h, p, eps):
        self.shape, self.h, self.p, self.eps = shape, h, p, eps
        self.n = len(shape)
        self.vol = h ** self.n / math.factorial(self.n)
        self.perms = list(itertools.permutations(range(self.n)))

    def _diffs(self, u, perm):
        offs = _path_offsets(perm)
        views = [_cell_view(u, o) for o in offs]
        return [views[k + 1] - views[k] for k in range(self.n)], offs

    def _squared_grad(self, diffs):
        s = diffs[0] ** 2
        for d in diffs[1:]:
            s += d ** 2
        s /= self.h ** 2
        return s

    def value(self, u, regularized=True) -> float:
        eps2 = self.eps ** 2 if regularized else 0.0
        total = 0.0
        for perm in self.perms:
            diffs, _ = self._diffs(u, perm)
            s = self._squared_grad(diffs)
            if self.p == 2:
                total += s.sum()
            else:
                total += np.power(s + eps2, self.p / 2).sum()
        return self.vol * total

    def edge_weights(self, u):
        """Per-axis edge weight arrays W_a of the lagged-diffusivity Laplacian."""
        weights = []
        for a in range(self.n):
            wshape = list(self.shape)
            wshape[a] -= 1
            weights.append(np.zeros(wshape))
        for perm in self.perms:
            diffs, offs = self._diffs(u, perm)
            if self.p == 2:
                w = 2.0 * self.vol / self.h ** 2
            else:
                s = self._squared_grad(diffs)
                w = self.vol * self.p * np.power(s + self.eps ** 2, (self.p - 2) / 2) / self.h ** 2
            for k, a in enumerate(perm):
                start = offs[k]
                sl = tuple(slice(start[b], self.shape[b] - 1 + start[b]) if b != a
                           else slice(0, self.shape[a] - 1) for b in range(self.n))
                weights[a][sl] += w
        return weights


def _laplacian(weights, shape, free):
    """Weighted graph Laplacian restricted to free nodes, plus full-node apply."""
    n = len(shape)
    size = int(np.prod(shape))
    idx = np.arange(size).reshape(shape)
    compact = np.full(size, -1)
    free_flat = free.ravel()
    compact[free_flat] = np.arange(free_flat.sum())
    diag = np.zeros(size)
    rows, cols, vals = [], [], []
    for a in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[a], hi[a] = slice(0, -1), slice(1, None)
        i = idx[tuple(lo)].ravel()
        j = idx[tuple(hi)].ravel()
        w = np.asarray(np.broadcast_to(weights[a], idx[tuple(lo)].shape)).ravel()
        np.add.at(diag, i, w)
        np.add.at(diag, j, w)
        both = free_flat[i] & free_flat[j]
        ci, cj, cw = compact[i[both]], compact[j[both]], -w[both]
        rows += [ci, cj]
        cols += [cj, ci]
        vals += [cw, cw]
    m = int(free_flat.sum())
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag[free_flat])
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(m, m))
    return mat


def _apply_laplacian(weights, u):
    """Return L(W) u on all nodes."""
    out = np.zeros_like(u)
    n = u.ndim
    for a in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[a], hi[a] = slice(0, -1), slice(1, None)
        flux = weights[a] * (u[tuple(lo)] - u[tuple(hi)])
        out[tuple(lo)] += flux
        out[tuple(hi)] -= flux
    return out


def _amg_hierarchy(mat):
    # pyamg draws spectral-radius start vectors from the global RNG; pin it so
    # results are reproducible, and restore the caller's state afterwards
    state = np.random.get_state()
    np.random.seed(0)
    try:
        return pyamg.smoothed_aggregation_solver(mat, max_coarse=500)
    finally:
        np.random.set_state(state)


def _solve_spd(mat, rhs, rtol, hierarchy=None):
    if hierarchy is None:
        hierarchy = _amg_hierarchy(mat)
    x = hierarchy.solve(rhs, tol=rtol, maxiter=200, accel="cg")
    return x, hierarchy


def _line_minimum(energy, u, free, step, slope, max_evals=6):
    """Approximate minimiser of the convex energy along u + alpha * step.

    Regula falsi on the directional derivative, bracketed from alpha = 0.
    """
    def dphi(alpha):
        trial = u.copy()
        trial[free] += alpha * step
        return float(_apply_laplacian(energy.edge_weights(trial), trial)[free] @ step)

    if energy.p == 2:
        return 1.0
    lo, dlo = 0.0, slope
    hi, dhi = 1.0, dphi(1.0)
    evals = 1
    while dhi < 0 and evals < max_evals:
        lo, dlo = hi, dhi
        hi *= 2.0
        dhi = dphi(hi)
        evals += 1
    if dhi < 0:
        return hi
    alpha = hi
    while evals < max_evals:
        alpha = lo - dlo * (hi - lo) / (dhi - dlo)
        d = dphi(alpha)
        evals += 1
        if abs(d) <= 0.05 * abs(slope):
            break
        if d < 0:
            lo, dlo = alpha, d
        else:
            hi, dhi = alpha, d
    return alpha


def solve_capacity(condenser: Condenser, p_exponent: float | None = None,
                   max_iters: int = 60, tolerance: float = 1e-7,
                   eps: float = REGULARIZATION, linear_rtol: float = 1e-9,
                   initial=None, log=None) -> CapacityResult:
    """Minimise the discrete p-energy over potentials pinned by the condenser.

    ``p_exponent`` defaults to the grid dimension (the conformally invariant
    case).  Non-convergence is reported through ``converged=False`` with the
    best value reached, not by raising.
    """
    condenser.validate()
    n = condenser.dim
    p = float(n if p_exponent is None else p_exponent)
    t0 = time.perf_counter()
    free = condenser.domain_mask & ~condenser.core_mask
    if initial is not None:
        u = np.where(free, np.clip(initial, 0.0, 1.0), condenser.boundary_values())
    elif p != 2:
        u = solve_capacity(condenser, 2.0, tolerance=tolerance,
                           linear_rtol=linear_rtol).potential
    else:
        u = condenser.boundary_values()
    energy = _Energy(condenser.shape, condenser.grid_spacing, p, eps)

    history = [energy.value(u)]
    converged = False
    hierarchy = None
    it = 0
    for it in range(1, max_iters + 1):
        weights = energy.edge_weights(u)
        grad = _apply_laplacian(weights, u)[free]
        if p != 2 or hierarchy is None:
            # the p = 2 matrix is constant, so its hierarchy is built once
            floor = 1e-10 * max(float(w.max()) for w in weights)
            mat = _laplacian([np.maximum(w, floor) for w in weights], condenser.shape, free)
            hierarchy = None
        step, hierarchy = _solve_spd(mat, -grad, linear_rtol, hierarchy)
        slope = float(grad @ step)
        if slope >= 0:
            converged = True
            break
        alpha = _line_minimum(energy, u, free, step, slope)
        accepted = False
        while alpha > 1e-8:
            trial = u.copy()
            trial[free] += alpha * step
            e_trial = energy.value(trial)
            if e_trial <= history[-1] + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            converged = abs(slope) <= tolerance * history[-1]
            break
        u = trial
        prev = history[-1]
        history.append(e_trial)
        if log is not None:
            log(f"iter {it}: energy {e_trial:.8g} step {alpha}")
        if (prev - e_trial) <= tolerance * abs(e_trial):
            converged = True
            break
    value = energy.value(u, regularized=False)
    np.clip(u, 0.0, 1.0, out=u)
    condenser.potential = u
    return CapacityResult(value=value, energy_history=history,
                          grid_spacing=condenser.grid_spacing, converged=converged,
                          iterations=it, seconds=time.perf_counter() - t0, potential=u)


# -- smallness of orbit complements ----------------------------------------------

CHART_DOMAIN_RADIUS = 4.0
CHART_CORE_RADIUS = 3.0


@dataclass(frozen=True)
class SphereChart:
    """Bounded chart of the extended space: a reflection of the sphere taking
    ``pole`` to the north pole, followed by stereographic projection.

    Both steps are Moebius, so capacity-zero sets stay capacity zero.
    """

    pole: np.ndarray

    @property
    def reflection(self) -> np.ndarray:
        m = self.pole.shape[0]
        north = np.zeros(m)
        north[-1] = 1.0
        v = self.pole - north
        if np.linalg.norm(v) < 1e-12:
            return np.eye(m)
        return np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)

    def to_chart(self, points) -> np.ndarray:
        return unlift_array(lift_array(points) @ self.reflection.T)

    def chart_to_sphere(self, chart_points) -> np.ndarray:
        return lift_array(chart_points) @ self.reflection.T

    def from_chart(self, chart_points) -> np.ndarray:
        return unlift_array(self.chart_to_sphere(chart_points))


@dataclass
class ComplementScore:
    value: float
    single_cell_baseline: float
    covered_fraction: float
    uncovered_cells: int
    core_nodes: int
    chart: SphereChart = field(repr=False)
    chart_resolution: int = 0
    sphere_resolution: int = 0

    def fixed_ball_baseline(self, center, radius: float) -> float:
        """Capacity of a Euclidean ball of the original coordinates, same chart and grid."""
        center = np.asarray(center, dtype=float)
        return _chart_core_capacity(
            self.chart, self.chart_resolution,
            lambda orig, sph: np.linalg.norm(np.where(np.isfinite(orig), orig, np.inf)
                                             - center, axis=1) <= radius)


def _chart_nodes(n: int, resolution: int):
    cond = ball_condenser(n, resolution, CHART_DOMAIN_RADIUS, lambda m: np.zeros(1, dtype=bool))
    mesh = np.meshgrid(*[cond.origin[a] + cond.grid_spacing * np.arange(resolution)
                         for a in range(n)], indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    return cond, nodes


def _chart_core_capacity(chart: SphereChart, resolution: int, selector,
                         ensure_origin: bool = False) -> float:
    """Capacity of (B(0, 4), chart nodes in B(0, 3) accepted by ``selector``).

    ``selector`` receives original coordinates and sphere coordinates of the
    nodes.  Returns 0 when no node is selected.
    """
    n = chart.pole.shape[0] - 1
    cond, nodes = _chart_nodes(n, resolution)
    inside = np.linalg.norm(nodes, axis=1) <= CHART_CORE_RADIUS
    sphere = chart.chart_to_sphere(nodes[inside])
    chosen = np.zeros(nodes.shape[0], dtype=bool)
    chosen[np.flatnonzero(inside)] = selector(unlift_array(sphere), sphere)
    if ensure_origin:
        chosen[np.argmin(np.linalg.norm(nodes, axis=1))] = True
    if not chosen.any():
        return 0.0
    cond.core_mask = chosen.reshape(cond.shape)
    return solve_capacity(cond).value


def complement_capacity_analysis(fmap, x, radius: float, iterations: int, grid: int,
                                 chart_resolution: int = 257, samples: int | None = None,
                                 rng_seed: int = 0) -> ComplementScore:
    """Capacity of the grid complement of the forward orbit of B_chi(x, radius)."""
    from .dynamics import expansion_coverage

    cov = expansion_coverage(fmap, x, radius, iterations, grid, samples, rng_seed)
    centers = cov.grid.centers()
    uncovered = ~cov.covered
    if uncovered.any() and cov.covered.any():
        from scipy.spatial import cKDTree
        gap = cKDTree(centers[uncovered]).query(centers[cov.covered])[0]
        pole = centers[cov.covered][int(np.argmax(gap))]
    else:
        pole = np.zeros(fmap.dim + 1)
        pole[-1] = 1.0
    chart = SphereChart(pole)
    score = ComplementScore(0.0, 0.0, cov.covered_fraction, int(uncovered.sum()), 0,
                            chart, chart_resolution, grid)
    origin_cell = cov.grid.cell_of(chart.chart_to_sphere(np.zeros((1, fmap.dim))))[0]
    score.single_cell_baseline = _chart_core_capacity(
        chart, chart_resolution, lambda orig, sph: cov.grid.cell_of(sph) == origin_cell,
        ensure_origin=True)
    if uncovered.any():
        score.value = _chart_core_capacity(
            chart, chart_resolution, lambda orig, sph: uncovered[cov.grid.cell_of(sph)])
        _, nodes = _chart_nodes(fmap.dim, chart_resolution)
        inside = np.linalg.norm(nodes, axis=1) <= CHART_CORE_RADIUS
        score.core_nodes = int(uncovered[cov.grid.cell_of(
            chart.chart_to_sphere(nodes[inside]))].sum())
    return score


def complement_capacity_score(fmap, x, radius: float, iterations: int, grid: int,
                              chart_resolution: int = 257, samples: int | None = None,
                              rng_seed: int = 0) -> float:
    return complement_capacity_analysis(fmap, x, radius, iterations, grid,
                                        chart_resolution, samples, rng_seed).value
