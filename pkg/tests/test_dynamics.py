import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrlab.errors import BudgetExceededError, ExceptionalSeedError
from qrlab.dynamics import (SphereGrid, classify_periodic, exceptional_candidates,
                            expansion_coverage, forward_orbit, full_preimage_tree,
                            hausdorff_chordal, invariance_residual, nearest_neighbor_spacing,
                            sample_julia, totally_invariant_points)
from qrlab.extended_space import ExtendedPoint, lift_array, sample_chordal_uniform_array
from qrlab.maps import PowerMap, Quadratic, StretchPower, Winding

P = ExtendedPoint.finite
INF = ExtendedPoint.infinity(2)


def test_forward_orbit_escape():
    # |f^k(3)| = 3^(2^k): 3, 9, 81, 6561, 4.3e7, so the first iterate beyond 1e6 is k = 4
    rec = forward_orbit(PowerMap(2), P(3, 0), 10)
    assert rec.escaped_at == 4
    assert [round(p.coords[0]) for p in rec.points[:4]] == [3, 9, 81, 6561]


def test_forward_orbit_bounded():
    rec = forward_orbit(PowerMap(2), P(0.5, 0), 8)
    assert rec.escaped_at is None and rec.points[-1].norm() < 1e-50
    rec = forward_orbit(Quadratic(0), P(math.cos(1), math.sin(1)), 30)
    assert rec.escaped_at is None
    assert all(abs(p.norm() - 1) < 1e-6 for p in rec.points)


def test_preimage_tree_examples():
    t = full_preimage_tree(PowerMap(2), P(1, 0), 3)
    z = np.sort(np.angle(t.levels[3].points[:, 0] + 1j * t.levels[3].points[:, 1]))
    assert len(t.levels[3]) == 8 and np.all(t.levels[3].indices == 1)
    assert np.allclose(np.diff(z), 2 * math.pi / 8)
    t = full_preimage_tree(PowerMap(2), P(0, 0), 3)
    assert len(t.levels[3]) == 1 and t.levels[3].indices[0] == 8
    # z^2 - 1 = 0 gives +-1; z^2 - 1 = 1 gives +-sqrt 2 and z^2 - 1 = -1 gives 0 (index 2)
    t = full_preimage_tree(Quadratic(-1), P(0, 0), 2)
    lvl = t.levels[2]
    got = sorted(zip(np.round(lvl.points[:, 0], 9), lvl.indices.tolist()))
    assert got == [(-round(math.sqrt(2), 9), 1), (0.0, 2), (round(math.sqrt(2), 9), 1)]
    assert t.index_sum(2) == 4


@given(st.integers(1, 5), st.floats(-2, 2), st.floats(-2, 2))
def test_tree_index_sum_is_degree_power(k, a, b):
    t = full_preimage_tree(StretchPower(3, 2), P(a, b), k)
    assert t.index_sum(k) == 3 ** k
    parents = t.levels[k].parents
    assert parents.min() >= 0 and parents.max() < len(t.levels[k - 1])


def test_tree_budget():
    with pytest.raises(BudgetExceededError):
        full_preimage_tree(PowerMap(3), P(1, 0), 20, budget=1000)


def test_julia_cloud_of_square_map():
    cloud = sample_julia(PowerMap(2), P(2, 0), 20, 2000, 0)
    assert np.all(np.abs(np.linalg.norm(cloud.array, axis=1) - 1) < 1e-4)
    cloud = sample_julia(Quadratic(0), P(1, 0), 12, 4000, 1)
    ang = np.angle(cloud.array[:, 0] + 1j * cloud.array[:, 1])
    hist = np.histogram(ang, bins=8, range=(-math.pi, math.pi))[0]
    assert hist.min() > 0.7 * hist.mean()


def test_julia_cloud_of_stretch_power():
    f = StretchPower(3, 2)
    cloud = sample_julia(f, P(1, 0), 15, 4000, 0)
    diam = np.ptp(cloud.array, axis=0).max()
    assert 0.5 <= diam <= 4
    haus, spacing = invariance_residual(f, cloud)
    assert haus <= 2 * spacing


def test_julia_cloud_deterministic_and_full_tree():
    a = sample_julia(Quadratic(-1), P(2, 0), 10, 300, 5)
    b = sample_julia(Quadratic(-1), P(2, 0), 10, 300, 5)
    assert np.array_equal(a.array, b.array)
    tree = sample_julia(PowerMap(2), P(2, 0), 6, 1, method="full-tree")
    assert len(tree) == 64


@pytest.mark.parametrize("fmap,seed", [(PowerMap(2), P(0, 0)), (PowerMap(3), INF),
                                       (Winding(3, 2), P(0, 0))])
def test_exceptional_seed_rejected(fmap, seed):
    with pytest.raises(ExceptionalSeedError):
        sample_julia(fmap, seed, 5, 10)


def test_classification_examples():
    f = PowerMap(2)
    assert classify_periodic(f, P(0, 0), 1) == "attracting"
    assert classify_periodic(f, P(1, 0), 1) == "repelling"
    assert classify_periodic(f, INF, 1) == "attracting"


def _as_set(points):
    return sorted("inf" if p.is_infinity else str(tuple(round(c, 9) for c in p.coords))
                  for p in points)


def test_exceptional_candidates():
    both = _as_set([P(0, 0), INF])
    assert _as_set(exceptional_candidates(PowerMap(3))) == both
    assert _as_set(exceptional_candidates(Quadratic(0))) == both
    assert _as_set(exceptional_candidates(Quadratic(-1))) == ["inf"]
    # totally invariant for the winding map, but not attracting
    kinds = {k for _, _, k in totally_invariant_points(Winding(3, 2))}
    assert "attracting" not in kinds and exceptional_candidates(Winding(3, 2)) == []


def test_quadratic_minus_one_has_no_finite_singleton_orbit():
    # brute-force oracle: every finite preimage tree node has at least two children by depth 4
    t = full_preimage_tree(Quadratic(-1), P(0, 0), 4)
    assert len(t.levels[4]) > 4


def test_spacing_and_hausdorff():
    pts = sample_chordal_uniform_array(2, 500, 3)
    assert hausdorff_chordal(pts, pts) == 0
    assert nearest_neighbor_spacing(pts) > 0
    shifted = pts[::-1]
    assert hausdorff_chordal(pts, shifted) == 0


@given(st.sampled_from([2, 3]), st.integers(4, 16))
def test_sphere_grid_cells_partition(dim, res):
    grid = SphereGrid(dim, res)
    pts = sample_chordal_uniform_array(dim, 300, res)
    cells = grid.cells_of_points(pts)
    assert cells.min() >= 0 and cells.max() < np.prod(grid.shape)
    centers = grid.centers()
    assert np.allclose(np.linalg.norm(centers, axis=1), 1)
    assert np.array_equal(grid.cell_of(centers), np.arange(centers.shape[0]))


def test_expansion_examples():
    f = PowerMap(2)
    julia = expansion_coverage(f, P(1, 0), 0.05, 12, 32)
    assert julia.covered_fraction >= 0.95
    fatou = expansion_coverage(f, P(0, 0), 0.05, 12, 32)
    assert fatou.covered_fraction <= 0.1
    assert np.all(np.diff(fatou.history) >= 0)
    assert np.all(np.diff(np.diff(fatou.history)) <= 1e-12)
    for it in (1, 4, 12):
        assert expansion_coverage(Winding(3, 2), P(1, 0), 0.05, it, 32).covered_fraction <= 0.5


def test_quadratic_tree_is_odd_symmetric():
    # f(-z) = f(z), so every preimage level is symmetric under z -> -z
    pts = sample_julia(Quadratic(-1), P(2, 0), 8, 1, method="full-tree").array
    key = lambda a: np.round(a, 9)[np.lexsort(np.round(a, 9).T[::-1])]
    assert np.array_equal(key(pts), key(-pts + 0.0))
