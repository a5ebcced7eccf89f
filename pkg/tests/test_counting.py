import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrlab.counting import (EVERYTHING, Region, count_array, count_in, fitted_rate,
                            global_average, growth_contrast, sphere_average)
from qrlab.dynamics import sample_julia
from qrlab.extended_space import ExtendedPoint
from qrlab.maps import Iterate, PowerMap, StretchPower, Winding, catalog_maps

P = ExtendedPoint.finite


def test_counting_examples():
    f = PowerMap(3)
    assert count_in(f, Region.ball((0, 0), 2), P(1, 0)) == 3
    assert count_in(f, Region.ball((0, 0), 0.5), P(1, 0)) == 0
    assert count_in(f, Region.ball((0, 0), 0.5), P(0, 0)) == 3


@given(st.floats(0.05, 3), st.floats(0.05, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_count_monotone_in_region(r1, r2, a, b):
    lo, hi = sorted((r1, r2))
    f = StretchPower(3, 2)
    y = np.array([[a, b]])
    small = count_array(f, Region.ball((0.1, 0), lo), y)[0]
    big = count_array(f, Region.ball((0.1, 0), hi), y)[0]
    assert 0 <= small <= big <= count_array(f, EVERYTHING, y)[0] == 3


def test_sphere_average_exact_profiles():
    f = PowerMap(2)
    disk = Region.ball((0, 0), 1)
    assert sphere_average(f, disk, P(0, 0), 0.5).estimate == 2
    assert sphere_average(f, disk, P(0, 0), 2).estimate == 0
    exact = sphere_average(f, disk, P(1.5, 0), 1)
    # arc of S(1.5, 1) inside the unit disk, by quadrature
    th = np.linspace(0, 2 * math.pi, 200001)[:-1]
    frac = float((np.hypot(1.5 + np.cos(th), np.sin(th)) <= 1).mean())
    assert exact.estimate == pytest.approx(2 * frac, abs=1e-4)
    mc = sphere_average(f, disk, P(1.5, 0), 1, samples=40000, exact=False)
    assert abs(mc.estimate - exact.estimate) <= 3 * mc.std_error + 1e-12


def test_sphere_average_exact_in_three_dimensions():
    f = Winding(2, 3)
    ball = Region.ball((0, 0, 0), 1)
    exact = sphere_average(f, ball, P(0.5, 0.2, 0.1), 0.9)
    mc = sphere_average(f, ball, P(0.5, 0.2, 0.1), 0.9, samples=40000, exact=False)
    assert abs(mc.estimate - exact.estimate) <= 3 * mc.std_error


@pytest.mark.parametrize("fmap", catalog_maps(), ids=lambda f: f.name)
def test_global_average_is_degree(fmap):
    res = global_average(fmap, EVERYTHING, 500, 1)
    assert res.estimate == fmap.degree and res.std_error == 0 and res.exact


def test_global_average_of_iterate():
    assert global_average(Iterate(PowerMap(2), 3), EVERYTHING, 500).estimate == 8


def test_global_average_of_unit_disk():
    res = global_average(PowerMap(2), Region.ball((0, 0), 1), 40000, 2)
    assert abs(res.estimate - 1.0) <= 3 * res.std_error


def test_thread_count_does_not_change_results():
    region = Region.ball((0.2, 0.1), 0.7)
    a = global_average(StretchPower(3, 2), region, 5000, 9, threads=1)
    b = global_average(StretchPower(3, 2), region, 5000, 9, threads=4)
    assert a == b


def test_region_validation():
    with pytest.raises(ValueError):
        Region.ball((0, 0), -1)
    with pytest.raises(ValueError):
        Region(ExtendedPoint.infinity(2), 1.0, "euclidean")
    with pytest.raises(ValueError):
        Region.ball((0, 0), 3, "chordal")
    with pytest.raises(ValueError):
        sphere_average(PowerMap(2), EVERYTHING, P(0, 0), 0.0)


def test_fitted_rate():
    assert fitted_rate([1, 2, 3, 4], [3, 9, 27, 81]) == pytest.approx(3)
    assert fitted_rate([1, 2, 3], [0, 0, 0]) == 0


def test_growth_contrast_square_map():
    table = growth_contrast(PowerMap(2), P(1, 0), P(0, 0), 6, samples=20000)
    julia = [r[1] for r in table.rows]
    fatou = [r[3] for r in table.rows]
    assert julia[-1] / julia[-2] == pytest.approx(2, abs=0.2)
    assert all(v <= 1e-2 for v in fatou[1:])


def test_growth_contrast_stretch_power():
    f = StretchPower(3, 2)
    x = sample_julia(f, P(1, 0), 15, 1, 0).points[0]
    table = growth_contrast(f, x, P(0, 0), 5, samples=20000)
    assert 2.5 <= table.julia_rate <= 3.2
