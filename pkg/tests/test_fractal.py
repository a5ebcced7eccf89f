import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrlab.dynamics import sample_julia
from qrlab.extended_space import ExtendedPoint
from qrlab.fractal import (AtomicMeasure, GaugeFunction, box_dimension, capacity_gauge,
                           capacity_gauge_check, holder_distortion_check, holder_exponent,
                           holder_gauge, holder_stability, lipschitz_dim_bound,
                           mass_distribution_check, preimage_measure, pushforward,
                           separated_preimage_audit)
from qrlab.maps import PowerMap, Quadratic, StretchPower, Winding, catalog_maps

P = ExtendedPoint.finite


def test_lipschitz_bound_examples():
    assert lipschitz_dim_bound(2, 2) == pytest.approx(1.0)
    assert lipschitz_dim_bound(2, 4) == pytest.approx(0.5)
    assert lipschitz_dim_bound(3, 3) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lipschitz_dim_bound(2, 1.0)


def test_holder_gauge_examples():
    h = holder_gauge(2, 0.5)
    assert h.exponent == pytest.approx(-1.0)
    assert h(math.exp(-10)) == pytest.approx(0.1)
    # slower than every power: h(t) / t^eps grows as t decreases
    t1, t2 = math.exp(-10), math.exp(-100)
    for eps in (0.1, 0.5, 1.0):
        assert h(t2) / t2 ** eps > h(t1) / t1 ** eps


@given(st.floats(-5, -0.01), st.floats(0.1, 5), st.floats(0.05, 0.9))
def test_log_gauges_increase_to_zero(q, b, eta):
    h = GaugeFunction.log_power(q, b, eta)
    t = np.geomspace(1e-300, eta, 200)
    assert np.all(np.diff(h(t)) > 0) and h(1e-300) < h(eta)


def test_gauge_validation():
    with pytest.raises(ValueError):
        GaugeFunction.log_power(1.0)        # decreasing
    with pytest.raises(ValueError):
        GaugeFunction.power(-1.0)
    with pytest.raises(ValueError):
        capacity_gauge(2, 0.0)
    assert capacity_gauge(2, 0.5).exponent == pytest.approx(-1.5)


def test_preimage_measure_examples():
    nu = preimage_measure(PowerMap(2), P(1, 0), 3)
    assert len(nu) == 8 and all(w == Fraction(1, 8) for w in nu.weights)
    nu = preimage_measure(PowerMap(2), P(0, 0), 3)
    assert len(nu) == 1 and nu.weights == [Fraction(1)]
    nu = preimage_measure(Quadratic(-1), P(0, 0), 2)
    assert nu.total_mass == 1
    branched = [w for p, w in nu.atoms if p.norm() < 1e-12]
    assert branched == [Fraction(2, 4)]


@pytest.mark.parametrize("fmap", catalog_maps(), ids=lambda f: f.name)
def test_pushforward_is_previous_measure(fmap):
    y = P(*([0.3, 0.2] + [0.1] * (fmap.dim - 2)))
    prev = preimage_measure(fmap, y, 0)
    for k in range(1, 5):
        nu = preimage_measure(fmap, y, k)
        assert nu.total_mass == 1
        assert pushforward(nu, fmap, prev.points).weights == prev.weights
        prev = nu


def test_measure_validation():
    with pytest.raises(ValueError):
        AtomicMeasure(np.zeros((2, 2)), [Fraction(1, 3), Fraction(1, 3)])


def test_mass_distribution_examples():
    nu = preimage_measure(PowerMap(2), P(1, 0), 6)
    assert mass_distribution_check(nu, GaugeFunction.power(1), nu.points, [0.2, 0.1, 0.05]) <= 2
    four = AtomicMeasure.uniform([[0, 0], [1, 0], [0, 1], [1, 1]])
    h2 = GaugeFunction.power(2)
    for r in (1e-2, 1e-3):
        ratio = mass_distribution_check(four, h2, four.points, [r], metric="euclidean")
        assert ratio == pytest.approx(0.25 / r ** 2)
    assert mass_distribution_check(four, GaugeFunction.power(1), four.points, [2.0],
                                   metric="euclidean") <= 1


def test_box_dimension_examples():
    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * math.pi, 10 ** 4)
    circle = np.stack([np.cos(th), np.sin(th)], axis=1)
    assert box_dimension(circle).value == pytest.approx(1.0, abs=0.1)
    square = rng.uniform(0, 1, (10 ** 4, 2))
    assert box_dimension(square).value == pytest.approx(2.0, abs=0.1)
    cloud = sample_julia(PowerMap(2), P(2, 0), 20, 10 ** 4, 0)
    assert box_dimension(cloud).value == pytest.approx(1.0, abs=0.1)


def test_audit_square_map():
    cloud = sample_julia(PowerMap(2), P(2, 0), 20, 5000, 0)
    a = separated_preimage_audit(PowerMap(2), cloud)
    assert a.m == 2 and a.delta == pytest.approx(2, abs=0.05) and a.L == pytest.approx(2, abs=0.05)
    b = separated_preimage_audit(Quadratic(0), cloud)
    assert (a.m, a.L, a.bound) == (b.m, b.L, b.bound) and a.delta == pytest.approx(b.delta)


def test_audit_stretch_power():
    f = StretchPower(3, 2)
    cloud = sample_julia(f, P(1, 0), 15, 5000, 0)
    a = separated_preimage_audit(f, cloud)
    assert a.m == 3 and a.delta > 0 and math.isfinite(a.L)
    assert a.bound == pytest.approx(math.log(3) / math.log(a.L))
    assert a.bound > 0


def test_capacity_gauge_check_bounded():
    f = StretchPower(3, 2)
    cloud = sample_julia(f, P(1, 0), 15, 5000, 0)
    eps = math.log(3) / math.log(2) - 1
    check = capacity_gauge_check(cloud, 2, eps, preimage_measure(f, P(1, 0), 6))
    assert 0 < check.max_ratio <= 2 and check.upper_content > 0


def test_holder_exponents():
    assert holder_exponent(PowerMap(2), 2) == pytest.approx(2)
    assert holder_exponent(StretchPower(3, 2), 3) == pytest.approx(1.5)
    assert holder_exponent(Winding(3, 2), 3) == pytest.approx(1)


def test_holder_distortion_square_map():
    # |z^2| / |z|^2 = 1 exactly at the origin
    assert holder_distortion_check(PowerMap(2), P(0, 0), 2.0, 0.1) == pytest.approx(1.0)
    st_ok = holder_stability(PowerMap(2), P(0, 0), 2.0)
    st_bad = holder_stability(PowerMap(2), P(0, 0), 3.0)
    assert st_ok.stable and not st_bad.stable
    at_inf = holder_stability(PowerMap(3), ExtendedPoint.infinity(2), 3.0)
    assert at_inf.stable and at_inf.worst_B[0] == pytest.approx(1.0)
