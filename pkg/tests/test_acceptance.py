"""Acceptance criteria, one test each, with fixed tolerances.

Each test prints one ``criterion N <name>: PASS|FAIL`` line; the lines are
also collected into the terminal summary.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qrlab.capacity import (annulus_condenser, complement_capacity_analysis, grid_condenser,
                            ring_capacity_exact, solve_capacity)
from qrlab.counting import EVERYTHING, global_average
from qrlab.dynamics import (classify_periodic, exceptional_candidates, expansion_test,
                            invariance_residual, min_distance_to_cloud, sample_julia)
from qrlab.extended_space import ExtendedPoint, chordal_distance_array
from qrlab.fractal import (GaugeFunction, box_dimension, capacity_gauge_check, holder_exponent,
                           holder_stability, mass_distribution_check, preimage_measure,
                           pushforward, separated_preimage_audit)
from qrlab.maps import (Iterate, PowerMap, Quadratic, StretchPower, Winding, catalog_maps,
                        iterate_dilatation_check)
from qrlab.verify import UNMET, SuiteContext, run_check

P = ExtendedPoint.finite
INF = ExtendedPoint.infinity(2)


def report(number, name, ok, **info):
    detail = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in info.items())
    line = f"criterion {number} {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_01_ring_capacity():
    ok, info = True, {}
    for n, res, tol, limit in ((2, 513, 0.05, 30.0), (3, 129, 0.10, 300.0)):
        exact = ring_capacity_exact(n, 1.0, 2.0)
        t0 = time.perf_counter()
        value = solve_capacity(annulus_condenser(n, 1.0, 2.0, res)).value
        sec = time.perf_counter() - t0
        rel = abs(value - exact) / exact
        ok &= rel <= tol and sec < limit
        info[f"rel_err_{n}d"], info[f"seconds_{n}d"] = rel, sec
    report(1, "ring-capacity", ok, **info)


def test_criterion_02_capacity_monotonicity():
    rng = np.random.default_rng(2024)
    violations = 0
    for trial in range(10):
        n, res = (2, 97) if trial < 8 else (3, 25)
        c = rng.uniform(-0.1, 0.1, n)
        r_core, r_dom = rng.uniform(0.1, 0.2), rng.uniform(0.5, 0.6)
        grow_core, grow_dom = rng.uniform(0.03, 0.1), rng.uniform(0.05, 0.3)
        dist = lambda m: np.sqrt(sum((mi - ci) ** 2 for mi, ci in zip(m, c)))

        def cap(rd, rc):
            return solve_capacity(grid_condenser(n, res, 1.0, lambda m: dist(m) < rd,
                                                 lambda m: dist(m) <= rc)).value

        base = cap(r_dom, r_core)
        tol = 1e-6 * base
        violations += cap(r_dom + grow_dom, r_core) > base + tol
        violations += cap(r_dom, r_core + grow_core) < base - tol
    report(2, "capacity-monotonicity", violations == 0, pairs=10, violations=violations)


def test_criterion_03_degree_identity():
    t0 = time.perf_counter()
    bad = []
    for fmap in catalog_maps():
        for k in range(1, 6):
            res = global_average(Iterate(fmap, k), EVERYTHING, 200, rng_seed=k)
            if res.estimate != fmap.degree ** k or res.std_error != 0:
                bad.append((fmap.name, k, res.estimate))
    sec = time.perf_counter() - t0
    report(3, "degree-identity", not bad and sec < 60, mismatches=len(bad), seconds=sec)


def test_criterion_04_julia_oracle():
    t0 = time.perf_counter()
    cloud = sample_julia(PowerMap(2), P(2, 0), 20, 10 ** 4, 0)
    unit = cloud.array / np.linalg.norm(cloud.array, axis=1, keepdims=True)
    worst = float(chordal_distance_array(cloud.array, unit).max())
    dim = box_dimension(cloud).value
    sec = time.perf_counter() - t0
    report(4, "julia-oracle", worst <= 0.01 and abs(dim - 1) <= 0.1 and sec < 60,
           max_distance_to_circle=worst, box_dimension=dim, seconds=sec)


def test_criterion_05_complete_invariance():
    ratios = {}
    for fmap, start in ((PowerMap(2), P(2, 0)), (Quadratic(-1), P(2, 0)),
                        (StretchPower(3, 2), P(1, 0))):
        haus, spacing = invariance_residual(fmap, sample_julia(fmap, start, 15, 5000, 1))
        ratios[fmap.name] = haus / spacing
    report(5, "complete-invariance", max(ratios.values()) <= 3,
           **{k: float(v) for k, v in ratios.items()})


def _keys(points):
    return sorted("inf" if p.is_infinity else str(tuple(round(c, 9) for c in p.coords))
                  for p in points)


def test_criterion_06_exceptional_set():
    ok, gaps = True, {}
    for fmap, expected in ((PowerMap(2), [P(0, 0), INF]), (PowerMap(3), [P(0, 0), INF]),
                           (Quadratic(-1), [INF])):
        found = exceptional_candidates(fmap)
        ok &= _keys(found) == _keys(expected)
        ok &= all(classify_periodic(fmap, xi, 1, rng_seed=7) == "attracting" for xi in found)
        gap = min_distance_to_cloud(found, sample_julia(fmap, P(2, 0), 15, 5000, 2))
        ok &= gap > 0.05
        gaps[fmap.name] = gap
    report(6, "exceptional-set", ok, **gaps)


def test_criterion_07_expansion_dichotomy():
    f = PowerMap(2)
    julia = expansion_test(f, P(1, 0), 0.05, 12, 32)
    fatou = expansion_test(f, P(0, 0), 0.05, 12, 32)
    ratios = []
    for sphere_res, chart_res in ((16, 129), (32, 257), (64, 513)):
        s = complement_capacity_analysis(f, P(1, 0), 0.05, 12, sphere_res, chart_res)
        ratios.append(s.value / s.single_cell_baseline)
    ok = julia >= 0.95 and fatou <= 0.1 and all(r < 4 for r in ratios)
    report(7, "expansion-dichotomy", ok, julia_coverage=julia, fatou_coverage=fatou,
           worst_score_over_baseline=max(ratios))


def test_criterion_08_sharpness_control():
    f = Winding(3, 2)
    coverage = [expansion_test(f, P(1, 0), 0.05, it, 32) for it in (1, 2, 4, 8, 12, 24)]
    margins = []
    for it in (4, 12):
        s = complement_capacity_analysis(f, P(1, 0), 0.05, it, 32, 257)
        margins.append(s.value - s.fixed_ball_baseline((0.0, 0.0), 0.5))
    status = run_check(7, SuiteContext(0, f)).status
    ok = max(coverage) <= 0.5 and min(margins) >= 0 and status == UNMET
    report(8, "sharpness-control", ok, max_coverage=max(coverage),
           min_score_minus_baseline=min(margins), expansion_check_status=status)


def test_criterion_09_measure_suite():
    ok = True
    for fmap in catalog_maps():
        y = P(*([0.3, 0.2] + [0.1] * (fmap.dim - 2)))
        prev = preimage_measure(fmap, y, 0)
        for k in range(1, 7):
            nu = preimage_measure(fmap, y, k)
            ok &= nu.total_mass == 1 and pushforward(nu, fmap, prev.points).weights == prev.weights
            prev = nu
    nu6 = preimage_measure(PowerMap(2), P(1, 0), 6)
    ratio = mass_distribution_check(nu6, GaugeFunction.power(1), nu6.points, [0.2, 0.1, 0.05])
    report(9, "measure-suite", ok and ratio <= 2, exact_masses_and_pushforwards=ok,
           max_ratio=ratio)


def test_criterion_10_dimension_bounds():
    circle = sample_julia(PowerMap(2), P(2, 0), 20, 10 ** 4, 0)
    audit = separated_preimage_audit(PowerMap(2), circle)
    box = box_dimension(circle).value
    f = StretchPower(3, 2)
    cloud = sample_julia(f, P(1, 0), 15, 10 ** 4, 0)
    audit_sp = separated_preimage_audit(f, cloud)
    eps = math.log(3) / math.log(2) - 1
    ratios = [capacity_gauge_check(cloud, 2, eps, preimage_measure(f, P(1, 0), k)).max_ratio
              for k in (6, 7, 8)]
    ok = (abs(audit.bound - 1) <= 0.05 and abs(audit.bound - box) <= 0.15
          and audit_sp.bound > 0 and max(ratios) <= 2)
    report(10, "dimension-bounds", ok, circle_bound=audit.bound, circle_box=box,
           stretch_bound=audit_sp.bound, gauge_max_ratio=max(ratios))


def test_criterion_11_holder_distortion():
    rows = []
    for fmap in catalog_maps():
        for bp in fmap.branch_points:
            mu = holder_exponent(fmap, bp.index)
            right = holder_stability(fmap, bp.point, mu)
            wrong = holder_stability(fmap, bp.point, mu + 1)
            if not (right.stable and not wrong.stable):
                rows.append(f"{fmap.name}@{'inf' if bp.point.is_infinity else bp.point.coords}"
                            f"[slope {right.slope:.2f}, control {wrong.slope:.2f}]")
    report(11, "holder-distortion", not rows, failing=";".join(rows) or "none")


def test_criterion_12_dilatation_composition():
    rng = np.random.default_rng(12)
    worst = 0.0
    for fmap in (StretchPower(3, 2), Winding(2, 2)):
        pts = []
        while len(pts) < 20:
            x = rng.normal(size=2)
            x *= rng.uniform(0.5, 1.1) / np.linalg.norm(x)
            if fmap.branch_distance(x[None, :])[0] > 0.1:
                pts.append(P(*x))
        for k in (1, 2, 3):
            for x in pts:
                est, bound = iterate_dilatation_check(fmap, x, k)
                worst = max(worst, est / bound)
    report(12, "dilatation-composition", worst <= 1.05, worst_estimate_over_bound=worst)


def test_criterion_13_verify_end_to_end(tmp_path):
    outputs, codes, seconds = [], [], []
    for run in range(2):
        out = tmp_path / f"run{run}"
        t0 = time.perf_counter()
        proc = subprocess.run([sys.executable, "-m", "qrlab.cli", "verify", "--seed", "0",
                               "--out", str(out)], capture_output=True, text=True)
        seconds.append(time.perf_counter() - t0)
        codes.append(proc.returncode)
        outputs.append((out / "report.json").read_bytes())
    report_json = json.loads(outputs[0])
    statuses = [c["status"] for c in report_json["checks"]]
    numbers = [c["number"] for c in report_json["checks"]]
    failed = "fail" in statuses
    ok = (outputs[0] == outputs[1] and numbers == list(range(1, 13))
          and max(seconds) < 600 and codes[0] == codes[1] == (1 if failed else 0))
    report(13, "verify-end-to-end", ok, identical_reports=outputs[0] == outputs[1],
           checks=len(numbers), seconds=max(seconds), exit_code=codes[0],
           failed_checks=[c["anchor"] for c in report_json["checks"] if c["status"] == "fail"])
