"""The end-to-end verification suite: one named check per acceptance property.

Every check returns a :class:`CheckResult` with status ``pass``, ``fail``,
``skipped`` (a budget was exceeded) or ``hypothesis-not-met`` (the map has
deg(f) <= K_I(f), so the expanding-map conclusions are not expected to hold
and measured values are recorded without judgement).

Run without a map, the suite uses the fixed oracle maps of each check.  With
a map, the map-generic checks run on that map instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .capacity import (annulus_condenser, complement_capacity_analysis,
                       grid_condenser, ring_capacity_exact, solve_capacity)
from .counting import global_average
from .dynamics import (classify_periodic, exceptional_candidates, expansion_test,
                       invariance_residual, min_distance_to_cloud, sample_julia,
                       totally_invariant_points)
from .errors import BudgetExceededError
from .extended_space import ExtendedPoint, chordal_distance_array
from .fractal import (GaugeFunction, box_dimension, capacity_gauge_check, holder_exponent,
                      holder_stability, mass_distribution_check, preimage_measure, pushforward,
                      separated_preimage_audit)
from .maps import (Iterate, PowerMap, QRMap, Quadratic, StretchPower, Winding, catalog_maps,
                   iterate_dilatation_check)

PASS, FAIL, SKIPPED, UNMET = "pass", "fail", "skipped", "hypothesis-not-met"


@dataclass
class CheckResult:
    number: int
    anchor: str
    status: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = {"number": self.number, "anchor": self.anchor, "status": self.status,
               "details": self.details}
        if timing:
            out["seconds"] = self.seconds
        return out


@dataclass
class SuiteContext:
    seed: int = 0
    fmap: QRMap | None = None
    threads: int = 1

    @property
    def custom(self) -> bool:
        return self.fmap is not None


def expanding(fmap: QRMap) -> bool:
    """The standing hypothesis deg(f) > K_I(f)."""
    return fmap.degree > fmap.inner_dilatation


def default_start(fmap: QRMap) -> ExtendedPoint:
    return ExtendedPoint.finite(*([1.0] + [0.0] * (fmap.dim - 1)))


# -- individual checks ---------------------------------------------------------------

def check_ring_capacity(ctx: SuiteContext) -> tuple[bool, dict]:
    rows = []
    ok = True
    for n, res, tol, limit in ((2, 513, 0.05, 30.0), (3, 129, 0.10, 300.0)):
        exact = ring_capacity_exact(n, 1.0, 2.0)
        t0 = time.perf_counter()
        r = solve_capacity(annulus_condenser(n, 1.0, 2.0, res))
        sec = time.perf_counter() - t0
        rel = (r.value - exact) / exact
        good = abs(rel) <= tol and sec < limit and r.converged
        ok &= good
        rows.append({"n": n, "grid": res, "value": r.value, "exact": exact,
                     "relative_error": rel, "tolerance": tol, "converged": r.converged,
                     "within_time": sec < limit, "ok": good})
    return ok, {"cases": rows}


def _random_condenser_pair(rng, n):
    """(G, C) plus an enlarged G' and an enlarged C' on one grid."""
    res = 97 if n == 2 else 25
    half = 1.0
    c0 = rng.uniform(-0.15, 0.15, n)
    r_core = rng.uniform(0.1, 0.2)
    r_dom = rng.uniform(0.55, 0.65)
    extra_c = c0 + rng.uniform(-0.2, 0.2, n)
    r_extra = rng.uniform(0.1, 0.25)
    bump = c0 + rng.uniform(-0.05, 0.05, n)
    r_bump = r_core + rng.uniform(0.03, 0.1)

    def dist(mesh, c):
        return np.sqrt(sum((m - ci) ** 2 for m, ci in zip(mesh, c)))

    def build(dom_fn, core_fn):
        return grid_condenser(n, res, half, dom_fn, core_fn)

    dom = lambda m: dist(m, c0) < r_dom
    dom_big = lambda m: (dist(m, c0) < r_dom) | (dist(m, extra_c) < r_extra + 0.2)
    core = lambda m: dist(m, c0) <= r_core
    core_big = lambda m: (dist(m, c0) <= r_core) | (dist(m, bump) <= r_bump)
    return build(dom, core), build(dom_big, core), build(dom, core_big)


def check_capacity_monotonicity(ctx: SuiteContext) -> tuple[bool, dict]:
    rng = np.random.default_rng(ctx.seed)
    rows = []
    ok = True
    for trial in range(10):
        n = 2 if trial < 8 else 3
        base, big_domain, big_core = _random_condenser_pair(rng, n)
        v = solve_capacity(base).value
        v_dom = solve_capacity(big_domain).value
        v_core = solve_capacity(big_core).value
        tol = 1e-6 * v
        good = v_dom <= v + tol and v_core >= v - tol
        ok &= good
        rows.append({"n": n, "base": v, "larger_domain": v_dom, "larger_core": v_core,
                     "ok": good})
    return ok, {"pairs": rows}


def check_degree_identity(ctx: SuiteContext) -> tuple[bool, dict]:
    maps = [ctx.fmap] if ctx.custom else catalog_maps()
    rows = []
    ok = True
    for fmap in maps:
        for k in range(1, 6):
            if fmap.degree ** k > 10 ** 6:
                continue
            res = global_average(Iterate(fmap, k), samples=400, rng_seed=ctx.seed + k,
                                 threads=ctx.threads)
            good = res.estimate == fmap.degree ** k and res.std_error == 0.0
            ok &= good
            rows.append({"map": fmap.to_dict(), "k": k, "estimate": res.estimate,
                         "expected": fmap.degree ** k, "ok": good})
    return ok, {"cases": rows}


def check_julia_oracle(ctx: SuiteContext) -> tuple[bool, dict]:
    fmap = PowerMap(2)
    cloud = sample_julia(fmap, ExtendedPoint.finite(2.0, 0.0), 20, 10 ** 4, ctx.seed)
    unit = cloud.array / np.linalg.norm(cloud.array, axis=1, keepdims=True)
    worst = float(chordal_distance_array(cloud.array, unit).max())
    dim = box_dimension(cloud).value
    ok = worst <= 0.01 and abs(dim - 1.0) <= 0.1
    return ok, {"max_distance_to_circle": worst, "box_dimension": dim}


def _clouds(ctx: SuiteContext):
    if ctx.custom:
        return [(ctx.fmap, default_start(ctx.fmap))]
    return [(PowerMap(2), ExtendedPoint.finite(2.0, 0.0)),
            (Quadratic(-1), ExtendedPoint.finite(2.0, 0.0)),
            (StretchPower(3, 2), ExtendedPoint.finite(1.0, 0.0))]


def check_complete_invariance(ctx: SuiteContext) -> tuple[bool, dict]:
    rows = []
    ok = True
    for fmap, start in _clouds(ctx):
        cloud = sample_julia(fmap, start, 15, 5000, ctx.seed)
        haus, spacing = invariance_residual(fmap, cloud)
        good = haus <= 3 * spacing
        ok &= good
        rows.append({"map": fmap.to_dict(), "hausdorff": haus, "spacing": spacing, "ok": good})
    return ok, {"cases": rows}


def _point_set(points):
    return sorted("inf" if p.is_infinity else str(tuple(round(c, 12) for c in p.coords))
                  for p in points)


def check_exceptional_set(ctx: SuiteContext) -> tuple[bool, dict]:
    if ctx.custom:
        cases = [(ctx.fmap, None)]
    else:
        zero, inf = ExtendedPoint.finite(0.0, 0.0), ExtendedPoint.infinity(2)
        cases = [(PowerMap(2), [zero, inf]), (PowerMap(3), [zero, inf]),
                 (Quadratic(-1), [inf]), (StretchPower(3, 2), [zero, inf])]
    rows = []
    ok = True
    for fmap, expected in cases:
        triples = [t for t in totally_invariant_points(fmap) if t[2] == "attracting"]
        found = [xi for xi, _, _ in triples]
        # independent re-classification with the suite seed
        kinds = [classify_periodic(fmap, xi, p, rng_seed=ctx.seed + 1) for xi, p, _ in triples]
        start = default_start(fmap) if ctx.custom else ExtendedPoint.finite(2.0, 0.0)
        cloud = sample_julia(fmap, start, 15, 5000, ctx.seed)
        gap = min_distance_to_cloud(found, cloud) if found else math.inf
        good = all(k == "attracting" for k in kinds) and gap > 0.05
        if expected is not None:
            good &= _point_set(found) == _point_set(expected)
        ok &= good
        rows.append({"map": fmap.to_dict(), "candidates": _point_set(found),
                     "classification": kinds, "distance_to_cloud": gap, "ok": good})
    return ok, {"cases": rows}


def check_expansion_dichotomy(ctx: SuiteContext) -> tuple[bool, dict]:
    fmap = ctx.fmap if ctx.custom else PowerMap(2)
    if ctx.custom:
        cloud = sample_julia(fmap, default_start(fmap), 15, 200, ctx.seed)
        x_julia = cloud.points[0]
        attracting = [p for p in exceptional_candidates(fmap) if not p.is_infinity]
        x_fatou = attracting[0] if attracting else None
    else:
        x_julia, x_fatou = ExtendedPoint.finite(1.0, 0.0), ExtendedPoint.finite(0.0, 0.0)
    julia_cov = expansion_test(fmap, x_julia, 0.05, 12, 32, rng_seed=ctx.seed)
    fatou_cov = expansion_test(fmap, x_fatou, 0.05, 12, 32, rng_seed=ctx.seed) \
        if x_fatou is not None else None
    refinements = [(16, 129), (32, 257), (64, 513)] if fmap.dim == 2 else [(8, 17), (16, 33), (32, 65)]
    scores = []
    ok = julia_cov >= 0.95 and (fatou_cov is None or fatou_cov <= 0.1)
    for sphere_res, chart_res in refinements:
        s = complement_capacity_analysis(fmap, x_julia, 0.05, 12, sphere_res, chart_res,
                                         rng_seed=ctx.seed)
        good = s.value < 4 * s.single_cell_baseline
        ok &= good
        scores.append({"sphere_grid": sphere_res, "chart_grid": chart_res, "score": s.value,
                       "single_cell_baseline": s.single_cell_baseline,
                       "covered_fraction": s.covered_fraction, "ok": good})
    return ok, {"map": fmap.to_dict(), "julia_point_coverage": julia_cov,
                "attracting_point_coverage": fatou_cov, "refinements": scores}


def check_winding_sharpness(ctx: SuiteContext) -> tuple[bool, dict]:
    fmap = Winding(3, 2)
    x = ExtendedPoint.finite(1.0, 0.0)
    coverage = {it: expansion_test(fmap, x, 0.05, it, 32, rng_seed=ctx.seed)
                for it in (1, 2, 4, 8, 12, 24)}
    scores = []
    ok = all(v <= 0.5 for v in coverage.values())
    for it in (4, 12):
        s = complement_capacity_analysis(fmap, x, 0.05, it, 32, 257, rng_seed=ctx.seed)
        baseline = s.fixed_ball_baseline((0.0, 0.0), 0.5)
        good = s.value >= baseline
        ok &= good
        scores.append({"iterations": it, "score": s.value, "fixed_ball_baseline": baseline,
                       "ok": good})
    return ok, {"coverage": {str(k): v for k, v in coverage.items()}, "scores": scores,
                "degree": fmap.degree, "inner_dilatation": fmap.inner_dilatation,
                "expanding_hypothesis": "not met (deg = K_I), reported as expected behavior"}


def check_measure_suite(ctx: SuiteContext) -> tuple[bool, dict]:
    maps = [ctx.fmap] if ctx.custom else catalog_maps()
    rows = []
    ok = True
    for fmap in maps:
        y = ExtendedPoint.finite(*([0.3, 0.2] + [0.1] * (fmap.dim - 2)))
        prev = preimage_measure(fmap, y, 0)
        for k in range(1, 7):
            nu = preimage_measure(fmap, y, k)
            same = pushforward(nu, fmap, prev.points).weights == prev.weights
            good = nu.total_mass == 1 and same
            ok &= good
            rows.append({"map": fmap.to_dict(), "k": k, "atoms": len(nu), "ok": good})
            prev = nu
    nu6 = preimage_measure(PowerMap(2), ExtendedPoint.finite(1.0, 0.0), 6)
    ratio = mass_distribution_check(nu6, GaugeFunction.power(1.0), nu6.points, [0.2, 0.1, 0.05])
    ok &= ratio <= 2.0
    return ok, {"measures": rows, "circle_max_ratio": ratio}


def check_dimension_bounds(ctx: SuiteContext) -> tuple[bool, dict]:
    details = {}
    ok = True
    if ctx.custom:
        fmap = ctx.fmap
        cloud = sample_julia(fmap, default_start(fmap), 15, 5000, ctx.seed)
        audit = separated_preimage_audit(fmap, cloud)
        details["audit"] = audit.to_dict()
        details["box_dimension"] = box_dimension(cloud).value
        ok &= audit.bound > 0
        if fmap.inner_dilatation > 1:
            eps = (fmap.dim - 1) * (math.log(fmap.degree) / math.log(fmap.inner_dilatation) - 1)
        else:
            eps = 1.0
        details["epsilon"] = eps
        if eps > 0:
            ratios = [capacity_gauge_check(cloud, fmap.dim, eps,
                                           preimage_measure(fmap, default_start(fmap), k)).max_ratio
                      for k in (4, 5, 6) if fmap.degree ** k <= 10 ** 6]
            details["gauge_max_ratios"] = ratios
            ok &= bool(ratios) and max(ratios) <= 2.0
        else:
            ok = False
        return ok, details
    circle = sample_julia(PowerMap(2), ExtendedPoint.finite(2.0, 0.0), 20, 10 ** 4, ctx.seed)
    audit = separated_preimage_audit(PowerMap(2), circle)
    box = box_dimension(circle).value
    ok &= abs(audit.bound - 1.0) <= 0.05 and abs(audit.bound - box) <= 0.15
    details["circle"] = {"audit": audit.to_dict(), "box_dimension": box}
    sp = StretchPower(3, 2)
    cloud = sample_julia(sp, ExtendedPoint.finite(1.0, 0.0), 15, 10 ** 4, ctx.seed)
    audit_sp = separated_preimage_audit(sp, cloud)
    eps = math.log(3) / math.log(2) - 1
    ratios = [capacity_gauge_check(cloud, 2, eps,
                                   preimage_measure(sp, ExtendedPoint.finite(1.0, 0.0), k)).max_ratio
              for k in (6, 7, 8)]
    ok &= audit_sp.bound > 0 and max(ratios) <= 2.0
    details["stretch_power"] = {"audit": audit_sp.to_dict(), "epsilon": eps,
                                "gauge_max_ratios": ratios,
                                "box_dimension": box_dimension(cloud).value}
    return ok, details


def check_holder_distortion(ctx: SuiteContext) -> tuple[bool, dict]:
    maps = [ctx.fmap] if ctx.custom else catalog_maps()
    rows = []
    ok = True
    for fmap in maps:
        for bp in fmap.branch_points:
            mu = holder_exponent(fmap, bp.index)
            right = holder_stability(fmap, bp.point, mu, rng_seed=ctx.seed)
            wrong = holder_stability(fmap, bp.point, mu + 1, rng_seed=ctx.seed)
            good = right.stable and not wrong.stable
            ok &= good
            rows.append({"map": fmap.to_dict(), "point": "inf" if bp.point.is_infinity
                         else list(bp.point.coords), "mu": mu,
                         "slope": right.slope, "worst_B": right.worst_B,
                         "control_slope": wrong.slope, "ok": good})
    return ok, {"branch_points": rows}


def _generic_points(fmap: QRMap, count: int, rng) -> list[ExtendedPoint]:
    pts = []
    while len(pts) < count:
        x = rng.normal(size=fmap.dim)
        x *= rng.uniform(0.5, 1.1) / np.linalg.norm(x)
        if fmap.branch_distance(x[None, :])[0] > 0.1:
            pts.append(ExtendedPoint.finite(*x))
    return pts


def check_dilatation_composition(ctx: SuiteContext) -> tuple[bool, dict]:
    maps = [ctx.fmap] if ctx.custom else [StretchPower(3, 2), Winding(2, 2)]
    rng = np.random.default_rng(ctx.seed)
    rows = []
    ok = True
    for fmap in maps:
        worst = {}
        for k in (1, 2, 3):
            ratios = []
            for x in _generic_points(fmap, 20, rng):
                est, bound = iterate_dilatation_check(fmap, x, k)
                ratios.append(est / bound)
            worst[str(k)] = max(ratios)
        good = all(v <= 1.05 for v in worst.values())
        ok &= good
        rows.append({"map": fmap.to_dict(), "worst_estimate_over_bound": worst, "ok": good})
    return ok, {"cases": rows}


# -- suite ---------------------------------------------------------------------------

# (number, anchor, check, needs the expanding hypothesis on the map under test)
CHECKS = [
    (1, "ring-capacity-oracle", check_ring_capacity, False),
    (2, "capacity-monotonicity", check_capacity_monotonicity, False),
    (3, "degree-identity", check_degree_identity, False),
    (4, "julia-backward-orbit-oracle", check_julia_oracle, False),
    (5, "complete-invariance", check_complete_invariance, True),
    (6, "exceptional-set", check_exceptional_set, True),
    (7, "expansion-dichotomy", check_expansion_dichotomy, True),
    (8, "winding-sharpness-control", check_winding_sharpness, False),
    (9, "preimage-measure-suite", check_measure_suite, False),
    (10, "dimension-bounds", check_dimension_bounds, True),
    (11, "holder-distortion", check_holder_distortion, False),
    (12, "dilatation-composition", check_dilatation_composition, False),
]

ANCHORS = {number: anchor for number, anchor, _, _ in CHECKS}


def run_check(number: int, ctx: SuiteContext) -> CheckResult:
    _, anchor, fn, needs_expanding = CHECKS[number - 1]
    t0 = time.perf_counter()
    try:
        ok, details = fn(ctx)
        status = PASS if ok else FAIL
        if needs_expanding and ctx.custom and not expanding(ctx.fmap):
            status = UNMET
    except BudgetExceededError as exc:
        status, details = SKIPPED, {"reason": str(exc)}
    return CheckResult(number, anchor, status, details, time.perf_counter() - t0)


def run_suite(seed: int = 0, fmap: QRMap | None = None, threads: int = 1,
              only=None, log=None) -> list[CheckResult]:
    ctx = SuiteContext(seed, fmap, threads)
    results = []
    for number, anchor, _, _ in CHECKS:
        if only is not None and number not in only:
            continue
        res = run_check(number, ctx)
        if log is not None:
            log(f"[{res.status}] {number:2d} {anchor} ({res.seconds:.1f} s)")
        results.append(res)
    return results


def any_failed(results) -> bool:
    return any(r.status == FAIL for r in results)
