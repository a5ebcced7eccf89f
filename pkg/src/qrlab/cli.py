"""Command-line front end: ``qrlab <command> --map map.json --out dir [options]``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import (annulus_condenser, complement_capacity_analysis, ring_capacity_exact,
                       solve_capacity)
from .counting import EVERYTHING, Region, global_average, growth_contrast
from .dynamics import exceptional_candidates, invariance_residual, sample_julia
from .errors import ExceptionalSeedError, QRLabError
from .extended_space import ExtendedPoint
from .fractal import box_dimension, lipschitz_dim_bound, separated_preimage_audit
from .io import rasterize, write_csv, write_json, write_png_gray, write_points_csv
from .maps import Iterate, map_from_dict
from .verify import ANCHORS, any_failed, default_start, run_suite

COMMANDS = ("julia", "capacity", "counting", "dimension", "verify")
SCHEMA_VERSION = 1

# checks each command's output relates to, by verification-suite anchor
COMMAND_ANCHORS = {
    "julia": [ANCHORS[4], ANCHORS[5], ANCHORS[6]],
    "capacity": [ANCHORS[1], ANCHORS[7]],
    "counting": [ANCHORS[3]],
    "dimension": [ANCHORS[4], ANCHORS[10]],
}


class ConfigError(QRLabError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    out: str
    map: dict | None = None
    depth: int | None = None
    samples: int | None = None
    grid: int | None = None
    seed: int = 0
    threads: int = 1
    start: list[float] | None = None
    condenser: str = "annulus"
    inner: float = 1.0
    outer: float = 2.0
    dim: int | None = None
    radius: float = 0.05
    iterations: int = 12
    mode: str = "global"
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.depth is not None and self.depth < 1:
            raise ConfigError("--depth must be >= 1")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("--samples must be >= 1")
        if self.grid is not None:
            g = self.grid - 1
            if g < 8 or g & (g - 1):
                raise ConfigError("--grid must be a power of two plus one, at least 9")
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if self.command in ("julia", "counting", "dimension") and self.map is None:
            raise ConfigError(f"'{self.command}' needs --map")
        if self.command == "capacity":
            if self.condenser not in ("annulus", "complement"):
                raise ConfigError("--condenser must be 'annulus' or 'complement'")
            if self.condenser == "annulus" and not 0 < self.inner < self.outer:
                raise ConfigError("annulus needs 0 < --inner < --outer")
            if self.condenser == "complement" and self.map is None:
                raise ConfigError("the complement condenser needs --map")
        if self.mode not in ("global", "growth"):
            raise ConfigError("--mode must be 'global' or 'growth'")

    def provenance(self, fmap) -> dict:
        return {"tool": "qrlab", "version": __version__, "schema": SCHEMA_VERSION,
                "command": self.command, "map": fmap.to_dict() if fmap is not None else None,
                "seeds": {"rng_seed": self.seed},
                "config": {k: v for k, v in asdict(self).items() if k != "out"}}


def _start_point(cfg: ExperimentConfig, fmap) -> ExtendedPoint:
    if cfg.start is None:
        return default_start(fmap)
    if len(cfg.start) != fmap.dim:
        raise ConfigError(f"--start needs {fmap.dim} coordinates")
    return ExtendedPoint.finite(*cfg.start)


def cmd_julia(cfg: ExperimentConfig, fmap, out: Path) -> int:
    depth = cfg.depth or 20
    count = cfg.samples or 10000
    start = _start_point(cfg, fmap)
    try:
        cloud = sample_julia(fmap, start, depth, count, cfg.seed)
    except ExceptionalSeedError as exc:
        print(f"error: {exc}; a seed in the exceptional set has a finite backward orbit "
              "and cannot fill the Julia set", file=sys.stderr)
        return 2
    haus, spacing = invariance_residual(fmap, cloud)
    write_points_csv(out / "points.csv", cloud.array)
    summary = cfg.provenance(fmap)
    summary.update({"checks": COMMAND_ANCHORS["julia"], "depth": depth, "count": len(cloud),
                    "start": [float(c) for c in start.coords], "method": cloud.method,
                    "invariance_residual": haus, "spacing": spacing,
                    "residual_over_spacing": haus / spacing if spacing else None,
                    "exceptional_candidates": [None if p.is_infinity else list(p.coords)
                                               for p in exceptional_candidates(fmap)]})
    if fmap.dim == 2:
        img, window = rasterize(cloud.array, size=512)
        write_png_gray(out / "julia.png", img)
        summary["image"] = {"file": "julia.png", "window": list(window), "size": 512}
    write_json(out / "summary.json", summary)
    return 0


def cmd_capacity(cfg: ExperimentConfig, fmap, out: Path) -> int:
    grid = cfg.grid or 257
    result = cfg.provenance(fmap)
    result["checks"] = COMMAND_ANCHORS["capacity"]
    if cfg.condenser == "annulus":
        n = cfg.dim or (fmap.dim if fmap is not None else 2)
        cond = annulus_condenser(n, cfg.inner, cfg.outer, grid)
        res = solve_capacity(cond)
        result.update({"condenser": "annulus", "dim": n, "inner": cfg.inner, "outer": cfg.outer,
                       "grid": grid, "value": res.value, "converged": res.converged,
                       "iterations": res.iterations, "energy_history": res.energy_history,
                       "grid_spacing": res.grid_spacing,
                       "exact": ring_capacity_exact(n, cfg.inner, cfg.outer)})
        if n == 2:
            write_csv(out / "potential.csv", [f"j{j}" for j in range(grid)],
                      np.round(res.potential, 12).tolist())
    else:
        start = _start_point(cfg, fmap)
        sphere_res = max(8, (grid - 1) // 8)
        s = complement_capacity_analysis(fmap, start, cfg.radius, cfg.iterations, sphere_res,
                                         grid, rng_seed=cfg.seed)
        result.update({"condenser": "complement", "start": list(start.coords),
                       "radius": cfg.radius, "iterations": cfg.iterations,
                       "sphere_grid": sphere_res, "chart_grid": grid, "value": s.value,
                       "single_cell_baseline": s.single_cell_baseline,
                       "covered_fraction": s.covered_fraction,
                       "uncovered_cells": s.uncovered_cells})
    write_json(out / "capacity.json", result)
    return 0


def cmd_counting(cfg: ExperimentConfig, fmap, out: Path) -> int:
    depth = cfg.depth or 3
    samples = cfg.samples or 10000
    result = cfg.provenance(fmap)
    result["checks"] = COMMAND_ANCHORS["counting"]
    if cfg.mode == "global":
        rows = []
        for k in range(1, depth + 1):
            res = global_average(Iterate(fmap, k), EVERYTHING, max(samples, 100), cfg.seed,
                                 threads=cfg.threads)
            rows.append((k, res.estimate, res.std_error))
        result.update({"mode": "global", "region": EVERYTHING.to_dict(), "samples": samples,
                       "rows": rows, "degree": fmap.degree})
        write_csv(out / "counting.csv", ["k", "estimate", "std_error"], rows)
    else:
        start = _start_point(cfg, fmap)
        cloud = sample_julia(fmap, start, 15, 1, cfg.seed)
        fatou = [p for p in exceptional_candidates(fmap) if not p.is_infinity]
        if not fatou:
            raise ConfigError("growth mode needs a finite attracting exceptional point")
        table = growth_contrast(fmap, cloud.points[0], fatou[0], depth,
                                samples=max(samples, 100), rng_seed=cfg.seed, threads=cfg.threads)
        result.update({"mode": "growth", "julia_point": list(cloud.points[0].coords),
                       "fatou_point": list(fatou[0].coords), **table.to_dict()})
        write_csv(out / "counting.csv", list(table.header), table.rows)
    write_json(out / "counting.json", result)
    return 0


def cmd_dimension(cfg: ExperimentConfig, fmap, out: Path) -> int:
    depth = cfg.depth or 20
    count = cfg.samples or 10000
    try:
        cloud = sample_julia(fmap, _start_point(cfg, fmap), depth, count, cfg.seed)
    except ExceptionalSeedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    est = box_dimension(cloud)
    audit = separated_preimage_audit(fmap, cloud)
    result = cfg.provenance(fmap)
    result.update({"checks": COMMAND_ANCHORS["dimension"], "depth": depth, "count": count,
                   "box_dimension": est.to_dict(), "audit": audit.to_dict(),
                   "lipschitz_bound": lipschitz_dim_bound(audit.m, audit.L)
                   if audit.hypothesis_met and audit.L > 1 else None})
    write_csv(out / "scales.csv", ["box_size", "occupied"], est.scales_used)
    write_json(out / "dimension.json", result)
    return 0


def cmd_verify(cfg: ExperimentConfig, fmap, out: Path) -> int:
    t0 = time.perf_counter()
    results = run_suite(cfg.seed, fmap, cfg.threads,
                        log=lambda msg: print(msg, file=sys.stderr))
    report = cfg.provenance(fmap)
    report.update({"checks": [r.to_dict() for r in results],
                   "anchors": [r.anchor for r in results],
                   "summary": {s: sum(r.status == s for r in results)
                               for s in ("pass", "fail", "skipped", "hypothesis-not-met")}})
    write_json(out / "report.json", report)
    print(f"verify finished in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 1 if any_failed(results) else 0


HANDLERS = {"julia": cmd_julia, "capacity": cmd_capacity, "counting": cmd_counting,
            "dimension": cmd_dimension, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--map", help="map descriptor: a JSON file or an inline JSON object")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--depth", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--grid", type=int, help="grid nodes per axis (power of two plus one)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--start", help="comma-separated start point, e.g. 1,0")
    p.add_argument("--condenser", default="annulus", help="capacity: annulus | complement")
    p.add_argument("--inner", type=float, default=1.0)
    p.add_argument("--outer", type=float, default=2.0)
    p.add_argument("--dim", type=int)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--iterations", type=int, default=12)
    p.add_argument("--mode", default="global", help="counting: global | growth")
    return p


def _load_map(arg: str | None) -> dict | None:
    if arg is None:
        return None
    text = arg if arg.lstrip().startswith("{") else Path(arg).read_text(encoding="utf-8")
    return json.loads(text)


def config_from_args(args) -> ExperimentConfig:
    try:
        start = [float(v) for v in args.start.split(",")] if args.start else None
        spec = _load_map(args.map)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(command=args.command, out=args.out, map=spec, depth=args.depth,
                            samples=args.samples, grid=args.grid, seed=args.seed,
                            threads=args.threads, start=start, condenser=args.condenser,
                            inner=args.inner, outer=args.outer, dim=args.dim,
                            radius=args.radius, iterations=args.iterations, mode=args.mode)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate()
        fmap = map_from_dict(cfg.map) if cfg.map is not None else None
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[cfg.command](cfg, fmap, out)
    except QRLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
