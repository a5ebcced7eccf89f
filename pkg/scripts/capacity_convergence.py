"""Grid refinement study of the ring condenser against the closed-form capacity."""

import argparse
import sys
import time
from dataclasses import dataclass

from qrlab.capacity import annulus_condenser, ring_capacity_exact, solve_capacity


@dataclass
class Config:
    dim: int = 2
    inner: float = 1.0
    outer: float = 2.0
    grids: tuple[int, ...] = (33, 65, 129, 257, 513)


def run(cfg: Config):
    exact = ring_capacity_exact(cfg.dim, cfg.inner, cfg.outer)
    rows, prev_change, prev = [], None, None
    for g in cfg.grids:
        t0 = time.perf_counter()
        res = solve_capacity(annulus_condenser(cfg.dim, cfg.inner, cfg.outer, g))
        change = None if prev is None else abs(res.value - prev)
        halving = None if change is None or prev_change is None else change <= prev_change / 2
        rows.append((g, res.value, (res.value - exact) / exact, res.iterations,
                     time.perf_counter() - t0, halving))
        prev, prev_change = res.value, change
    return exact, rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--grids", default=None, help="comma-separated grid sizes (2^k + 1)")
    args = ap.parse_args(argv)
    cfg = Config(dim=args.dim)
    if args.grids:
        cfg.grids = tuple(int(g) for g in args.grids.split(","))
    elif args.dim == 3:
        cfg.grids = (17, 33, 65, 129)
    exact, rows = run(cfg)
    print(f"exact capacity {exact:.6f}")
    print("grid     value        rel_err    iters  seconds  change_halved")
    for g, v, e, it, sec, h in rows:
        print(f"{g:5d}  {v:11.6f}  {e:+9.4%}  {it:5d}  {sec:7.2f}  {'' if h is None else h}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
