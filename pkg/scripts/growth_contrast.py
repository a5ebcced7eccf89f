"""Growth of averaged counting functions of f^k near a Julia point versus a Fatou point."""

import argparse
import sys
from dataclasses import dataclass

from qrlab.counting import growth_contrast
from qrlab.dynamics import sample_julia
from qrlab.extended_space import ExtendedPoint
from qrlab.maps import PowerMap, StretchPower, Winding


@dataclass
class Config:
    k_max: int = 6
    delta: float = 0.1
    samples: int = 20000
    seed: int = 0
    threads: int = 4


def run(cfg: Config):
    cases = [(PowerMap(2), ExtendedPoint.finite(1.0, 0.0)),
             (StretchPower(3, 2), None),
             (Winding(3, 2), ExtendedPoint.finite(1.0, 0.0))]
    out = []
    for fmap, x in cases:
        if x is None:
            x = sample_julia(fmap, ExtendedPoint.finite(1.0, 0.0), 15, 1, cfg.seed).points[0]
        table = growth_contrast(fmap, x, ExtendedPoint.finite(0.0, 0.0), cfg.k_max, cfg.delta,
                                cfg.samples, cfg.seed, threads=cfg.threads)
        out.append((fmap, x, table))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-max", type=int, default=6)
    ap.add_argument("--samples", type=int, default=20000)
    args = ap.parse_args(argv)
    for fmap, x, table in run(Config(k_max=args.k_max, samples=args.samples)):
        print(f"{fmap.name}: deg {fmap.degree}, K_I {fmap.inner_dilatation:g}, base point "
              f"{tuple(round(c, 4) for c in x.coords)}")
        print("   k   near Julia point    near origin")
        for k, ej, sj, ef, sf in table.rows:
            print(f"  {k:2d}   {ej:9.4f} +- {sj:.4f}   {ef:9.4f} +- {sf:.4f}")
        print(f"  fitted rates: {table.julia_rate:.3f} / {table.fatou_rate:.3f}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
