"""Backward-orbit Julia clouds of the planar catalog maps, written as PNG plus summary."""

import argparse
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from qrlab.dynamics import invariance_residual, sample_julia
from qrlab.extended_space import ExtendedPoint
from qrlab.fractal import box_dimension
from qrlab.io import rasterize, write_json, write_png_gray
from qrlab.maps import PowerMap, Quadratic, StretchPower


@dataclass
class Config:
    out: str = "gallery"
    depth: int = 20
    count: int = 20000
    seed: int = 0
    size: int = 512


MAPS = [(PowerMap(2), (2.0, 0.0)), (Quadratic(-1), (2.0, 0.0)), (Quadratic(0.25 + 0.5j), (2.0, 0.0)),
        (StretchPower(3, 2), (1.0, 0.0)), (StretchPower(4, 3), (1.0, 0.0))]


def run(cfg: Config):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for fmap, start in MAPS:
        cloud = sample_julia(fmap, ExtendedPoint.finite(*start), cfg.depth, cfg.count, cfg.seed)
        haus, spacing = invariance_residual(fmap, cloud)
        img, window = rasterize(cloud.array, cfg.size)
        name = re.sub(r"[^A-Za-z0-9.-]+", "_", fmap.name).strip("_")
        write_png_gray(out / f"{name}.png", img)
        summary.append({"map": fmap.to_dict(), "image": f"{name}.png", "window": window,
                        "box_dimension": box_dimension(cloud).value,
                        "residual_over_spacing": haus / spacing})
    write_json(out / "gallery.json", {"config": cfg.__dict__, "clouds": summary})
    return summary


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="gallery")
    ap.add_argument("--count", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    for row in run(Config(out=args.out, count=args.count, seed=args.seed)):
        print(f"{row['image']:28s} box_dim {row['box_dimension']:.3f}  "
              f"residual/spacing {row['residual_over_spacing']:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
