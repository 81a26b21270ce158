"""Photon-scale calibration for the Poisson noise levels.

Run ``python -m elfpie.calibrate`` to re-derive the scales stored in
``elfpie.bench.POISSON_LEVELS``. Each scale is found by bisection in
``log(s)``; the dark-field corruption metric decreases monotonically with
the photon scale.
"""

from __future__ import annotations

import argparse
import math
from typing import Optional, Sequence

import numpy as np

from .bench import POISSON_LEVELS, desk_truth
from .degrade import noise_level_metric, simulate
from .model import DegradationSpec, SystemGeometry, desk_geometry
from .optics import sequential_plan

# target dark-field corruption (percent) at c = 0.25
POISSON_TARGETS = {1: 36.37, 2: 66.13, 3: 81.07, 4: 94.23}
CALIBRATION_C = 0.25


def poisson_nl(photon_scale: float, seeds: Sequence[int] = (0, 1, 2), c: float = CALIBRATION_C,
               geometry: Optional[SystemGeometry] = None) -> float:
    """Mean corruption metric of the desk protocol under Poisson noise."""
    geometry = geometry or desk_geometry()
    plan = sequential_plan(geometry)
    vals = []
    for s in seeds:
        spec = DegradationSpec(noise_kind="poisson", photon_scale=photon_scale, uneven_strength=c, seed=s)
        stack, clean = simulate(desk_truth(s, geometry), geometry, plan, spec, return_clean=True)
        vals.append(noise_level_metric(clean, stack.images, plan))
    return float(np.mean(vals))


def calibrate_photon_scale(target: float, lo: float = 1.0, hi: float = 1e8, steps: int = 30, **kw) -> float:
    """Photon scale whose corruption metric equals ``target`` percent."""
    a, b = math.log(lo), math.log(hi)
    for _ in range(steps):
        mid = 0.5 * (a + b)
        if poisson_nl(math.exp(mid), **kw) > target:
            a = mid  # too noisy: more photons
        else:
            b = mid
    return math.exp(0.5 * (a + b))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="calibrate Poisson photon scales against target corruption levels")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--steps", type=int, default=20)
    args = ap.parse_args(argv)
    seeds = tuple(range(args.seeds))
    print("level,target_nl,photon_scale,shipped_scale,shipped_nl")
    for lv, target in POISSON_TARGETS.items():
        s = calibrate_photon_scale(target, steps=args.steps, seeds=seeds)
        print(f"{lv},{target},{s:.4g},{POISSON_LEVELS[lv]:g},{poisson_nl(POISSON_LEVELS[lv], seeds):.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
