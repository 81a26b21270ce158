"""Desk-scale benchmark protocol and the LSNR grid runner.

A grid cell is one ``(d, c, noise, level)`` degradation setting. Every
repeat simulates a fresh phantom and stack from a seed derived from
``(base seed, cell index, repeat)``, and all methods consume that same
stack, so comparisons within a cell are paired.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .baseline import fpie_momentum_reconstruct
from .degrade import matched_vignetting, simulate
from .metrics import score_reconstruction
from .model import (AcquisitionStack, DegradationSpec, ReconstructionConfig, SystemGeometry, VignettingSpec,
                    desk_geometry)
from .optics import sequential_plan
from .phantom import phantom
from .solver import reconstruct

log = logging.getLogger(__name__)

# reference panel distance for LED-shift magnitudes (meters)
REFERENCE_DISTANCE = 90e-3
DESK_BAND_RADIUS = 36.0

# photon scales for the Poisson levels, from ``python -m elfpie.calibrate``
POISSON_LEVELS = {1: 8.1e3, 2: 1.5e3, 3: 7.7e2, 4: 4.6e2}

CSV_HEADER = ["d_mm", "c", "noise", "level", "method", "lsnr_amp", "lsnr_phase", "lsnr_mean"]
METHODS = ("elfpie-amplitude", "elfpie-intensity", "mfpie")
_NOISE_ORDER = {"none": 0, "gaussian": 1, "poisson": 2, "snp": 3}


def scaled_shift(d: float, geometry: SystemGeometry) -> float:
    """LED displacement giving the same angular error at ``geometry.panel_distance`` as ``d`` at 90 mm."""
    return d * geometry.panel_distance / REFERENCE_DISTANCE


def desk_truth(seed: int, geometry: Optional[SystemGeometry] = None) -> np.ndarray:
    """Complex phantom field for the desk protocol."""
    geometry = geometry or desk_geometry()
    amp, ph = phantom(geometry.hr_size, DESK_BAND_RADIUS, seed=seed)
    return amp * np.exp(1j * ph)


def noise_spec(kind: str, level: float) -> dict:
    """DegradationSpec keyword arguments for a table noise column.

    Poisson levels are the integers 1-4 (see ``POISSON_LEVELS``); other
    kinds take ``level`` as the std / density directly.
    """
    if kind == "none":
        return {"noise_kind": "none"}
    if kind == "poisson":
        lv = int(level)
        if lv not in POISSON_LEVELS:
            raise ValueError(f"unknown Poisson level {level!r}; expected one of {sorted(POISSON_LEVELS)}")
        return {"noise_kind": "poisson", "photon_scale": POISSON_LEVELS[lv]}
    if kind in ("gaussian", "snp"):
        return {"noise_kind": kind, "noise_level": float(level)}
    raise ValueError(f"unknown noise kind {kind!r}")


def desk_stack(seed: int, d: float = 0.0, c: float = 0.0, noise: str = "none", level: float = 0.0,
               vignetting: Optional[VignettingSpec] = None, geometry: Optional[SystemGeometry] = None,
               threads: int = 1) -> AcquisitionStack:
    """Simulated desk-protocol stack; ``d`` is in meters at the 90 mm reference distance."""
    geometry = geometry or desk_geometry()
    spec = DegradationSpec(uneven_strength=c, led_shift_radius=scaled_shift(d, geometry), seed=seed,
                           vignetting=vignetting or VignettingSpec(), **noise_spec(noise, level))
    return simulate(desk_truth(seed, geometry), geometry, sequential_plan(geometry), spec, threads)


@dataclass(frozen=True)
class ProtocolCell:
    d: float = 0.0  # meters
    c: float = 0.0
    noise: str = "none"
    level: float = 0.0
    vignetting: bool = False


@dataclass
class BenchmarkCell:
    d: float
    c: float
    noise: str
    level: float
    method: str
    repeats: int
    mean_lsnr_amp: float = math.nan
    mean_lsnr_phase: float = math.nan
    error: Optional[str] = None

    @property
    def mean_lsnr(self) -> float:
        return 0.5 * (self.mean_lsnr_amp + self.mean_lsnr_phase)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def row(self) -> list:
        return [f"{self.d * 1e3:g}", f"{self.c:g}", self.noise, f"{self.level:g}", self.method,
                f"{self.mean_lsnr_amp:.4f}", f"{self.mean_lsnr_phase:.4f}", f"{self.mean_lsnr:.4f}"]


def run_method(method: str, stack: AcquisitionStack, iterations: int = 100, threads: int = 1,
               deterministic: bool = True):
    if method == "mfpie":
        return fpie_momentum_reconstruct(stack, iterations=iterations)
    if method.startswith("elfpie-"):
        cfg = ReconstructionConfig(fidelity_mode=method.split("-", 1)[1], iterations=iterations,
                                   threads=threads, deterministic_reduction=deterministic)
        return reconstruct(stack, config=cfg)
    raise ValueError(f"unknown method {method!r}")


def cell_seed(seed: int, cell: int, repeat: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(cell), int(repeat)]).generate_state(1)[0])


def benchmark_grid(protocol: Sequence[ProtocolCell], methods: Sequence[str] = METHODS, repeats: int = 1,
                   iterations: int = 100, seed: int = 0, geometry: Optional[SystemGeometry] = None,
                   threads: int = 1, deterministic: bool = True,
                   progress: Optional[Callable[[str], None]] = None) -> list[BenchmarkCell]:
    """Average LSNR for every (cell, method); failures are recorded, not raised."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    geometry = geometry or desk_geometry()
    out = []
    for ci, cell in enumerate(protocol):
        scores = {m: [] for m in methods}
        errors: dict[str, str] = {}
        for r in range(repeats):
            s = cell_seed(seed, ci, r)
            try:
                vig = matched_vignetting(geometry) if cell.vignetting else None
                stack = desk_stack(s, cell.d, cell.c, cell.noise, cell.level, vig, geometry, threads)
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                for m in methods:
                    errors.setdefault(m, f"simulate: {exc}")
                continue
            for m in methods:
                if m in errors:
                    continue
                try:
                    rec = run_method(m, stack, iterations, threads, deterministic)
                    scores[m].append(score_reconstruction(rec.field, stack.truth_amplitude, stack.truth_phase))
                except Exception as exc:  # noqa: BLE001
                    errors[m] = f"{type(exc).__name__}: {exc}"
            if progress:
                progress(f"cell {ci} repeat {r} done")
        for m in methods:
            bc = BenchmarkCell(cell.d, cell.c, cell.noise, cell.level, m, repeats)
            if m in errors:
                bc.error = errors[m]
                log.warning("cell %d method %s failed: %s", ci, m, bc.error)
            else:
                arr = np.array(scores[m])
                bc.mean_lsnr_amp = float(arr[:, 0].mean())
                bc.mean_lsnr_phase = float(arr[:, 1].mean())
            out.append(bc)
    order = {m: i for i, m in enumerate(methods)}
    out.sort(key=lambda b: (_NOISE_ORDER.get(b.noise, 9), b.level, b.c, b.d, order[b.method]))
    return out


def write_csv(cells: Sequence[BenchmarkCell], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for c in cells:
            w.writerow(c.row())


def load_protocol(path) -> dict:
    """Read a JSON protocol file.

    Keys: ``cells`` (list of objects with ``d_mm``, ``c``, ``noise``,
    ``level``, optional ``vignetting``), and optional ``methods``,
    ``repeats``, ``iterations``, ``seed``.
    """
    with open(path) as fh:
        raw = json.load(fh)
    cells = []
    for c in raw.get("cells", []):
        cells.append(ProtocolCell(float(c.get("d_mm", 0.0)) * 1e-3, float(c.get("c", 0.0)),
                                  str(c.get("noise", "none")), float(c.get("level", 0.0)),
                                  bool(c.get("vignetting", False))))
    if not cells:
        raise ValueError("protocol has no cells")
    methods = tuple(raw.get("methods", METHODS))
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    return {"cells": cells, "methods": methods, "repeats": int(raw.get("repeats", 1)),
            "iterations": int(raw.get("iterations", 100)), "seed": int(raw.get("seed", 0))}
