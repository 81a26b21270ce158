"""LED geometry, pupil construction and the ideal multiplexed forward model."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from .model import (IlluminationPlan, LedEntry, PupilFunction, SystemGeometry,
                    ValidationError, window_in_bounds)
from .operators import dft2


def led_spectral_offsets(geometry: SystemGeometry, led_positions: Optional[np.ndarray] = None,
                         indices: Optional[Sequence[int]] = None) -> list[LedEntry]:
    """Map lateral LED positions ``(x, y)`` (meters) to spectral window offsets.

    Offsets are rounded to whole LR spectral pixels. Raises
    :class:`ValidationError` if any window would leave the HR grid.
    """
    if geometry.panel_distance <= 0:
        raise ValidationError(["panel_distance must be positive"])
    if led_positions is None:
        led_positions = geometry.led_positions()
    pos = np.asarray(led_positions, dtype=np.float64).reshape(-1, 2)
    if indices is None:
        indices = range(len(pos))
    dv, du = geometry.freq_step
    h = geometry.panel_distance
    entries = []
    for idx, (x, y) in zip(indices, pos):
        r = np.sqrt(x * x + y * y + h * h)
        sx, sy = -x / r, -y / r
        off = (int(np.round(sy / geometry.wavelength / dv)),
               int(np.round(sx / geometry.wavelength / du)))
        if not window_in_bounds(off, geometry.lr_size, geometry.hr_size):
            raise ValidationError([f"LED {idx}: LED exceeds synthetic aperture (offset {off})"])
        na = float(np.hypot(sx, sy))
        entries.append(LedEntry(idx, off, na, na > geometry.objective_na, (sy, sx)))
    return entries


def spiral_order(entries: Sequence[LedEntry]) -> list[LedEntry]:
    """Order LEDs from the optical axis outward (by NA, then azimuth)."""
    return sorted(entries, key=lambda e: (round(e.illumination_na, 12),
                                          np.arctan2(e.direction[0], e.direction[1]), e.led_index))


def sequential_plan(geometry: SystemGeometry, led_positions: Optional[np.ndarray] = None) -> IlluminationPlan:
    """One exposure per LED, ordered from the center outward."""
    return IlluminationPlan.sequential(spiral_order(led_spectral_offsets(geometry, led_positions)))


def multiplexed_plan(geometry: SystemGeometry, group_size: int, seed: int = 0,
                     led_positions: Optional[np.ndarray] = None) -> IlluminationPlan:
    """Random partition of the LEDs into groups of ``group_size`` lit together."""
    entries = led_spectral_offsets(geometry, led_positions)
    if len(entries) % group_size:
        raise ValidationError([f"group size {group_size} does not divide {len(entries)} LEDs"])
    perm = np.random.default_rng(seed).permutation(len(entries))
    shuffled = [entries[i] for i in perm]
    return IlluminationPlan(tuple(tuple(shuffled[i:i + group_size])
                                  for i in range(0, len(shuffled), group_size)))


def replan(plan: IlluminationPlan, geometry: SystemGeometry, led_positions: np.ndarray) -> IlluminationPlan:
    """Recompute offsets for ``plan``'s LEDs at new lateral positions, keeping the grouping."""
    pos = np.asarray(led_positions).reshape(-1, 2)
    groups = []
    for g in plan.groups:
        idx = [e.led_index for e in g]
        groups.append(tuple(led_spectral_offsets(geometry, pos[idx], idx)))
    return IlluminationPlan(tuple(groups))


def pupil_support(geometry: SystemGeometry) -> tuple[np.ndarray, float]:
    bh, bw = geometry.lr_size
    dv, du = geometry.freq_step
    cutoff = geometry.objective_na / geometry.wavelength
    ry, rx = cutoff / dv, cutoff / du
    if ry >= bh / 2 or rx >= bw / 2:
        raise ValidationError([f"pupil exceeds camera band (cutoff {rx:.2f} px on a {bw} px grid)"])
    ky = np.arange(bh) - bh // 2
    kx = np.arange(bw) - bw // 2
    if rx == 0 or ry == 0:
        support = (ky[:, None] == 0) & (kx[None, :] == 0)
    else:
        support = (ky[:, None] / ry) ** 2 + (kx[None, :] / rx) ** 2 <= 1.0
    return support, float(rx)


def pupil_init(geometry: SystemGeometry, bound: float = 2.0) -> PupilFunction:
    """Binary pupil: one inside the NA/wavelength cutoff disc, zero outside."""
    support, radius = pupil_support(geometry)
    return PupilFunction(support.astype(np.complex128), radius, support, bound)


def _window(offset, lr_size, hr_size):
    (oy, ox), (bh, bw), (ah, aw) = offset, lr_size, hr_size
    r0 = ah // 2 + oy - bh // 2
    c0 = aw // 2 + ox - bw // 2
    if r0 < 0 or c0 < 0 or r0 + bh > ah or c0 + bw > aw:
        raise ValidationError([f"spectral window at offset {tuple(offset)} leaves the {ah}x{aw} grid"])
    return slice(r0, r0 + bh), slice(c0, c0 + bw)


def extract_patch(spectrum: np.ndarray, offset, lr_size) -> np.ndarray:
    """Copy of the LR window centered at ``spectrum center + offset``."""
    return spectrum[_window(offset, lr_size, spectrum.shape)].copy()


def embed_add_patch(target: np.ndarray, patch: np.ndarray, offset) -> np.ndarray:
    """Add ``patch`` into a copy of ``target`` at ``offset`` (adjoint of extraction)."""
    out = np.array(target, dtype=np.result_type(target, patch), copy=True)
    out[_window(offset, patch.shape, out.shape)] += patch
    return out


def embed_add_inplace(target: np.ndarray, patch: np.ndarray, offset) -> None:
    target[_window(offset, patch.shape, target.shape)] += patch


def exit_fields(spectrum: np.ndarray, pupil: np.ndarray, group: Sequence[LedEntry]) -> list[np.ndarray]:
    """Camera-plane fields ``dft2(P * window)`` for every LED of one exposure."""
    return [dft2(pupil * extract_patch(spectrum, e.spectral_offset, pupil.shape)) for e in group]


def forward_ideal(spectrum: np.ndarray, pupil, plan: IlluminationPlan, threads: int = 1) -> np.ndarray:
    """Noise-free intensities, one frame per exposure group, shape ``(N, bh, bw)``."""
    p = pupil.field if isinstance(pupil, PupilFunction) else np.asarray(pupil)

    def one(group):
        out = np.zeros(p.shape)
        for o in exit_fields(spectrum, p, group):
            out += o.real ** 2 + o.imag ** 2
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            frames = list(pool.map(one, plan.groups))
    else:
        frames = [one(g) for g in plan.groups]
    return np.stack(frames)
