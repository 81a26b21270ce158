"""Degraded acquisition simulator and the dark-field corruption metric.

Random draws come from Philox substreams keyed by ``(seed, purpose, index)``
so results do not depend on how frames are scheduled across threads.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .model import (AcquisitionStack, DegradationSpec, IlluminationPlan, SystemGeometry, ValidationError,
                    VignettingSpec, validate)
from .operators import convolve, dft2, gaussian_kernel
from .optics import forward_ideal, pupil_init, replan

# substream purposes
_LAMBDA, _NOISE, _LEDS = 1, 2, 3


def rng_stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for one (purpose, index) substream of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), purpose, int(index)])))


def blur_kernel(shape, half_waist: float) -> np.ndarray:
    size = int(2 * np.ceil(3 * half_waist) + 1)
    limit = min(shape)
    if size > limit:
        size = limit if limit % 2 else limit - 1
    return gaussian_kernel(size, half_waist)


def make_uneven_illumination(shape, c: float, rng: np.random.Generator, half_waist: float = 15.0,
                             a: float = 0.001) -> np.ndarray:
    """Smooth multiplicative illumination map with values in ``[1 - c, 1]``.

    A blurred Gaussian field is rescaled to ``[0, 1]`` and mixed with a
    constant so that ``c`` sets the contrast directly.
    """
    if not 0 <= c <= 1:
        raise ValueError("c must lie in [0, 1]")
    zeta = a * rng.standard_normal(shape)
    if c == 0:
        return np.ones(shape)
    blurred = convolve(zeta, blur_kernel(shape, half_waist), "periodic")
    span = blurred.max() - blurred.min()
    unit = (blurred - blurred.min()) / span if span > 0 else np.full(shape, 0.5)
    return (1 - c) + c * unit


def add_gaussian_noise(img: np.ndarray, a: float, rng: np.random.Generator) -> np.ndarray:
    if a < 0:
        raise ValueError("noise std must be >= 0")
    if a == 0:
        return np.array(img, dtype=np.float64)
    return img + a * rng.standard_normal(np.shape(img))


def add_snp_noise(img: np.ndarray, density: float, rng: np.random.Generator,
                  salt: Optional[float] = None) -> np.ndarray:
    """Replace a ``density`` fraction of pixels: half with 0, half with ``salt``.

    ``salt`` defaults to ``max(img.max(), 1.0)``.
    """
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    out = np.array(img, dtype=np.float64)
    if density == 0:
        return out
    if salt is None:
        salt = max(float(np.max(img)), 1.0)
    u = rng.random(out.shape)
    out[u < density / 2] = 0.0
    out[(u >= density / 2) & (u < density)] = salt
    return out


def add_poisson_noise(img: np.ndarray, photon_scale: float, rng: np.random.Generator) -> np.ndarray:
    if photon_scale <= 0:
        raise ValueError("photon scale must be > 0")
    img = np.asarray(img, dtype=np.float64)
    if np.any(img < 0):
        raise ValueError("negative intensity cannot be photon-counted")
    return rng.poisson(photon_scale * img) / photon_scale


def perturb_led_positions(geometry: SystemGeometry, d: float, rng: np.random.Generator,
                          positions: Optional[np.ndarray] = None) -> np.ndarray:
    """Displace each LED independently, uniformly within a disc of radius ``d`` (meters)."""
    if d < 0:
        raise ValueError("shift radius must be >= 0")
    pos = geometry.led_positions() if positions is None else np.array(positions, dtype=np.float64)
    if d == 0:
        return pos
    r = d * np.sqrt(rng.random(len(pos)))
    th = 2 * np.pi * rng.random(len(pos))
    return pos + np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


def matched_vignetting(geometry: SystemGeometry, radius: Optional[float] = None,
                       softness: float = 4.0) -> VignettingSpec:
    """Window whose edge crosses the frame center exactly at the objective cutoff angle."""
    if radius is None:
        radius = float(max(geometry.lr_size))
    na = geometry.objective_na
    return VignettingSpec(True, radius, softness, radius / (na / np.sqrt(1 - na * na)))


def _soft_disc(shape, center, radius, softness):
    h, w = shape
    yy = np.arange(h)[:, None] - center[0]
    xx = np.arange(w)[None, :] - center[1]
    dist = np.hypot(yy, xx)
    if softness <= 0:
        return (dist <= radius).astype(np.float64)
    t = np.clip((radius + softness / 2 - dist) / softness, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * t)


def vignetting_window(shape, entry, spec: VignettingSpec):
    """``(window, displacement)`` for one LED; displacement is ``(dy, dx)`` in pixels."""
    na = entry.illumination_na
    tan = na / np.sqrt(max(1 - na * na, 1e-12))
    if na > 0:
        unit = np.array(entry.direction) / na
    else:
        unit = np.zeros(2)
    disp = spec.shift_gain * tan * unit
    center = (shape[0] // 2 + disp[0], shape[1] // 2 + disp[1])
    return _soft_disc(shape, center, spec.radius, spec.softness), disp


def apply_vignetting(images: np.ndarray, plan: IlluminationPlan, spec: VignettingSpec,
                     leak: Optional[float] = None) -> np.ndarray:
    """Space-variant bright/dark partition of frames near the cutoff angle.

    Each LED gets a soft disc displaced along its illumination azimuth by
    ``shift_gain * tan(theta)``. Frames whose center lies inside their disc
    are multiplied by it (partially dark). Dark-field frames whose center is
    outside receive unscattered light ``leak`` inside the disc (partially
    bright). ``leak`` defaults to the mean of the most on-axis frame.
    """
    images = np.array(images, dtype=np.float64)
    if not spec.enabled:
        return images
    shape = images.shape[1:]
    if leak is None:
        n0 = min(range(plan.n_images), key=lambda n: min(e.illumination_na for e in plan.groups[n]))
        leak = float(images[n0].mean())
    out = np.empty_like(images)
    for n, group in enumerate(plan.groups):
        frame = np.zeros(shape)
        share = images[n] / len(group)
        for e in group:
            w, disp = vignetting_window(shape, e, spec)
            if e.is_dark_field and np.hypot(*disp) > spec.radius:
                frame += share + leak * w
            else:
                frame += share * w
        out[n] = frame
    return out


def simulate(truth_field: np.ndarray, geometry: SystemGeometry, plan: IlluminationPlan,
             degradation: DegradationSpec, threads: int = 1, pupil=None, return_clean: bool = False):
    """Degraded acquisition of ``truth_field`` (complex, HR grid).

    Pipeline: forward model at (possibly perturbed) LED positions, per-frame
    uneven illumination, vignetting, additive background, then one noise
    branch. The returned stack carries the nominal ``plan`` only.
    With ``return_clean`` also returns the ideal frames at the true LED
    positions, for :func:`noise_level_metric`.
    """
    problems = degradation.check()
    if problems:
        raise ValidationError(problems)
    validate(geometry, plan)
    truth_field = np.asarray(truth_field, dtype=np.complex128)
    if truth_field.shape != tuple(geometry.hr_size):
        raise ValidationError([f"truth shape {truth_field.shape} != hr_size {geometry.hr_size}"])
    if pupil is None:
        pupil = pupil_init(geometry)
    spectrum = dft2(truth_field)

    actual = plan
    if degradation.led_shift_radius > 0:
        pos = perturb_led_positions(geometry, degradation.led_shift_radius,
                                    rng_stream(degradation.seed, _LEDS))
        actual = replan(plan, geometry, pos)
    clean = forward_ideal(spectrum, pupil, actual, threads)

    seed = degradation.seed
    c = degradation.uneven_strength
    shape = clean.shape[1:]

    def illuminate(n):
        lam = make_uneven_illumination(shape, c, rng_stream(seed, _LAMBDA, n), degradation.blur_half_waist)
        return lam * clean[n] if c > 0 else clean[n].copy()

    frames = _map(illuminate, range(len(clean)), threads)
    frames = np.stack(frames)
    if degradation.vignetting.enabled:
        frames = apply_vignetting(frames, actual, degradation.vignetting)
    if degradation.background:
        frames = frames + degradation.background

    kind = degradation.noise_kind
    salt = max(float(frames.max()), 1.0)

    def noisy(n):
        rng = rng_stream(seed, _NOISE, n)
        if kind == "gaussian":
            return add_gaussian_noise(frames[n], degradation.noise_level, rng)
        if kind == "snp":
            return add_snp_noise(frames[n], degradation.noise_level, rng, salt)
        if kind == "poisson":
            return add_poisson_noise(np.maximum(frames[n], 0.0), degradation.photon_scale, rng)
        return frames[n]

    if kind != "none":
        frames = np.stack(_map(noisy, range(len(frames)), threads))

    truth_amp = np.abs(truth_field)
    truth_phase = np.angle(truth_field)
    stack = AcquisitionStack(frames, plan, geometry, truth_amp, truth_phase,
                            signed=bool(kind == "gaussian" and np.any(frames < 0)))
    if return_clean:
        return stack, clean
    return stack


def _map(fn, items, threads):
    items = list(items)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def noise_level_metric(clean: np.ndarray, degraded: np.ndarray, plan: IlluminationPlan) -> float:
    """Mean relative L1 deviation over dark-field frames, in percent.

    A frame counts as dark-field if any of its LEDs is dark-field. Frames
    whose clean image is identically zero are skipped.
    """
    clean = np.asarray(clean)
    degraded = np.asarray(degraded)
    if clean.shape != degraded.shape:
        raise ValueError(f"stack shapes differ: {clean.shape} vs {degraded.shape}")
    ratios = []
    for n, group in enumerate(plan.groups):
        if not any(e.is_dark_field for e in group):
            continue
        ref = np.abs(clean[n]).sum()
        if ref == 0:
            continue
        ratios.append(np.abs(clean[n] - degraded[n]).sum() / ref)
    if not ratios:
        raise ValueError("no dark-field images in plan")
    return float(100.0 * np.mean(ratios))


def with_seed(spec: DegradationSpec, seed: int) -> DegradationSpec:
    return dataclasses.replace(spec, seed=int(seed))
