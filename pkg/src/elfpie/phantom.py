"""Procedural band-limited amplitude/phase test objects."""

from __future__ import annotations

import numpy as np

from .operators import dft2, idft2


def _shapes(shape, rng, n_shapes):
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.zeros(shape)
    for _ in range(n_shapes):
        cy, cx = rng.uniform(0.1, 0.9) * h, rng.uniform(0.1, 0.9) * w
        kind = rng.integers(3)
        val = rng.uniform(-1, 1)
        if kind == 0:
            ry, rx = rng.uniform(0.04, 0.18, size=2) * np.array([h, w])
            th = rng.uniform(0, np.pi)
            u = (xx - cx) * np.cos(th) + (yy - cy) * np.sin(th)
            v = -(xx - cx) * np.sin(th) + (yy - cy) * np.cos(th)
            img += val * ((u / rx) ** 2 + (v / ry) ** 2 <= 1)
        elif kind == 1:
            hy, hx = rng.uniform(0.03, 0.15, size=2) * np.array([h, w])
            img += val * ((np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx))
        else:
            s = rng.uniform(0.02, 0.08) * min(h, w)
            img += val * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
    return img


def lowpass(img: np.ndarray, radius: float, taper: float = 0.25) -> np.ndarray:
    """Raised-cosine spectral low-pass; full pass below ``radius*(1-taper)``."""
    h, w = img.shape
    ky = np.arange(h) - h // 2
    kx = np.arange(w) - w // 2
    r = np.hypot(ky[:, None] * (w / h), kx[None, :])
    r0 = radius * (1 - taper)
    win = np.clip((radius - r) / max(radius - r0, 1e-12), 0, 1)
    win = 0.5 - 0.5 * np.cos(np.pi * win)
    return idft2(dft2(img) * win).real


def normalize(img: np.ndarray, lo: float = 0.1, hi: float = 1.0) -> np.ndarray:
    span = img.max() - img.min()
    if span == 0:
        return np.full_like(img, (lo + hi) / 2)
    return lo + (hi - lo) * (img - img.min()) / span


def phantom(shape=(257, 257), band_radius: float = 36.0, seed: int = 0, n_shapes: int = 24):
    """Amplitude and phase maps in ``[0.1, 1]`` whose spectra vanish beyond ``band_radius`` pixels."""
    rng = np.random.default_rng(seed)
    amp = normalize(lowpass(_shapes(shape, rng, n_shapes), band_radius))
    phase = normalize(lowpass(_shapes(shape, rng, n_shapes), band_radius))
    return amp, phase
