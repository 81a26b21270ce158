"""Reconstruction quality: linear-regressed SNR and field scoring."""

from __future__ import annotations

import numpy as np

LSNR_CAP = 300.0


def lsnr(recovered: np.ndarray, truth: np.ndarray) -> float:
    """SNR in dB maximized over an additive constant; capped at 300 dB.

    The optimal constant is ``mean(truth - recovered)``.
    """
    recovered = np.asarray(recovered, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if recovered.shape != truth.shape:
        raise ValueError(f"shape mismatch {recovered.shape} vs {truth.shape}")
    resid = truth - recovered
    resid = resid - resid.mean()
    num = float(np.sum(truth ** 2))
    den = float(np.sum(resid ** 2))
    if den == 0.0:
        return LSNR_CAP
    if num == 0.0:
        return -LSNR_CAP
    return float(min(LSNR_CAP, 10.0 * np.log10(num / den)))


def score_reconstruction(field: np.ndarray, truth_amplitude: np.ndarray, truth_phase: np.ndarray):
    """``(lsnr_amp, lsnr_phase, mean)`` of a recovered complex field.

    The phase is compared after removing the circular mean of its
    difference from the truth.
    """
    if truth_amplitude is None or truth_phase is None:
        raise ValueError("missing ground truth")
    field = np.asarray(field)
    amp = lsnr(np.abs(field), truth_amplitude)
    offset = np.angle(np.sum(np.exp(1j * (np.angle(field) - truth_phase))))
    phase = np.angle(field * np.exp(-1j * offset))
    ph = lsnr(phase, truth_phase)
    return amp, ph, 0.5 * (amp + ph)
