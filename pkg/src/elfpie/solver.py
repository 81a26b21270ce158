"""The Elfpie reconstruction loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .losses import LossReport, auto_alpha_beta, total_gradient
from .model import (AcquisitionStack, ObjectEstimate, PupilFunction, ReconstructionConfig, SystemGeometry,
                    validate)
from .operators import convolve, gaussian_kernel, idft2
from .optics import embed_add_inplace, pupil_init
from .optim import OptimizerState, step

log = logging.getLogger(__name__)


class ReconstructionError(RuntimeError):
    pass


@dataclass
class Reconstruction:
    estimate: ObjectEstimate
    pupil: PupilFunction
    trace: list[LossReport] = field(default_factory=list)
    alpha: float = 0.0
    beta: float = 0.0

    @property
    def field(self) -> np.ndarray:
        return self.estimate.field


def center_frame(stack: AcquisitionStack) -> tuple[int, tuple[int, int]]:
    """Index and offset of the exposure containing the most on-axis LED."""
    best = None
    for n, group in enumerate(stack.plan.groups):
        for e in group:
            if best is None or e.illumination_na < best[0]:
                best = (e.illumination_na, n, e.spectral_offset)
    return best[1], best[2]


def initial_spectrum(stack: AcquisitionStack, pupil: np.ndarray) -> np.ndarray:
    """Back-project the square root of the on-axis frame, with zero phase, into the HR spectrum.

    This is Fourier-domain upsampling of the amplitude image restricted to
    the pupil band, placed at the on-axis LED's spectral window.
    """
    n, offset = center_frame(stack)
    m = len(stack.plan.groups[n])
    amp = np.sqrt(np.maximum(stack.images[n], 0.0) / m)
    spec = np.zeros(stack.geometry.hr_size, dtype=np.complex128)
    embed_add_inplace(spec, (np.abs(pupil) > 0) * idft2(amp), offset)
    return spec


def resolve_penalties(stack: AcquisitionStack, config: ReconstructionConfig) -> tuple[float, float]:
    auto = None
    if config.alpha is None or config.beta is None:
        auto = auto_alpha_beta(stack.images, config.fidelity_mode, config.gamma)
    alpha = auto if config.alpha is None else config.alpha
    beta = auto if config.beta is None else config.beta
    return float(alpha), float(beta)


def resolve_steps(geometry: SystemGeometry, config: ReconstructionConfig) -> tuple[float, float]:
    """Initial step sizes for the spectrum and the pupil."""
    ah, aw = geometry.hr_size
    s_step = config.step if config.step is not None else 1.0 / np.sqrt(ah * aw)
    bh, bw = geometry.lr_size
    p_step = config.pupil_step if config.pupil_step is not None else 1.0 / np.sqrt(bh * bw)
    return float(s_step), float(p_step)


def smooth_pupil(p: np.ndarray, support: np.ndarray, size: int, sigma: float) -> np.ndarray:
    if size <= 1:
        return np.where(support, p, 0)
    return np.where(support, convolve(p, gaussian_kernel(size, sigma), "replicate"), 0)


def _clip_modulus(p: np.ndarray, bound: float) -> np.ndarray:
    mag = np.abs(p)
    return np.where(mag > bound, p * (bound / np.maximum(mag, 1e-300)), p)


def reconstruct(stack: AcquisitionStack, geometry: Optional[SystemGeometry] = None,
                config: Optional[ReconstructionConfig] = None, *,
                spectrum0: Optional[np.ndarray] = None, pupil0: Optional[PupilFunction] = None,
                callback=None) -> Reconstruction:
    """Run Elfpie on an acquisition stack.

    Every outer iteration evaluates the full cost gradient at the current
    spectrum and takes one optimizer step on the whole spectrum (and on the
    pupil when ``learn_pupil`` is set). The returned trace has one entry per
    evaluated state, ``iterations + 1`` in total.
    """
    config = (config or ReconstructionConfig()).validated()
    geometry = geometry or stack.geometry
    validate(geometry, stack.plan, stack)
    pupil = pupil0 or pupil_init(geometry, config.pupil_bound)
    support = pupil.support
    p = np.array(pupil.field)
    spec = np.array(initial_spectrum(stack, p) if spectrum0 is None else spectrum0, dtype=np.complex128)
    alpha, beta = resolve_penalties(stack, config)
    images = stack.images
    plan = stack.plan

    s_step, p_step = resolve_steps(geometry, config)
    s_state = OptimizerState.fresh(spec.shape, s_step)
    p_state = OptimizerState.fresh(p.shape, p_step)
    trace = []
    for it in range(config.iterations + 1):
        last = it == config.iterations
        learn_p = config.learn_pupil and not last
        g_spec, g_pup, report = total_gradient(spec, p, plan, images, config, alpha, beta, it,
                                               with_pupil=learn_p, support=support)
        if not np.isfinite(report.total):
            raise ReconstructionError(f"non-finite loss at iteration {it}: {report}")
        trace.append(report)
        if callback is not None:
            callback(it, spec, p, report)
        if last:
            break
        inc, s_state = step(config.optimizer, s_state, g_spec, s_step, config.gamma1, config.gamma2,
                            config.eta_opt)
        spec = spec - inc
        if learn_p:
            p = smooth_pupil(p, support, config.pupil_smooth_size, config.pupil_smooth_sigma)
            inc_p, p_state = step(config.optimizer, p_state, g_pup, p_step, config.gamma1,
                                  config.gamma2, config.eta_opt)
            p = _clip_modulus(np.where(support, p - inc_p, 0), config.pupil_bound)
    log.debug("finished %d iterations, total loss %.6g", config.iterations, trace[-1].total)
    return Reconstruction(ObjectEstimate(spec),
                          PupilFunction(p, pupil.cutoff_radius, support, config.pupil_bound),
                          trace, alpha, beta)
