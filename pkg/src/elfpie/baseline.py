"""Sequential amplitude-replacement FPIE with momentum (the mFPIE baseline)."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .model import AcquisitionStack, ObjectEstimate, PupilFunction, SystemGeometry, ValidationError, validate
from .operators import dft2, idft2
from .optics import pupil_init, _window
from .solver import Reconstruction, initial_spectrum


def replace_amplitude(o: np.ndarray, measured: np.ndarray) -> np.ndarray:
    """Keep the phase of ``o`` and impose the measured amplitude ``sqrt(I)``."""
    amp = np.sqrt(np.maximum(measured, 0.0))
    mag = np.abs(o)
    phasor = np.where(mag > 0, o / np.where(mag > 0, mag, 1.0), 1.0)
    return amp * phasor


def fpie_momentum_reconstruct(stack: AcquisitionStack, geometry: Optional[SystemGeometry] = None,
                              iterations: int = 50, step: float = 1.0, momentum: float = 0.9,
                              learn_pupil: bool = False, pupil_step: float = 1.0,
                              spectrum0: Optional[np.ndarray] = None,
                              pupil0: Optional[PupilFunction] = None) -> Reconstruction:
    """Classic FPIE: per-LED amplitude replacement in spiral order, heavy-ball momentum per sweep.

    After every full sweep the spectrum is moved to
    ``snapshot + momentum * velocity + sweep_change``.
    """
    geometry = geometry or stack.geometry
    validate(geometry, stack.plan, stack)
    if stack.plan.max_group_size != 1:
        raise ValidationError(["mFPIE requires a sequential plan (one LED per exposure)"])
    pupil = pupil0 or pupil_init(geometry)
    support = pupil.support
    p = np.array(pupil.field)
    spec = np.array(initial_spectrum(stack, p) if spectrum0 is None else spectrum0, dtype=np.complex128)
    order = sorted(range(stack.plan.n_images), key=lambda n: stack.plan.groups[n][0].illumination_na)
    images = stack.images
    lr = geometry.lr_size

    velocity = np.zeros_like(spec)
    snapshot = spec.copy()
    for _ in range(iterations):
        for n in order:
            e = stack.plan.groups[n][0]
            win = _window(e.spectral_offset, lr, spec.shape)
            x = spec[win].copy()
            psi = p * x
            psi_new = idft2(replace_amplitude(dft2(psi), images[n]))
            diff = psi_new - psi
            pmax = np.max(np.abs(p)) ** 2
            spec[win] = x + step * np.conj(p) * diff / pmax
            if learn_pupil:
                xmax = np.max(np.abs(x)) ** 2
                p = np.where(support, p + pupil_step * np.conj(x) * diff / xmax, 0)
        if momentum:
            velocity = momentum * velocity + (spec - snapshot)
            spec = snapshot + velocity
            snapshot = spec.copy()
    return Reconstruction(ObjectEstimate(spec), PupilFunction(p, pupil.cutoff_radius, support, pupil.bound), [])
