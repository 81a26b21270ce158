"""Gradient-feature L1 fidelity, Hessian penalties and their Wirtinger gradients.

All gradients are taken with respect to the conjugate variable, so the
first-order change of a real loss along a complex direction ``d`` is
``2 * Re(vdot(grad, d))``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import AcquisitionStack, IlluminationPlan, LedEntry, ReconstructionConfig
from .operators import (NOISE_STENCIL, convolve, dft2, grad, grad_adjoint, hessian, hessian_adjoint,
                        idft2, l1_norm, weighted_omega)
from .optics import embed_add_inplace, extract_patch

# floor on modeled intensities inside g'(S); only matters where S underflows
_TINY = 1e-12


def scaling(mode: str, gamma: float = 0.5):
    """Return ``(g, g')`` for a fidelity mode; ``g'`` is guarded near zero."""
    if mode == "amplitude":
        return np.sqrt, lambda s: 0.5 / np.sqrt(np.maximum(s, _TINY))
    if mode == "intensity":
        return (lambda s: s), (lambda s: np.ones_like(s))
    if mode == "gamma":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return (lambda s: np.power(s, gamma)), (lambda s: gamma * np.power(np.maximum(s, _TINY), gamma - 1.0))
    if mode == "log1p":
        return np.log1p, (lambda s: 1.0 / (1.0 + s))
    raise ValueError(f"unknown fidelity mode {mode!r}")


@dataclass
class GroupTerms:
    """Per-exposure fidelity value and its gradient pieces."""

    index: int
    loss: float
    spectrum_patches: list  # (offset, B-sized gradient patch)
    pupil_grad: Optional[np.ndarray]


def group_terms(n: int, group: tuple[LedEntry, ...], spectrum: np.ndarray, pupil: np.ndarray,
                measured: np.ndarray, config: ReconstructionConfig, with_grad: bool = True,
                with_pupil: bool = False) -> GroupTerms:
    """Fidelity of one exposure and the ``W``-weighted back-projections of its LEDs."""
    g, dg = scaling(config.fidelity_mode, config.gamma)
    patches = [extract_patch(spectrum, e.spectral_offset, pupil.shape) for e in group]
    fields = [dft2(pupil * x) for x in patches]
    s = np.zeros(pupil.shape)
    for o in fields:
        s += o.real ** 2 + o.imag ** 2
    meas = np.maximum(measured, 0.0)
    d = grad(g(s) - g(meas))
    loss = l1_norm(d, config.omega_mode, config.epsilon_omega)
    if not with_grad:
        return GroupTerms(n, loss, [], None)
    if config.literal_intensity_w and config.fidelity_mode == "intensity":
        # variant: amplitude residual inside omega, no 1/sqrt(S) factor (not the true gradient)
        q = grad_adjoint(weighted_omega(grad(np.sqrt(s) - np.sqrt(meas)),
                                        config.omega_mode, config.epsilon_omega))
        factor = q
    else:
        q = grad_adjoint(weighted_omega(d, config.omega_mode, config.epsilon_omega))
        factor = dg(s) * q
    pconj = np.conj(pupil)
    spec = []
    pgrad = np.zeros(pupil.shape, dtype=np.complex128) if with_pupil else None
    for e, x, o in zip(group, patches, fields):
        back = idft2(factor * o)
        spec.append((e.spectral_offset, pconj * back))
        if with_pupil:
            pgrad += np.conj(x) * back
    return GroupTerms(n, loss, spec, pgrad)


def _run_groups(spectrum, pupil, plan, images, config, with_grad, with_pupil):
    def task(n):
        return group_terms(n, plan.groups[n], spectrum, pupil, images[n], config, with_grad, with_pupil)

    n_groups = plan.n_images
    if config.threads <= 1:
        yield from (task(n) for n in range(n_groups))
        return
    with ThreadPoolExecutor(config.threads) as pool:
        futures = [pool.submit(task, n) for n in range(n_groups)]
        if config.deterministic_reduction:
            for f in futures:
                yield f.result()
        else:
            for f in as_completed(futures):
                yield f.result()


def fidelity(spectrum: np.ndarray, pupil: np.ndarray, plan: IlluminationPlan, images: np.ndarray,
             config: ReconstructionConfig, with_grad: bool = True, with_pupil: bool = False):
    """Fidelity loss with optional spectrum and pupil gradients.

    Returns ``(loss, spectrum_grad, pupil_grad)``; gradients are ``None``
    when not requested. With ``deterministic_reduction`` the per-LED
    contributions are summed in plan order regardless of thread count.
    """
    loss = 0.0
    gspec = np.zeros(spectrum.shape, dtype=np.complex128) if with_grad else None
    gpup = np.zeros(pupil.shape, dtype=np.complex128) if (with_grad and with_pupil) else None
    for terms in _run_groups(spectrum, pupil, plan, images, config, with_grad, with_pupil):
        loss += terms.loss
        for offset, patch in terms.spectrum_patches:
            embed_add_inplace(gspec, patch, offset)
        if gpup is not None:
            gpup += terms.pupil_grad
    return loss, gspec, gpup


def fidelity_loss(spectrum, pupil, plan, images, config) -> float:
    return fidelity(spectrum, pupil, plan, images, config, with_grad=False)[0]


def fidelity_W(n: int, m: int, spectrum, pupil, plan, images, config) -> np.ndarray:
    """Camera-plane weight ``W`` for LED ``m`` of exposure ``n`` (gradient w.r.t. its conjugate field)."""
    g, dg = scaling(config.fidelity_mode, config.gamma)
    group = plan.groups[n]
    fields = [dft2(pupil * extract_patch(spectrum, e.spectral_offset, pupil.shape)) for e in group]
    s = sum(o.real ** 2 + o.imag ** 2 for o in fields)
    meas = np.maximum(images[n], 0.0)
    if config.literal_intensity_w and config.fidelity_mode == "intensity":
        q = grad_adjoint(weighted_omega(grad(np.sqrt(s) - np.sqrt(meas)), config.omega_mode, config.epsilon_omega))
        return q * fields[m]
    d = grad(g(s) - g(meas))
    q = grad_adjoint(weighted_omega(d, config.omega_mode, config.epsilon_omega))
    return dg(s) * q * fields[m]


def grad_fidelity_spectrum(spectrum, pupil, plan, images, config) -> np.ndarray:
    return fidelity(spectrum, pupil, plan, images, config)[1]


def grad_fidelity_pupil(spectrum, pupil, plan, images, config, support: Optional[np.ndarray] = None) -> np.ndarray:
    gp = fidelity(spectrum, pupil, plan, images, config, with_pupil=True)[2]
    if support is not None:
        gp = np.where(support, gp, 0)
    return gp


def hessian_amp(spectrum: np.ndarray, mode: str = "isotropic", epsilon: float = 1e-8,
                eta: float = 1e-6, with_grad: bool = True, obj: Optional[np.ndarray] = None):
    """L1 Hessian penalty on the object amplitude, and its gradient w.r.t. the spectrum."""
    o = idft2(spectrum) if obj is None else obj
    a = np.abs(o)
    h = hessian(a)
    loss = l1_norm(h, mode, epsilon)
    if not with_grad:
        return loss, None
    q = hessian_adjoint(weighted_omega(h, mode, epsilon))
    return loss, dft2(0.5 * o / (a + eta) * q)


def hessian_phase(spectrum: np.ndarray, mode: str = "isotropic", epsilon: float = 1e-8,
                  eta: float = 1e-6, with_grad: bool = True, obj: Optional[np.ndarray] = None):
    """L1 Hessian penalty on the wrapped object phase, and its gradient."""
    o = idft2(spectrum) if obj is None else obj
    phi = np.angle(o)
    h = hessian(phi)
    loss = l1_norm(h, mode, epsilon)
    if not with_grad:
        return loss, None
    q = hessian_adjoint(weighted_omega(h, mode, epsilon))
    return loss, dft2(0.5j * o / (np.abs(o) ** 2 + eta) * q)


def hessian_penalty_amp(spectrum, mode="isotropic", epsilon=1e-8) -> float:
    return hessian_amp(spectrum, mode, epsilon, with_grad=False)[0]


def grad_hessian_amp(spectrum, mode="isotropic", epsilon=1e-8, eta=1e-6) -> np.ndarray:
    return hessian_amp(spectrum, mode, epsilon, eta)[1]


def hessian_penalty_phase(spectrum, mode="isotropic", epsilon=1e-8) -> float:
    return hessian_phase(spectrum, mode, epsilon, with_grad=False)[0]


def grad_hessian_phase(spectrum, mode="isotropic", epsilon=1e-8, eta=1e-6) -> np.ndarray:
    return hessian_phase(spectrum, mode, epsilon, eta)[1]


AUTO_PREFACTOR = np.sqrt(np.pi / 2.0) / 5.0


def auto_alpha_beta(images: np.ndarray, mode: str = "amplitude", gamma: float = 0.5) -> float:
    """Penalty weight from the mean absolute stencil response of the (rescaled) frames.

    Intensity mode uses the raw frames, amplitude mode their square roots;
    the gamma and log modes use their own scaling function.
    """
    imgs = np.maximum(np.asarray(images, dtype=np.float64), 0.0)
    if mode == "intensity":
        f = imgs
    elif mode == "amplitude":
        f = np.sqrt(imgs)
    else:
        f = scaling(mode, gamma)[0](imgs)
    total = 0.0
    for frame in f.reshape(-1, *f.shape[-2:]):
        total += np.abs(convolve(frame, NOISE_STENCIL, "replicate")).mean()
    return float(AUTO_PREFACTOR * total / len(f.reshape(-1, *f.shape[-2:])))


@dataclass(frozen=True)
class LossReport:
    iteration: int
    fidelity: float
    amp_hessian: float
    phase_hessian: float
    total: float

    @classmethod
    def compose(cls, iteration, fid, amp, phase, alpha, beta) -> "LossReport":
        return cls(iteration, fid, amp, phase, fid + alpha * amp + beta * phase)


def total_gradient(spectrum: np.ndarray, pupil: np.ndarray, plan: IlluminationPlan, images: np.ndarray,
                   config: ReconstructionConfig, alpha: float, beta: float, iteration: int = 0,
                   with_pupil: bool = False, support: Optional[np.ndarray] = None):
    """Gradient of the full cost w.r.t. the conjugate spectrum (and optionally the pupil).

    Returns ``(spectrum_grad, pupil_grad_or_None, LossReport)``. The pupil
    gradient carries the fidelity term only.
    """
    fid, gspec, gpup = fidelity(spectrum, pupil, plan, images, config, with_pupil=with_pupil)
    obj = idft2(spectrum)
    amp_loss, amp_grad = hessian_amp(spectrum, config.omega_mode, config.epsilon_omega, config.eta_phase,
                                     with_grad=alpha > 0, obj=obj)
    ph_loss, ph_grad = hessian_phase(spectrum, config.omega_mode, config.epsilon_omega, config.eta_phase,
                                     with_grad=beta > 0, obj=obj)
    if alpha > 0:
        gspec += alpha * amp_grad
    if beta > 0:
        gspec += beta * ph_grad
    if gpup is not None and support is not None:
        gpup = np.where(support, gpup, 0)
    return gspec, gpup, LossReport.compose(iteration, fid, amp_loss, ph_loss, alpha, beta)


def stack_images(stack_or_images) -> np.ndarray:
    if isinstance(stack_or_images, AcquisitionStack):
        return stack_or_images.images
    return np.asarray(stack_or_images)
