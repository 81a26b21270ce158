"""Discrete operators: centered unitary DFTs, finite differences, weighting, stencils.

Every difference operator uses periodic boundaries so that each forward
operator has an exact adjoint. ``x`` runs along columns (axis 1) and ``y``
along rows (axis 0). Vector fields are stacked on a leading axis:
``(2, h, w)`` for gradients and ``(3, h, w)`` (xx, yy, xy) for Hessians.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

#: isotropic norm weights; the Hessian cross term counts twice (Frobenius norm)
GRAD_WEIGHTS = np.array([1.0, 1.0])
HESSIAN_WEIGHTS = np.array([1.0, 1.0, 2.0])

#: Laplacian-like stencil used to estimate the penalty weights from raw frames
NOISE_STENCIL = np.array([[-1.0, 2.0, -1.0],
                          [-2.0, 4.0, -2.0],
                          [-1.0, 2.0, -1.0]])


def dft2(x: np.ndarray, workers: int = 1) -> np.ndarray:
    """Unitary 2-D DFT on centered layouts (DC at ``(h//2, w//2)`` on both sides)."""
    x = sfft.ifftshift(x, axes=(-2, -1))
    return sfft.fftshift(sfft.fft2(x, norm="ortho", workers=workers), axes=(-2, -1))


def idft2(x: np.ndarray, workers: int = 1) -> np.ndarray:
    """Inverse of :func:`dft2`."""
    x = sfft.ifftshift(x, axes=(-2, -1))
    return sfft.fftshift(sfft.ifft2(x, norm="ortho", workers=workers), axes=(-2, -1))


def _dx(img):
    return np.roll(img, -1, axis=-1) - img


def _dy(img):
    return np.roll(img, -1, axis=-2) - img


def _dx_t(v):
    return np.roll(v, 1, axis=-1) - v


def _dy_t(v):
    return np.roll(v, 1, axis=-2) - v


def grad(img: np.ndarray) -> np.ndarray:
    """Forward differences ``(d/dx, d/dy)`` with periodic wrap, shape ``(2, h, w)``."""
    return np.stack([_dx(img), _dy(img)])


def grad_adjoint(v: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`grad` (a negative divergence)."""
    return _dx_t(v[0]) + _dy_t(v[1])


def _dxx(img):
    return np.roll(img, -1, axis=-1) - 2.0 * img + np.roll(img, 1, axis=-1)


def _dyy(img):
    return np.roll(img, -1, axis=-2) - 2.0 * img + np.roll(img, 1, axis=-2)


def hessian(img: np.ndarray) -> np.ndarray:
    """Second differences ``(xx, yy, xy)``, shape ``(3, h, w)``.

    ``xx`` and ``yy`` are centered second differences; ``xy`` is the mixed
    forward difference ``d/dy d/dx``.
    """
    return np.stack([_dxx(img), _dyy(img), _dy(_dx(img))])


def hessian_adjoint(h: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`hessian`."""
    return _dxx(h[0]) + _dyy(h[1]) + _dx_t(_dy_t(h[2]))


def norm_weights(n_components: int) -> np.ndarray:
    if n_components == 2:
        return GRAD_WEIGHTS
    if n_components == 3:
        return HESSIAN_WEIGHTS
    raise ValueError(f"expected 2 or 3 components, got {n_components}")


def omega(components: np.ndarray, mode: str = "isotropic", epsilon: float = 1e-8) -> np.ndarray:
    """Pixelwise normalization of a stacked difference field.

    isotropic: each component divided by ``sqrt(sum_k w_k c_k**2 + eps**2)``;
    anisotropic: elementwise sign (``sign(0) == 0``).
    """
    if mode == "anisotropic":
        return np.sign(components)
    if mode != "isotropic":
        raise ValueError(f"unknown omega mode {mode!r}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    w = norm_weights(components.shape[0]).reshape(-1, 1, 1)
    mag = np.sqrt(np.sum(w * components ** 2, axis=0) + epsilon ** 2)
    return components / mag


def l1_norm(components: np.ndarray, mode: str = "isotropic", epsilon: float = 1e-8) -> float:
    """The penalty whose subgradient is ``w * omega(components)``.

    The isotropic form is shifted so that it vanishes at zero.
    """
    w = norm_weights(components.shape[0]).reshape(-1, 1, 1)
    if mode == "anisotropic":
        return float(np.sum(w * np.abs(components)))
    mag = np.sqrt(np.sum(w * components ** 2, axis=0) + epsilon ** 2)
    return float(np.sum(mag - epsilon))


def weighted_omega(components: np.ndarray, mode: str = "isotropic", epsilon: float = 1e-8) -> np.ndarray:
    """Derivative of :func:`l1_norm` with respect to ``components``."""
    w = norm_weights(components.shape[0]).reshape(-1, 1, 1)
    return w * omega(components, mode, epsilon)


# kernels with more taps than this go through the FFT in periodic mode
_FFT_KERNEL_MIN = 121


def _correlate_periodic_fft(img, kernel):
    h, w = img.shape
    kh, kw = kernel.shape
    # place the kernel center at the origin of an image-sized periodic buffer
    buf = np.zeros((h, w))
    for i in range(kh):
        for j in range(kw):
            buf[(i - kh // 2) % h, (j - kw // 2) % w] += kernel[i, j]
    out = sfft.ifft2(sfft.fft2(img) * np.conj(sfft.fft2(buf)))
    return out if np.iscomplexobj(img) else out.real


def convolve(img: np.ndarray, kernel: np.ndarray, boundary: str = "periodic") -> np.ndarray:
    """Correlate ``img`` with an odd-sized ``kernel`` anchored at its center (no flip)."""
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("kernel dimensions must be odd")
    if kh > img.shape[0] or kw > img.shape[1]:
        raise ValueError(f"kernel {kernel.shape} does not fit image {img.shape}")
    mode = {"periodic": "wrap", "replicate": "nearest"}.get(boundary)
    if mode is None:
        raise ValueError(f"unknown boundary rule {boundary!r}")
    if mode == "wrap" and kh * kw > _FFT_KERNEL_MIN:
        return _correlate_periodic_fft(img, kernel)
    if np.iscomplexobj(img):
        return (ndimage.correlate(img.real, kernel, mode=mode)
                + 1j * ndimage.correlate(img.imag, kernel, mode=mode))
    return ndimage.correlate(np.asarray(img, dtype=np.float64), kernel, mode=mode)


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Sampled isotropic Gaussian on a ``size x size`` stencil, summing to one."""
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be a positive odd integer")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()
