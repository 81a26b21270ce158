import numpy as np
import pytest
from conftest import dense_dft, random_complex

from elfpie.operators import (HESSIAN_WEIGHTS, NOISE_STENCIL, convolve, dft2, gaussian_kernel, grad, grad_adjoint,
                              hessian, hessian_adjoint, idft2, l1_norm, omega)


def test_dft_matches_dense_matrix(rng):
    for shape in [(8, 8), (7, 9), (16, 5)]:
        x = random_complex(rng, shape)
        dense = dense_dft(shape[0]) @ x @ dense_dft(shape[1]).T
        assert np.allclose(dft2(x), dense, atol=1e-12)
        assert np.allclose(idft2(dense), x, atol=1e-12)


def test_dft_delta_and_constant():
    b = 8
    delta = np.zeros((b, b))
    delta[b // 2, b // 2] = 1.0
    out = dft2(delta)
    assert np.allclose(np.abs(out), 1.0 / b)
    const = dft2(np.ones((b, b)))
    expected = np.zeros((b, b))
    expected[b // 2, b // 2] = b
    assert np.allclose(const, expected, atol=1e-12)


def test_parseval(rng):
    for _ in range(20):
        x = random_complex(rng, (13, 16))
        assert abs(np.linalg.norm(dft2(x)) - np.linalg.norm(x)) <= 1e-12 * np.linalg.norm(x)


def test_dft_linear(rng):
    x, y = random_complex(rng, (8, 8)), random_complex(rng, (8, 8))
    a, b = 0.3 - 2j, 1.7
    assert np.allclose(dft2(a * x + b * y), a * dft2(x) + b * dft2(y), atol=1e-12)


def test_grad_constant_and_ramp():
    assert np.all(grad(np.full((6, 7), 3.2)) == 0)
    x = np.tile(np.arange(7.0), (6, 1))
    g = grad(x)
    # interior forward difference of a unit ramp is one; the wrap column sees the jump
    assert np.allclose(g[0][:, :-1], 1.0)
    assert np.allclose(g[1], 0.0)


def test_hessian_kills_affine_interior():
    yy, xx = np.mgrid[0:9, 0:9].astype(float)
    h = hessian(2.0 + 0.5 * xx - 1.5 * yy)
    assert np.allclose(h[:, 2:-2, 2:-2], 0.0, atol=1e-12)


@pytest.mark.parametrize("complex_input", [False, True])
def test_adjoint_identities(rng, complex_input):
    for _ in range(100):
        shape = tuple(rng.integers(3, 12, size=2))
        x = rng.standard_normal(shape)
        if complex_input:
            x = x + 1j * rng.standard_normal(shape)
        v2 = rng.standard_normal((2,) + shape)
        v3 = rng.standard_normal((3,) + shape)
        lhs = np.vdot(v2, grad(x))
        rhs = np.vdot(grad_adjoint(v2), x)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
        lhs = np.vdot(v3, hessian(x))
        rhs = np.vdot(hessian_adjoint(v3), x)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_operator_linearity(rng):
    x, y = rng.standard_normal((7, 8)), rng.standard_normal((7, 8))
    for op in (grad, hessian):
        assert np.allclose(op(2 * x - 3 * y), 2 * op(x) - 3 * op(y), atol=1e-12)


def test_omega_isotropic_bounded(rng):
    c = rng.standard_normal((3, 20, 20)) * 10
    w = omega(c, "isotropic")
    mag = np.sqrt(np.sum(HESSIAN_WEIGHTS[:, None, None] * w ** 2, axis=0))
    assert np.all(mag <= 1.0 + 1e-12)


def test_omega_anisotropic_sign_idempotent(rng):
    c = rng.standard_normal((2, 10, 10))
    s = omega(c, "anisotropic")
    assert set(np.unique(s)) <= {-1.0, 0.0, 1.0}
    assert np.array_equal(omega(s, "anisotropic"), s)


def test_l1_norm_matches_direct_sum(rng):
    c = rng.standard_normal((3, 5, 6))
    eps = 1e-8
    w = HESSIAN_WEIGHTS
    iso = 0.0
    aniso = 0.0
    for i in range(5):
        for j in range(6):
            iso += np.sqrt(sum(w[k] * c[k, i, j] ** 2 for k in range(3)) + eps ** 2) - eps
            aniso += sum(w[k] * abs(c[k, i, j]) for k in range(3))
    assert l1_norm(c, "isotropic", eps) == pytest.approx(iso, rel=1e-12)
    assert l1_norm(c, "anisotropic", eps) == pytest.approx(aniso, rel=1e-12)


def _naive_correlate(img, k, boundary):
    h, w = img.shape
    kh, kw = k.shape
    out = np.zeros_like(img, dtype=np.result_type(img, k))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(kh):
                for b in range(kw):
                    y, x = i + a - kh // 2, j + b - kw // 2
                    if boundary == "periodic":
                        y, x = y % h, x % w
                    else:
                        y, x = min(max(y, 0), h - 1), min(max(x, 0), w - 1)
                    acc += k[a, b] * img[y, x]
            out[i, j] = acc
    return out


@pytest.mark.parametrize("boundary", ["periodic", "replicate"])
@pytest.mark.parametrize("ksize", [3, 5, 13])
def test_convolve_matches_double_loop(rng, boundary, ksize):
    img = rng.standard_normal((9, 14)) if ksize < 13 else rng.standard_normal((15, 17))
    k = rng.standard_normal((ksize, ksize))
    assert np.allclose(convolve(img, k, boundary), _naive_correlate(img, k, boundary), atol=1e-12)


def test_convolve_complex_and_impulse(rng):
    img = np.zeros((9, 9))
    img[4, 4] = 1.0
    k = rng.standard_normal((3, 3))
    out = convolve(img, k, "periodic")
    # correlation: the impulse response is the kernel flipped
    assert np.allclose(out[3:6, 3:6], k[::-1, ::-1])
    z = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    assert np.allclose(convolve(z, k), convolve(z.real, k) + 1j * convolve(z.imag, k), atol=1e-12)


def test_convolve_errors():
    with pytest.raises(ValueError):
        convolve(np.zeros((5, 5)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        convolve(np.zeros((5, 5)), np.ones((7, 7)))
    with pytest.raises(ValueError):
        convolve(np.zeros((5, 5)), np.ones((3, 3)), "mirror")


def test_noise_stencil_kills_constants():
    assert NOISE_STENCIL.sum() == 0
    assert np.allclose(convolve(np.full((8, 8), 4.0), NOISE_STENCIL, "replicate"), 0.0)


def test_gaussian_kernel():
    assert np.array_equal(gaussian_kernel(1, 1.0), [[1.0]])
    k = gaussian_kernel(3, 1.0)
    assert k.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(k, k.T) and np.allclose(k, k[::-1, ::-1])
    assert k[1, 1] == k.max()
    big = gaussian_kernel(31, 15.0)
    assert big[15, 30] / big[15, 15] == pytest.approx(np.exp(-0.5), rel=1e-12)
    with pytest.raises(ValueError):
        gaussian_kernel(4, 1.0)
    with pytest.raises(ValueError):
        gaussian_kernel(3, 0.0)
