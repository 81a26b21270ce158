"""Shared fixtures: tiny random instances and finite-difference helpers."""

import numpy as np
import pytest

from elfpie.model import IlluminationPlan, LedEntry, ReconstructionConfig

HR, LR = 16, 8


def dense_dft(n: int) -> np.ndarray:
    """Centered unitary DFT matrix, built entry by entry."""
    c = n // 2
    k = np.arange(n)[:, None] - c
    j = np.arange(n)[None, :] - c
    return np.exp(-2j * np.pi * k * j / n) / np.sqrt(n)


def random_plan(rng, n_groups=5, group_size=1, lr=LR, hr=HR) -> IlluminationPlan:
    lim = (hr - lr) // 2
    groups = []
    idx = 0
    for _ in range(n_groups):
        g = []
        for _ in range(group_size):
            off = tuple(int(v) for v in rng.integers(-lim, lim + 1, size=2))
            na = float(np.hypot(*off)) / 40.0
            g.append(LedEntry(idx, off, na, na > 0.1, (off[0] / 40.0, off[1] / 40.0)))
            idx += 1
        groups.append(tuple(g))
    return IlluminationPlan(tuple(groups))


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def smooth_object(rng, n=HR):
    """Object with amplitude in [0.5, 1.5] and phase in (-1, 1): away from branch cuts and zeros."""
    amp = 1.0 + 0.5 * np.tanh(rng.standard_normal((n, n)))
    ph = np.tanh(rng.standard_normal((n, n)))
    return amp * np.exp(1j * ph)


def random_instance(rng, group_size=1, n_groups=5):
    """Spectrum, pupil, plan and a positive measured stack on the 16/8 grids."""
    from elfpie.operators import dft2
    from elfpie.optics import forward_ideal

    spec = dft2(smooth_object(rng))
    pupil = 1.0 + 0.3 * random_complex(rng, (LR, LR))
    plan = random_plan(rng, n_groups, group_size)
    truth = forward_ideal(spec + 0.3 * random_complex(rng, spec.shape), pupil, plan)
    images = truth * (1.0 + 0.2 * rng.random(truth.shape)) + 0.05
    return spec, pupil, plan, images


def wirtinger_directional(G, d):
    """First-order change of a real loss along ``d`` given gradient w.r.t. the conjugate variable."""
    return 2.0 * np.real(np.vdot(G, d))


def fd_relative_error(loss, x, G, rng, n_dirs=4, h=1e-6):
    """Max over random real and imaginary directions of |fd - analytic| / |analytic|."""
    worst = 0.0
    for k in range(n_dirs):
        d = rng.standard_normal(x.shape)
        d = d / np.linalg.norm(d)
        if k % 2:
            d = 1j * d
        step = h * max(1.0, np.linalg.norm(x) / np.sqrt(x.size))
        fd = (loss(x + step * d) - loss(x - step * d)) / (2 * step)
        an = wirtinger_directional(G, d)
        worst = max(worst, abs(fd - an) / max(abs(an), abs(fd), 1e-12))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def config(**kw) -> ReconstructionConfig:
    return ReconstructionConfig(**kw)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
