import numpy as np
import pytest

import elfpie.solver as solver
from elfpie.baseline import fpie_momentum_reconstruct, replace_amplitude
from elfpie.bench import desk_stack
from elfpie.model import (AcquisitionStack, IlluminationPlan, LedEntry, PupilFunction, ReconstructionConfig,
                          SystemGeometry, ValidationError, desk_geometry)
from elfpie.operators import dft2
from elfpie.optics import extract_patch, forward_ideal, multiplexed_plan, pupil_init
from elfpie.solver import ReconstructionError, initial_spectrum, reconstruct, resolve_steps


@pytest.fixture(scope="module")
def clean_stack():
    return desk_stack(0)


def test_zero_iterations_returns_initialization(clean_stack):
    rec = reconstruct(clean_stack, config=ReconstructionConfig(iterations=0))
    init = initial_spectrum(clean_stack, pupil_init(clean_stack.geometry).field)
    assert np.array_equal(rec.estimate.spectrum, init)
    assert len(rec.trace) == 1 and rec.trace[0].iteration == 0


def test_trace_length_and_decrease(clean_stack):
    rec = reconstruct(clean_stack, config=ReconstructionConfig(iterations=20))
    assert [r.iteration for r in rec.trace] == list(range(21))
    assert rec.trace[-1].total < rec.trace[0].total
    assert rec.alpha == rec.beta > 0


def test_explicit_penalties_and_steps(clean_stack):
    cfg = ReconstructionConfig(iterations=2, alpha=0.0, beta=0.0, step=0.01)
    rec = reconstruct(clean_stack, config=cfg)
    assert rec.alpha == 0.0 and rec.trace[-1].total == rec.trace[-1].fidelity
    g = desk_geometry()
    assert resolve_steps(g, ReconstructionConfig()) == pytest.approx((1 / 257, 1 / 64))
    assert resolve_steps(g, cfg)[0] == 0.01


def test_pupil_learning_respects_support_and_bound(clean_stack):
    cfg = ReconstructionConfig(iterations=5, learn_pupil=True, pupil_bound=1.05)
    rec = reconstruct(clean_stack, config=cfg)
    p = rec.pupil
    assert np.all(p.field[~p.support] == 0)
    assert np.abs(p.field).max() <= 1.05 + 1e-12
    assert not np.allclose(p.field[p.support], 1.0)


def test_multiplexed_reconstruction_runs():
    g = desk_geometry()
    from elfpie.degrade import simulate
    from elfpie.bench import desk_truth
    from elfpie.model import DegradationSpec
    plan = multiplexed_plan(g, 3, seed=0)
    stack = simulate(desk_truth(0), g, plan, DegradationSpec())
    rec = reconstruct(stack, config=ReconstructionConfig(iterations=10))
    assert rec.trace[-1].total < rec.trace[0].total


def test_nonfinite_loss_aborts(clean_stack, monkeypatch):
    real = solver.total_gradient

    def broken(*args, **kw):
        g, p, rep = real(*args, **kw)
        if rep.iteration == 2:
            rep = type(rep)(rep.iteration, np.nan, 0.0, 0.0, np.nan)
        return g, p, rep

    monkeypatch.setattr(solver, "total_gradient", broken)
    with pytest.raises(ReconstructionError, match="iteration 2"):
        reconstruct(clean_stack, config=ReconstructionConfig(iterations=5))


def test_callback_sees_every_state(clean_stack):
    seen = []
    reconstruct(clean_stack, config=ReconstructionConfig(iterations=3), callback=lambda it, *_: seen.append(it))
    assert seen == [0, 1, 2, 3]


def test_replace_amplitude():
    o = np.array([3 + 4j, 0.0, -2.0])
    out = replace_amplitude(o, np.array([4.0, 9.0, 1.0]))
    assert np.allclose(np.abs(out), [2, 3, 1])
    assert np.allclose(np.angle(out[[0, 2]]), np.angle(o[[0, 2]]))


def test_baseline_single_update_is_exact_replacement():
    g = SystemGeometry(536e-9, 0.1, 4.0, 3.65e-6, 6e-3, (1, 1), 90e-3, lr_size=(8, 8), hr_size=(16, 16))
    rng = np.random.default_rng(0)
    plan = IlluminationPlan.sequential([LedEntry(0, (1, -2), 0.0, False)])
    images = rng.random((1, 8, 8)) + 0.1
    stack = AcquisitionStack(images, plan, g)
    ones = np.ones((8, 8), dtype=bool)
    pupil = PupilFunction(ones.astype(complex), 4.0, ones)
    spec0 = np.fft.fft2(rng.standard_normal((16, 16))) + 0.0j
    rec = fpie_momentum_reconstruct(stack, iterations=1, momentum=0.0, spectrum0=spec0, pupil0=pupil)
    patch = extract_patch(np.asarray(rec.estimate.spectrum), (1, -2), (8, 8))
    assert np.allclose(np.abs(dft2(patch)), np.sqrt(images[0]), atol=1e-12)


def test_baseline_zero_iterations_and_plan_check(clean_stack):
    rec = fpie_momentum_reconstruct(clean_stack, iterations=0)
    init = initial_spectrum(clean_stack, pupil_init(clean_stack.geometry).field)
    assert np.array_equal(rec.estimate.spectrum, init)
    g = desk_geometry()
    plan = multiplexed_plan(g, 3)
    stack = AcquisitionStack(np.ones((27, 64, 64)), plan, g)
    with pytest.raises(ValidationError):
        fpie_momentum_reconstruct(stack)


def test_baseline_improves_fit(clean_stack):
    rec = fpie_momentum_reconstruct(clean_stack, iterations=5)
    pupil = pupil_init(clean_stack.geometry)
    before = forward_ideal(initial_spectrum(clean_stack, pupil.field), pupil, clean_stack.plan)
    after = forward_ideal(np.asarray(rec.estimate.spectrum), pupil, clean_stack.plan)
    imgs = clean_stack.images
    assert np.linalg.norm(np.sqrt(after) - np.sqrt(imgs)) < np.linalg.norm(np.sqrt(before) - np.sqrt(imgs))
