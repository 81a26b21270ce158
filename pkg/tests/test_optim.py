import numpy as np
import pytest

from elfpie.optim import OptimizerState, adabelief_step, comparator_step, nadam_step, sgd_step, step


def test_zero_gradient_fixed_point():
    s = OptimizerState.fresh((4, 4))
    inc, s2 = adabelief_step(s, np.zeros((4, 4), complex))
    assert np.all(inc == 0)
    assert np.all(s2.mu == 0) and np.all(s2.v == 0)
    # the rate field decays toward the (zero) increments
    assert np.allclose(s2.delta, 0.9)


def test_first_step_closed_form():
    g1, g2, eta = 0.9, 0.999, 1e-8
    g = np.array([[1.0 + 2.0j, -0.5]])
    inc, s = adabelief_step(OptimizerState.fresh(g.shape, 0.3), g, g1, g2, eta)
    mu = (1 - g1) * g
    v = (1 - g2) * np.abs(mu - g) ** 2
    mu_hat = mu / (1 - g1)
    v_hat = v / (1 - g2)
    expected = (0.3 + eta) / np.sqrt(v_hat + eta) * (g1 * mu_hat + (1 - g1) * g)
    assert np.allclose(inc, expected, rtol=1e-14)
    # with t = 1 the blend reduces to g and v_hat to |0.9 g|^2
    assert np.allclose(inc, (0.3 + eta) / np.sqrt(0.81 * np.abs(g) ** 2 + eta) * g, rtol=1e-12)
    assert np.allclose(s.delta, g1 * 0.09 + (1 - g1) * np.abs(expected) ** 2)
    assert s.t == 1


def test_two_steps_recursion():
    rng = np.random.default_rng(0)
    ga, gb = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    s = OptimizerState.fresh((3,))
    _, s = adabelief_step(s, ga)
    inc, s2 = adabelief_step(s, gb)
    mu = 0.9 * s.mu + 0.1 * gb
    v = 0.999 * s.v + 0.001 * np.abs(mu - gb) ** 2
    mh, vh = mu / (1 - 0.81), v / (1 - 0.999 ** 2)
    exp = (np.sqrt(s.delta) + 1e-8) / np.sqrt(vh + 1e-8) * (0.9 * mh + 0.1 * gb)
    assert np.allclose(inc, exp, rtol=1e-13)


def test_elementwise_permutation():
    rng = np.random.default_rng(1)
    g = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    perm = rng.permutation(20)
    a, _ = adabelief_step(OptimizerState.fresh(20), g)
    b, _ = adabelief_step(OptimizerState.fresh(20), g[perm])
    assert np.array_equal(a[perm], b)


def test_sgd():
    s = OptimizerState.fresh(3)
    g = np.array([1.0, -2.0, 0.5j])
    inc, _ = sgd_step(s, g, 0.1)
    assert np.array_equal(inc, 0.1 * g)
    assert np.all(comparator_step("sgd", s, np.zeros(3), 0.1)[0] == 0)


def test_plain_adabelief_freezes_rate():
    rng = np.random.default_rng(2)
    s_plain = OptimizerState.fresh(5)
    s_ref = OptimizerState.fresh(5, 1.0)
    for _ in range(6):
        g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        a, s_plain = comparator_step("adabelief_plain", s_plain, g, 1.0)
        b, s_ref = adabelief_step(s_ref, g, adapt_rate=False)
        assert np.array_equal(a, b)
    assert np.all(s_plain.delta == 1.0)


def test_modified_rate_adapts():
    g = np.ones(3, complex)
    s = OptimizerState.fresh(3)
    for _ in range(3):
        _, s = adabelief_step(s, g)
    assert not np.allclose(s.delta, 1.0)


def test_nadam_first_step():
    g = np.array([2.0, -1.0])
    inc, _ = nadam_step(OptimizerState.fresh(2), g, 0.01)
    m_hat = 0.9 * 0.1 * g / (1 - 0.81) + 0.1 * g / 0.1
    v_hat = g ** 2
    assert np.allclose(inc, 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8))


def test_step_dispatch():
    g = np.ones(2)
    for kind in ("elfpie", "adabelief", "nadam", "sgd"):
        inc, _ = step(kind, OptimizerState.fresh(2), g, 0.1, 0.9, 0.999, 1e-8)
        assert np.all(np.isfinite(inc))
    with pytest.raises(ValueError):
        step("lbfgs", OptimizerState.fresh(2), g, 0.1, 0.9, 0.999, 1e-8)
