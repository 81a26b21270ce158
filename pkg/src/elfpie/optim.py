"""Elementwise optimizers for complex parameter fields.

``elfpie`` is AdaBelief with a Nesterov-style blend and an AdaDelta-like
per-element learning rate ``sqrt(delta)`` that tracks past increments.
The comparators (plain AdaBelief, NAdam, SGD) share the same state layout
so a run can switch rules without touching the loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class OptimizerState:
    mu: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, shape, step: float = 1.0) -> "OptimizerState":
        return cls(np.zeros(shape, dtype=np.complex128), np.zeros(shape),
                   np.full(shape, float(step) ** 2), 0)

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.mu.copy(), self.v.copy(), self.delta.copy(), self.t)


def adabelief_step(state: OptimizerState, g: np.ndarray, gamma1: float = 0.9, gamma2: float = 0.999,
                   eta: float = 1e-8, adapt_rate: bool = True) -> tuple[np.ndarray, OptimizerState]:
    """One modified-AdaBelief update; returns ``(increment, new_state)``.

    The caller applies ``param -= increment``. With ``adapt_rate=False`` the
    learning-rate field is frozen (plain AdaBelief with the same blend).
    """
    t = state.t + 1
    mu = gamma1 * state.mu + (1 - gamma1) * g
    dev = mu - g
    v = gamma2 * state.v + (1 - gamma2) * (dev.real ** 2 + dev.imag ** 2)
    mu_hat = mu / (1 - gamma1 ** t)
    v_hat = v / (1 - gamma2 ** t)
    inc = (np.sqrt(state.delta) + eta) / np.sqrt(v_hat + eta) * (gamma1 * mu_hat + (1 - gamma1) * g)
    if adapt_rate:
        delta = gamma1 * state.delta + (1 - gamma1) * (inc.real ** 2 + inc.imag ** 2)
    else:
        delta = state.delta
    return inc, OptimizerState(mu, v, delta, t)


def sgd_step(state: OptimizerState, g: np.ndarray, lr: float) -> tuple[np.ndarray, OptimizerState]:
    return lr * g, OptimizerState(state.mu, state.v, state.delta, state.t + 1)


def nadam_step(state: OptimizerState, g: np.ndarray, lr: float, beta1: float = 0.9, beta2: float = 0.999,
               eps: float = 1e-8) -> tuple[np.ndarray, OptimizerState]:
    """Textbook NAdam (Dozat 2016, no momentum schedule)."""
    t = state.t + 1
    mu = beta1 * state.mu + (1 - beta1) * g
    v = beta2 * state.v + (1 - beta2) * (g.real ** 2 + g.imag ** 2)
    m_hat = beta1 * mu / (1 - beta1 ** (t + 1)) + (1 - beta1) * g / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    return lr * m_hat / (np.sqrt(v_hat) + eps), OptimizerState(mu, v, state.delta, t)


def comparator_step(kind: str, state: OptimizerState, g: np.ndarray, lr: float, gamma1: float = 0.9,
                    gamma2: float = 0.999, eta: float = 1e-8) -> tuple[np.ndarray, OptimizerState]:
    """Update rules used for the optimizer comparison.

    ``adabelief_plain`` is the modified rule with its rate field frozen at
    ``lr**2``; the first-moment blend is kept so only the rate adaptation
    differs.
    """
    if kind == "sgd":
        return sgd_step(state, g, lr)
    if kind == "nadam":
        return nadam_step(state, g, lr, gamma1, gamma2, eta)
    if kind in ("adabelief_plain", "adabelief"):
        if state.t == 0:
            state = OptimizerState(state.mu, state.v, np.full(np.shape(g), float(lr) ** 2), 0)
        return adabelief_step(state, g, gamma1, gamma2, eta, adapt_rate=False)
    raise ValueError(f"unknown comparator {kind!r}")


def step(kind: str, state: OptimizerState, g: np.ndarray, lr: float, gamma1: float, gamma2: float,
         eta: float) -> tuple[np.ndarray, OptimizerState]:
    if kind == "elfpie":
        return adabelief_step(state, g, gamma1, gamma2, eta)
    return comparator_step(kind, state, g, lr, gamma1, gamma2, eta)
