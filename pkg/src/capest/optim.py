"""First-order ascent steps shared by the estimators.

Adam in the ascent direction, plus plain gradient ascent behind the same
interface. Box constraints on the channel parameter are enforced by
clipping after the step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelParam
from .errors import NumericError


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and hyperparameters of one Adam-driven run."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @staticmethod
    def init(dim: int, learning_rate: float, beta1: float = 0.9,
             beta2: float = 0.999, eps_hat: float = 1e-8) -> "AdamState":
        return AdamState(
            first_moment=np.zeros(dim),
            second_moment=np.zeros(dim),
            step_count=0,
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            eps_hat=eps_hat,
        )


def adam_direction(state: AdamState, gradient: np.ndarray) -> tuple[AdamState, np.ndarray]:
    """Advance the moments one step and return the bias-corrected ascent step."""
    gradient = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(gradient)):
        raise NumericError("non-finite gradient passed to Adam step")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * gradient**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    step = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps_hat)
    return replace(state, first_moment=m, second_moment=v, step_count=t), step


def adam_ascent_step(
    state: AdamState, theta: ChannelParam, gradient: np.ndarray
) -> tuple[AdamState, ChannelParam]:
    """One Adam ascent step on theta, clipped into its box."""
    state, step = adam_direction(state, gradient)
    return state, theta.with_values(theta.values + step)


def gradient_ascent_step(
    theta: ChannelParam, gradient: np.ndarray, learning_rate: float
) -> ChannelParam:
    """Plain projected gradient ascent (the config-switch alternative to Adam)."""
    gradient = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(gradient)):
        raise NumericError("non-finite gradient passed to gradient step")
    return theta.with_values(theta.values + learning_rate * gradient)
