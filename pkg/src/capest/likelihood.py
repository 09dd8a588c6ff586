"""Output data container and the marginal log-likelihood with its gradients.

Observations are i.i.d. channel outputs, so per-symbol counts are a
sufficient statistic: the log-likelihood of T raw samples equals
``sum_t counts_t * ln(q_t)`` with ``q = pi @ W`` the model's output
marginal. Working on counts makes every likelihood and gradient evaluation
O(N*M) regardless of sample size.

Counts may be real-valued: the noise-free "population" histogram
``counts = T * q`` is accepted everywhere and is handy for
infinite-sample checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ba import InputDistribution
from .channel import ChannelMatrix, ChannelModel
from .errors import ImpossibleDataError


@dataclass(frozen=True)
class OutputHistogram:
    """Counts of each output symbol, aligned with the channel's output order."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 1:
            raise ValueError("histogram counts must be a 1-d vector")
        if np.any(counts < 0.0):
            raise ValueError("histogram counts must be nonnegative")
        if counts.sum() <= 0.0:
            raise ValueError("histogram must contain at least one observation")
        object.__setattr__(self, "counts", counts)
        counts.setflags(write=False)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def n_outputs(self) -> int:
        return self.counts.shape[0]

    def to_list(self) -> list[float]:
        """JSON-friendly list of counts."""
        return [float(c) for c in self.counts]

    @staticmethod
    def from_list(counts) -> "OutputHistogram":
        return OutputHistogram(np.asarray(counts, dtype=float))


@dataclass(frozen=True)
class LikelihoodValue:
    """Marginal log-likelihood in nats plus the model output marginal.

    ``impossible`` is set (and ``loglik_nats`` is -inf) when some observed
    symbol has zero probability under the model.
    """

    loglik_nats: float
    output_marginal: np.ndarray
    impossible: bool = False


def _marginal(pi: np.ndarray, w: np.ndarray, n_counts: int) -> np.ndarray:
    if pi.shape[0] != w.shape[0]:
        raise ValueError("input distribution length must match channel inputs")
    if w.shape[1] != n_counts:
        raise ValueError("histogram length must match channel outputs")
    return pi @ w


def log_likelihood(
    hist: OutputHistogram, pi: InputDistribution, w: ChannelMatrix
) -> LikelihoodValue:
    """L(theta, pi) = sum_t counts_t ln(q_t), q = pi @ W, in nats.

    Terms with zero count contribute 0 even when q_t = 0; an observed
    symbol with q_t = 0 makes the data impossible under the model and the
    value -inf, flagged rather than raised.
    """
    c = hist.counts
    q = _marginal(pi.probs, w.entries, c.shape[0])
    observed = c > 0.0
    if np.any(q[observed] <= 0.0):
        return LikelihoodValue(float("-inf"), q, impossible=True)
    value = float(c[observed] @ np.log(q[observed]))
    return LikelihoodValue(value, q, impossible=False)


def grad_theta(
    hist: OutputHistogram, pi: InputDistribution, model: ChannelModel, theta
) -> np.ndarray:
    """Gradient of the log-likelihood in theta (nats per unit theta).

    Component k is ``sum_t counts_t (pi @ dW_k)_t / q_t``.
    """
    c = hist.counts
    w = model.matrix_at(theta).entries
    q = _marginal(pi.probs, w, c.shape[0])
    observed = c > 0.0
    if np.any(q[observed] <= 0.0):
        raise ImpossibleDataError("observed symbol has zero model probability")
    weights = np.zeros_like(c)
    weights[observed] = c[observed] / q[observed]
    d_w = model.d_matrix_d_theta(theta)
    return np.array([float(weights @ (pi.probs @ dw_k)) for dw_k in d_w])


def grad_pi(hist: OutputHistogram, pi: InputDistribution, w: ChannelMatrix) -> np.ndarray:
    """Unconstrained gradient of the log-likelihood in pi.

    Component i is ``sum_t counts_t W[i, t] / q_t``; any simplex handling
    (projection, reparameterization) is the caller's concern.
    """
    c = hist.counts
    entries = w.entries
    q = _marginal(pi.probs, entries, c.shape[0])
    observed = c > 0.0
    if np.any(q[observed] <= 0.0):
        raise ImpossibleDataError("observed symbol has zero model probability")
    weights = np.zeros_like(c)
    weights[observed] = c[observed] / q[observed]
    return entries @ weights
