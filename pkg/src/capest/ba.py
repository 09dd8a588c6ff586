"""Blahut-Arimoto fixed-point map, capacity solver and diagnostics.

The map sends an input distribution pi to

    r_t  = sum_i pi_i W[i, t]            (output marginal)
    s_i  = sum_t W[i, t] ln(W[i, t] / r_t)
    b_i  = pi_i exp(s_i) / sum_j pi_j exp(s_j)

using natural logs internally; information quantities are reported in bits.
Fixed points of the map are exactly the input distributions achieving
capacity for the given matrix, which is what lets downstream estimators use
``b(pi) - pi = 0`` as an optimality condition.

Zero entries of pi are absorbing (the map never revives them) and terms
with W[i, t] = 0 contribute nothing (0 log 0 := 0).

Every application of the map increments a per-thread counter,
:data:`map_calls`; iterative estimators report their cost as counter
deltas, which is the portable efficiency proxy used by the experiment
runner.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix
from .errors import NumericError

LN2 = np.log(2.0)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 2000


class MapCallCounter:
    """Per-thread monotone counter of BA map applications.

    Each thread sees its own count, so concurrent runs (one run per thread)
    can meter themselves with ``value()`` deltas without locking against
    each other.
    """

    def __init__(self):
        self._local = threading.local()

    def add(self, n: int = 1) -> None:
        self._local.count = getattr(self._local, "count", 0) + n

    def value(self) -> int:
        return getattr(self._local, "count", 0)


map_calls = MapCallCounter()


@dataclass(frozen=True)
class InputDistribution:
    """A point on the probability simplex over the input alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1:
            raise ValueError("input distribution must be a 1-d vector")
        if np.any(probs < 0.0):
            raise ValueError("input distribution entries must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"input distribution must sum to 1, got {probs.sum()!r}")
        object.__setattr__(self, "probs", probs)
        probs.setflags(write=False)

    @staticmethod
    def uniform(n: int) -> "InputDistribution":
        return InputDistribution(np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class BaSolveResult:
    pi_star: InputDistribution
    capacity_bits: float
    iterations: int
    residual_l1: float
    converged: bool


def _check_dims(pi: np.ndarray, w: np.ndarray) -> None:
    if pi.shape[0] != w.shape[0]:
        raise ValueError(
            f"input distribution has {pi.shape[0]} entries but channel has {w.shape[0]} inputs"
        )


def _row_scores(pi: np.ndarray, w: np.ndarray) -> np.ndarray:
    """s_i = sum_t W[i,t] ln(W[i,t]/r_t) in nats, on the support of pi.

    Off-support rows are returned as 0; callers must not use them (they can
    be genuinely infinite when the support's marginal misses an output).
    """
    r = pi @ w
    support = pi > 0.0
    pos = w > 0.0
    # An output with zero marginal cannot carry mass from any supported input.
    assert not np.any(pos[support][:, r <= 0.0]), "zero output marginal with contributing input"
    log_w = np.zeros_like(w)
    np.log(w, out=log_w, where=pos)
    log_r = np.zeros_like(r)
    np.log(r, out=log_r, where=r > 0.0)
    terms = np.zeros_like(w)
    np.subtract(log_w, log_r[None, :], out=terms, where=pos)
    s = (w * terms).sum(axis=1)
    s[~support] = 0.0
    return s


def _ba_map_raw(pi: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One BA update on raw arrays; counts as one map application."""
    _check_dims(pi, w)
    support = pi > 0.0
    s = _row_scores(pi, w)
    log_unnorm = np.full_like(pi, -np.inf)
    log_unnorm[support] = np.log(pi[support]) + s[support]
    log_unnorm -= log_unnorm.max()
    unnorm = np.exp(log_unnorm)
    out = unnorm / unnorm.sum()
    map_calls.add()
    return out


def ba_map(pi: InputDistribution, w: ChannelMatrix) -> InputDistribution:
    """One application of the BA fixed-point map b(pi, W)."""
    return InputDistribution(_ba_map_raw(pi.probs, w.entries))


def mutual_information_bits(pi: InputDistribution, w: ChannelMatrix) -> float:
    """I(X; Y) in bits for input distribution pi over channel W."""
    p = pi.probs
    _check_dims(p, w.entries)
    s = _row_scores(p, w.entries)
    return float((p * s).sum() / LN2)


def residual(pi: InputDistribution, w: ChannelMatrix) -> np.ndarray:
    """Fixed-point residual b(pi, W) - pi; zero exactly at capacity-achieving pi."""
    return _ba_map_raw(pi.probs, w.entries) - pi.probs


def ba_solve(
    w: ChannelMatrix,
    pi0: InputDistribution | None = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    damping: float = 1.0,
) -> BaSolveResult:
    """Iterate the BA map until the L1 fixed-point residual falls below tol.

    Parameters
    ----------
    w : ChannelMatrix
        Channel to solve.
    pi0 : InputDistribution, optional
        Strictly positive starting point; defaults to uniform.
    tol : float
        L1 residual threshold (must be > 0).
    max_iters : int
        Cap on map applications; the result is flagged unconverged when hit.
    damping : float
        Step factor in (0, 1]; 1 is the plain undamped map, smaller values
        move only part of the way toward b(pi) each iteration.

    Returns
    -------
    BaSolveResult
        ``pi_star`` satisfies ``||b(pi_star) - pi_star||_1 <= tol`` when
        ``converged`` is set; ``capacity_bits`` is the mutual information at
        ``pi_star``; ``iterations`` counts map applications consumed.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must be in (0, 1]")
    n = w.n_inputs
    pi = pi0.probs if pi0 is not None else np.full(n, 1.0 / n)
    if pi0 is not None and np.any(pi <= 0.0):
        raise ValueError("ba_solve requires a strictly positive starting point")
    _check_dims(pi, w.entries)

    # pi_star is always the point at which residual_l1 was measured, so the
    # convergence contract ||b(pi_star) - pi_star||_1 <= tol holds exactly.
    iterations = 0
    res_l1 = np.inf
    converged = False
    for k in range(1, max_iters + 1):
        mapped = _ba_map_raw(pi, w.entries)
        iterations = k
        if not np.all(np.isfinite(mapped)):
            raise NumericError(f"non-finite BA iterate at iteration {k}", iteration=k)
        res_l1 = float(np.abs(mapped - pi).sum())
        if res_l1 <= tol:
            converged = True
            break
        if k < max_iters:
            pi = mapped if damping >= 1.0 else (1.0 - damping) * pi + damping * mapped

    pi_star = InputDistribution(pi)
    if np.count_nonzero(pi) < n:
        warnings.warn(
            "BA fixed point has reduced support; sensitivities are restricted to it",
            RuntimeWarning,
            stacklevel=2,
        )
    capacity = mutual_information_bits(pi_star, w)
    return BaSolveResult(
        pi_star=pi_star,
        capacity_bits=capacity,
        iterations=iterations,
        residual_l1=res_l1,
        converged=converged,
    )
