"""Iterative estimators of the channel parameter from output-only data.

Three estimators share the same trace format:

- :func:`fit_bilevel` solves the inner capacity problem to tolerance every
  outer iteration and ascends the profiled likelihood
  ``L(theta, pi(theta))`` with the total gradient obtained by implicit
  differentiation of the BA fixed point.
- :func:`fit_al` never fully solves the inner problem: it applies a few BA
  map steps, penalizes the fixed-point residual with an augmented
  Lagrangian (multiplier + quadratic penalty) and ascends theta on the
  penalized objective, updating the multiplier each outer iteration.
- :func:`fit_joint_ml` is the unconstrained baseline: simultaneous ascent
  on theta and free input logits with no optimality condition on pi. It is
  subject to the mixture non-identifiability the constrained estimators
  avoid.

:func:`bec_closed_form` is the one-line erasure-channel MLE used as an
exact reference.

All estimators are deterministic given their inputs; BA map applications
are metered through :data:`capest.ba.map_calls` and reported per iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import ba
from .ba import InputDistribution
from .channel import ChannelModel, ChannelParam
from .errors import SingularSystemError
from .implicit import ba_jacobians, pi_sensitivity
from .likelihood import OutputHistogram, grad_pi, grad_theta, log_likelihood
from .optim import AdamState, adam_direction, gradient_ascent_step


@dataclass(frozen=True)
class EstimatorConfig:
    """Hyperparameters shared by the iterative estimators.

    ``inner_steps``, ``penalty_*`` and ``multiplier_init`` concern only the
    augmented Lagrangian path; ``step_rule`` selects Adam (default) or
    plain gradient ascent.
    """

    outer_iters: int = 2000
    ba_tol: float = 1e-10
    ba_max_iters: int = 2000
    inner_steps: int = 6
    penalty_init: float = 1.0
    penalty_growth: float = 2.0
    penalty_check_every: int = 5
    penalty_shrink_factor: float = 0.9
    multiplier_init: np.ndarray | None = None
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    stop_tol_theta: float = 1e-6
    stop_tol_residual: float = 1e-8
    ba_damping: float = 1.0
    step_rule: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be at least 1")
        if self.ba_tol <= 0.0:
            raise ValueError("ba_tol must be positive")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be at least 1")
        if self.penalty_init <= 0.0:
            raise ValueError("penalty_init must be positive")
        if self.penalty_growth < 1.0:
            raise ValueError("penalty_growth must be at least 1")
        if self.step_rule not in ("adam", "gd"):
            raise ValueError("step_rule must be 'adam' or 'gd'")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    theta: np.ndarray
    loglik_nats: float
    residual_l1: float
    ba_map_count: int
    wall_ms: float


@dataclass(frozen=True)
class RunTrace:
    """Per-iteration diagnostics and the final estimate of one run."""

    estimator: str
    records: tuple[TraceRecord, ...]
    theta_hat: np.ndarray
    pi_hat: np.ndarray
    converged: bool
    stop_reason: str
    total_ba_map_count: int
    final_loglik_nats: float
    final_residual_l1: float
    wall_ms_total: float


class _Stepper:
    """Adam or plain gradient ascent on a box-constrained parameter."""

    def __init__(self, cfg: EstimatorConfig, dim: int):
        self.cfg = cfg
        self.adam = AdamState.init(dim, cfg.learning_rate, cfg.beta1, cfg.beta2)

    def step(self, theta: ChannelParam, gradient: np.ndarray) -> ChannelParam:
        if self.cfg.step_rule == "adam":
            self.adam, step = adam_direction(self.adam, gradient)
            return theta.with_values(theta.values + step)
        return gradient_ascent_step(theta, gradient, self.cfg.learning_rate)

    def free_step(self, values: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        """Unconstrained variant used for the joint-ML logits."""
        if self.cfg.step_rule == "adam":
            self.adam, step = adam_direction(self.adam, gradient)
            return values + step
        return values + self.cfg.learning_rate * gradient


def _coerce_theta(model: ChannelModel, theta0) -> ChannelParam:
    if isinstance(theta0, ChannelParam):
        return theta0
    return model.make_param(np.atleast_1d(np.asarray(theta0, dtype=float)))


def _damped_map(pi: InputDistribution, w, damping: float) -> InputDistribution:
    mapped = ba.ba_map(pi, w)
    if damping >= 1.0:
        return mapped
    return InputDistribution((1.0 - damping) * pi.probs + damping * mapped.probs)


def fit_bilevel(
    hist: OutputHistogram, model: ChannelModel, theta0, cfg: EstimatorConfig
) -> RunTrace:
    """Bilevel fixed-point estimator (inner BA solve + implicit gradient).

    Each outer iteration solves the capacity problem at the current theta
    (warm-started from the previous input distribution), forms the total
    likelihood gradient through the fixed-point sensitivity and takes one
    ascent step on theta. Stops when the theta step falls below
    ``stop_tol_theta``. On exit the input distribution is refreshed by one
    final BA solve at the returned theta so ``pi_hat`` is the capacity
    input of ``theta_hat``.
    """
    theta = _coerce_theta(model, theta0)
    pi = InputDistribution.uniform(model.n_inputs)
    stepper = _Stepper(cfg, theta.dim)
    count0 = ba.map_calls.value()
    t_start = time.perf_counter()

    records: list[TraceRecord] = []
    converged = False
    stop_reason = "max_iterations"
    for k in range(cfg.outer_iters):
        w = model.matrix_at(theta)
        solve = ba.ba_solve(w, pi, tol=cfg.ba_tol, max_iters=cfg.ba_max_iters,
                            damping=cfg.ba_damping)
        pi = solve.pi_star
        jac = ba_jacobians(model, theta, pi, require_fixed_point=False)
        try:
            sens = pi_sensitivity(jac)
        except SingularSystemError as err:
            raise SingularSystemError(
                f"outer iteration {k}: {err}", err.condition_estimate
            ) from err
        g_theta = grad_theta(hist, pi, model, theta)
        g_pi = grad_pi(hist, pi, w)
        total_grad = g_theta + sens.d_pi_d_theta.T @ g_pi
        loglik = log_likelihood(hist, pi, w).loglik_nats
        records.append(TraceRecord(
            iteration=k,
            theta=theta.values.copy(),
            loglik_nats=loglik,
            residual_l1=solve.residual_l1,
            ba_map_count=ba.map_calls.value() - count0,
            wall_ms=(time.perf_counter() - t_start) * 1e3,
        ))
        new_theta = stepper.step(theta, total_grad)
        delta = float(np.max(np.abs(new_theta.values - theta.values)))
        theta = new_theta
        if delta <= cfg.stop_tol_theta:
            converged = True
            stop_reason = "theta_step"
            break

    final_solve = ba.ba_solve(model.matrix_at(theta), pi, tol=cfg.ba_tol,
                              max_iters=cfg.ba_max_iters, damping=cfg.ba_damping)
    pi = final_solve.pi_star
    final_loglik = log_likelihood(hist, pi, model.matrix_at(theta)).loglik_nats
    return RunTrace(
        estimator="bilevel",
        records=tuple(records),
        theta_hat=theta.values.copy(),
        pi_hat=pi.probs.copy(),
        converged=converged,
        stop_reason=stop_reason,
        total_ba_map_count=ba.map_calls.value() - count0,
        final_loglik_nats=final_loglik,
        final_residual_l1=final_solve.residual_l1,
        wall_ms_total=(time.perf_counter() - t_start) * 1e3,
    )


def fit_al(
    hist: OutputHistogram, model: ChannelModel, theta0, cfg: EstimatorConfig
) -> RunTrace:
    """Augmented Lagrangian estimator (partial BA steps + soft constraint).

    Each outer iteration applies ``inner_steps`` BA map steps, measures the
    fixed-point residual R, ascends theta on the penalized gradient
    ``grad L - (mu + rho R)^T d_b/d_theta`` and updates the multiplier
    ``mu += rho R``. The penalty grows by ``penalty_growth`` whenever the
    residual has not shrunk by ``penalty_shrink_factor`` since the last
    check (every ``penalty_check_every`` iterations). Stops when the
    residual and the theta step are both below their tolerances.
    """
    theta = _coerce_theta(model, theta0)
    pi = InputDistribution.uniform(model.n_inputs)
    mu = (np.zeros(model.n_inputs) if cfg.multiplier_init is None
          else np.asarray(cfg.multiplier_init, dtype=float).copy())
    if mu.shape != (model.n_inputs,):
        raise ValueError("multiplier_init must have one entry per input symbol")
    rho = cfg.penalty_init
    stepper = _Stepper(cfg, theta.dim)
    count0 = ba.map_calls.value()
    t_start = time.perf_counter()

    records: list[TraceRecord] = []
    converged = False
    stop_reason = "max_iterations"
    res_at_last_check = np.inf
    for k in range(cfg.outer_iters):
        w = model.matrix_at(theta)
        for _ in range(cfg.inner_steps):
            pi = _damped_map(pi, w, cfg.ba_damping)
        r_vec = ba.residual(pi, w)
        res_l1 = float(np.abs(r_vec).sum())
        jac = ba_jacobians(model, theta, pi, require_fixed_point=False)
        g_theta = grad_theta(hist, pi, model, theta)
        al_grad = g_theta - (mu + rho * r_vec) @ jac.d_b_d_theta
        loglik = log_likelihood(hist, pi, w).loglik_nats
        records.append(TraceRecord(
            iteration=k,
            theta=theta.values.copy(),
            loglik_nats=loglik,
            residual_l1=res_l1,
            ba_map_count=ba.map_calls.value() - count0,
            wall_ms=(time.perf_counter() - t_start) * 1e3,
        ))
        new_theta = stepper.step(theta, al_grad)
        delta = float(np.max(np.abs(new_theta.values - theta.values)))
        theta = new_theta
        mu = mu + rho * r_vec
        if (k + 1) % cfg.penalty_check_every == 0:
            if res_l1 > cfg.penalty_shrink_factor * res_at_last_check:
                rho *= cfg.penalty_growth
            res_at_last_check = res_l1
        if res_l1 <= cfg.stop_tol_residual and delta <= cfg.stop_tol_theta:
            converged = True
            stop_reason = "residual_and_theta_step"
            break

    final_res = float(np.abs(ba.residual(pi, model.matrix_at(theta))).sum())
    final_loglik = log_likelihood(hist, pi, model.matrix_at(theta)).loglik_nats
    return RunTrace(
        estimator="al",
        records=tuple(records),
        theta_hat=theta.values.copy(),
        pi_hat=pi.probs.copy(),
        converged=converged,
        stop_reason=stop_reason,
        total_ba_map_count=ba.map_calls.value() - count0,
        final_loglik_nats=final_loglik,
        final_residual_l1=final_res,
        wall_ms_total=(time.perf_counter() - t_start) * 1e3,
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def fit_joint_ml(
    hist: OutputHistogram,
    model: ChannelModel,
    theta0,
    pi0_logits_seed: int,
    cfg: EstimatorConfig,
) -> RunTrace:
    """Unconstrained joint maximum likelihood over (theta, pi).

    The input distribution is parameterized as a softmax of free logits
    (initialized from standard normal draws of ``pi0_logits_seed``), so the
    ascent is smooth and unconstrained apart from the theta box. No
    capacity condition is enforced; the fixed-point residual is recorded
    for reporting only. Stops when the theta step and the L1 change of pi
    are both below ``stop_tol_theta``.
    """
    from .sampling import normal_draws

    theta = _coerce_theta(model, theta0)
    z = normal_draws(pi0_logits_seed, 0, model.n_inputs)
    theta_stepper = _Stepper(cfg, theta.dim)
    z_stepper = _Stepper(cfg, model.n_inputs)
    count0 = ba.map_calls.value()
    t_start = time.perf_counter()

    records: list[TraceRecord] = []
    converged = False
    stop_reason = "max_iterations"
    pi = InputDistribution(_softmax(z))
    for k in range(cfg.outer_iters):
        w = model.matrix_at(theta)
        res_l1 = float(np.abs(ba.residual(pi, w)).sum())
        g_theta = grad_theta(hist, pi, model, theta)
        g_pi = grad_pi(hist, pi, w)
        # Chain rule through the softmax: dL/dz_j = pi_j (g_j - g . pi).
        g_z = pi.probs * (g_pi - g_pi @ pi.probs)
        loglik = log_likelihood(hist, pi, w).loglik_nats
        records.append(TraceRecord(
            iteration=k,
            theta=theta.values.copy(),
            loglik_nats=loglik,
            residual_l1=res_l1,
            ba_map_count=ba.map_calls.value() - count0,
            wall_ms=(time.perf_counter() - t_start) * 1e3,
        ))
        new_theta = theta_stepper.step(theta, g_theta)
        z = z_stepper.free_step(z, g_z)
        new_pi = InputDistribution(_softmax(z))
        delta_theta = float(np.max(np.abs(new_theta.values - theta.values)))
        delta_pi = float(np.abs(new_pi.probs - pi.probs).sum())
        theta, pi = new_theta, new_pi
        if delta_theta <= cfg.stop_tol_theta and delta_pi <= cfg.stop_tol_theta:
            converged = True
            stop_reason = "theta_and_pi_step"
            break

    final_res = float(np.abs(ba.residual(pi, model.matrix_at(theta))).sum())
    final_loglik = log_likelihood(hist, pi, model.matrix_at(theta)).loglik_nats
    return RunTrace(
        estimator="joint_ml",
        records=tuple(records),
        theta_hat=theta.values.copy(),
        pi_hat=pi.probs.copy(),
        converged=converged,
        stop_reason=stop_reason,
        total_ba_map_count=ba.map_calls.value() - count0,
        final_loglik_nats=final_loglik,
        final_residual_l1=final_res,
        wall_ms_total=(time.perf_counter() - t_start) * 1e3,
    )


def bec_closed_form(hist: OutputHistogram) -> tuple[float, float]:
    """Erasure-channel MLE: theta_hat = erasure fraction, capacity 1 - theta_hat.

    The histogram must be over the erasure channel's three outputs ordered
    (0, ?, 1).
    """
    if hist.n_outputs != 3:
        raise ValueError("erasure-channel histogram must have exactly 3 output symbols")
    theta_hat = float(hist.counts[1] / hist.total)
    return theta_hat, 1.0 - theta_hat
