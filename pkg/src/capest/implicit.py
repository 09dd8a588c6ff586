"""Differentiation through the BA fixed point.

With ``b`` the BA map and ``R(theta, pi) = b(theta, pi) - pi`` the
fixed-point residual, differentiating ``R(theta, pi(theta)) = 0`` gives the
sensitivity of the capacity-achieving input to the channel parameter:

    d_pi/d_theta = (I - d_b/d_pi)^{-1} d_b/d_theta

solved on the support of pi (coordinates with zero mass have zero
sensitivity, and including them can make the system structurally singular
when the fixed point sits on the simplex boundary).

The Jacobians of ``b_i = pi_i exp(s_i) / Z`` are assembled from

    d_s_i/d_pi_j   = -sum_t W[i,t] W[j,t] / r_t
    d_s_i/d_theta  = sum_t dW[i,t] (ln(W[i,t]/r_t) + 1) - sum_t W[i,t] dr_t / r_t

with ``r = pi @ W`` and ``dr = pi @ dW``; everything here is analytic, the
finite-difference versions live in the tests as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ba import InputDistribution
from .channel import ChannelModel
from .errors import SingularSystemError

SUPPORT_TOL = 1e-12
FIXED_POINT_TOL = 1e-6
SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class BaJacobians:
    """Jacobians of the BA map at a point (theta, pi).

    ``d_b_d_pi`` is N x N, ``d_b_d_theta`` is N x d, ``support`` holds the
    indices of pi entries above the support threshold. Because b maps into
    the simplex, columns of both Jacobians sum to (numerically) zero.
    """

    d_b_d_pi: np.ndarray
    d_b_d_theta: np.ndarray
    support: np.ndarray


@dataclass(frozen=True)
class PiSensitivity:
    """d pi(theta) / d theta (N x d), zero off the support, plus the
    condition estimate of the solved system."""

    d_pi_d_theta: np.ndarray
    condition_estimate: float


def ba_jacobians(
    model: ChannelModel,
    theta,
    pi: InputDistribution,
    require_fixed_point: bool = True,
    support_tol: float = SUPPORT_TOL,
) -> BaJacobians:
    """Analytic Jacobians of the BA map in pi and theta.

    By default pi must be a BA fixed point (L1 residual below
    ``FIXED_POINT_TOL``), which is where the sensitivity formula is valid;
    pass ``require_fixed_point=False`` to evaluate elsewhere (the augmented
    Lagrangian path differentiates the map at non-converged pi on purpose).
    """
    w = model.matrix_at(theta).entries
    d_w = model.d_matrix_d_theta(theta)
    p = pi.probs
    if p.shape[0] != w.shape[0]:
        raise ValueError("input distribution length must match channel inputs")

    n = p.shape[0]
    d = len(d_w)
    r = p @ w
    pos = w > 0.0
    r_pos = r > 0.0
    inv_r = np.zeros_like(r)
    inv_r[r_pos] = 1.0 / r[r_pos]

    # Row scores s_i and their shifted exponentials (shift-invariant ratios).
    log_w = np.zeros_like(w)
    np.log(w, out=log_w, where=pos)
    log_r = np.zeros_like(r)
    np.log(r, out=log_r, where=r_pos)
    log_ratio = np.zeros_like(w)
    np.subtract(log_w, log_r[None, :], out=log_ratio, where=pos)
    s = (w * log_ratio).sum(axis=1)
    e = np.exp(s - s.max())
    u = p * e
    z = u.sum()
    b = u / z

    if require_fixed_point:
        res = float(np.abs(b - p).sum())
        if res > FIXED_POINT_TOL:
            raise ValueError(
                f"pi is not a BA fixed point (residual {res:.3e} > {FIXED_POINT_TOL:g}); "
                "pass require_fixed_point=False to differentiate the map elsewhere"
            )

    # d_s[i, j] = -sum_t W[i,t] W[j,t] / r_t  (symmetric)
    d_s_d_pi = -(w * inv_r[None, :]) @ w.T

    # d_b/d_pi[i, j] = (e_i delta_ij + u_i d_s[i,j]) / Z - b_i g_j
    du = np.diag(e) + u[:, None] * d_s_d_pi
    g = du.sum(axis=0) / z
    d_b_d_pi = du / z - np.outer(b, g)

    # d_s/d_theta_k, then d_b/d_theta[i, k] = b_i (H[i,k] - sum_j b_j H[j,k])
    h = np.empty((n, d))
    for k, dw_k in enumerate(d_w):
        dr_k = p @ dw_k
        term1 = (dw_k * (log_ratio + 1.0) * pos).sum(axis=1)
        term2 = (w * (dr_k * inv_r)[None, :]).sum(axis=1)
        h[:, k] = term1 - term2
    d_b_d_theta = b[:, None] * (h - b @ h)

    support = np.flatnonzero(p > support_tol)
    return BaJacobians(d_b_d_pi=d_b_d_pi, d_b_d_theta=d_b_d_theta, support=support)


def pi_sensitivity(jac: BaJacobians, singular_tol: float = SINGULAR_TOL) -> PiSensitivity:
    """Solve ``(I - d_b/d_pi) x = d_b/d_theta`` on the support set.

    Off-support rows of the result are zero. Raises
    :class:`SingularSystemError` when the restricted system's smallest
    singular value is at or below ``singular_tol`` (the fixed point's
    invertibility assumption fails there).
    """
    s_idx = jac.support
    n, d = jac.d_b_d_theta.shape
    a = np.eye(len(s_idx)) - jac.d_b_d_pi[np.ix_(s_idx, s_idx)]
    sing = np.linalg.svd(a, compute_uv=False)
    smallest = float(sing[-1])
    condition = float(sing[0] / sing[-1]) if smallest > 0.0 else float("inf")
    if smallest <= singular_tol:
        raise SingularSystemError(
            f"fixed-point sensitivity system is singular "
            f"(smallest singular value {smallest:.3e}, condition {condition:.3e})",
            condition_estimate=condition,
        )
    solution = np.linalg.solve(a, jac.d_b_d_theta[s_idx])
    full = np.zeros((n, d))
    full[s_idx] = solution
    return PiSensitivity(d_pi_d_theta=full, condition_estimate=condition)
