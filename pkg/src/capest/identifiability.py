"""Output-distribution sensitivity, Fisher information and identifiability.

All diagnostics are evaluated at a given pair (theta, pi): the output
marginal is ``q = pi @ W(theta)`` and its parameter sensitivity is the
M x d Jacobian ``J[t, k] = sum_i pi_i dW_k[i, t]`` with pi held fixed.
Holding pi fixed is the point: a transmitter pinned to the
capacity-achieving input can erase all parameter information from the
output (binary symmetric channel at uniform input being the canonical
case), which is exactly what a zero Jacobian certifies.

Fisher information uses the score outer-product form
``F = sum_t q_t (d ln q_t)(d ln q_t)^T`` (positive semidefinite by
construction; outputs with zero probability are skipped). The
Cramer-Rao bound is its inverse when it exists; the verdict classifies the
smallest eigenvalue against ``SINGULAR_TOL`` and ``WEAK_TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ba
from .ba import InputDistribution
from .channel import ChannelModel

SINGULAR_TOL = 1e-10
WEAK_TOL = 1e-4

IDENTIFIABLE = "identifiable"
NON_IDENTIFIABLE = "non_identifiable"
WEAKLY_IDENTIFIABLE = "weakly_identifiable"


@dataclass(frozen=True)
class FisherReport:
    """Identifiability diagnostics at one (theta, pi) point.

    ``crlb`` is None when the Fisher matrix is singular at the working
    tolerance (the bound is infinite); ``jacobian_norm`` is the entrywise
    sup norm of the output Jacobian.
    """

    output_jacobian: np.ndarray
    fisher: np.ndarray
    crlb: np.ndarray | None
    identifiable: str
    jacobian_norm: float

    def to_dict(self) -> dict:
        return {
            "output_jacobian": self.output_jacobian.tolist(),
            "fisher": self.fisher.tolist(),
            "crlb": "infinite" if self.crlb is None else self.crlb.tolist(),
            "identifiable": self.identifiable,
            "jacobian_norm": self.jacobian_norm,
        }


def output_jacobian(
    model: ChannelModel, theta, pi: InputDistribution, d_pi_d_theta: np.ndarray | None = None
) -> np.ndarray:
    """M x d Jacobian of the output marginal in theta, pi held fixed.

    Pass ``d_pi_d_theta`` (N x d) to add the input-shift term
    ``W^T d_pi_d_theta`` and get the total derivative of q along the
    capacity-achieving path instead.
    """
    d_w = model.d_matrix_d_theta(theta)
    p = pi.probs
    jac = np.column_stack([p @ dw_k for dw_k in d_w])
    if d_pi_d_theta is not None:
        w = model.matrix_at(theta).entries
        jac = jac + w.T @ d_pi_d_theta
    return jac


def fisher_information(
    model: ChannelModel, theta, pi: InputDistribution, d_pi_d_theta: np.ndarray | None = None
) -> np.ndarray:
    """Score outer-product Fisher matrix of the output distribution.

    ``F = sum_t q_t * score_t score_t^T`` with ``score_t = J[t] / q_t``;
    outputs with zero probability are skipped.
    """
    q = pi.probs @ model.matrix_at(theta).entries
    jac = output_jacobian(model, theta, pi, d_pi_d_theta)
    pos = q > 0.0
    scaled = jac[pos] / q[pos, None]
    fisher = (jac[pos].T @ scaled)
    return 0.5 * (fisher + fisher.T)


def crlb_and_verdict(
    fisher: np.ndarray,
    singular_tol: float = SINGULAR_TOL,
    weak_tol: float = WEAK_TOL,
) -> tuple[np.ndarray | None, str]:
    """Invert the Fisher matrix when possible and classify identifiability."""
    min_eig = float(np.linalg.eigvalsh(fisher)[0])
    if min_eig <= singular_tol:
        return None, NON_IDENTIFIABLE
    crlb = np.linalg.inv(fisher)
    verdict = WEAKLY_IDENTIFIABLE if min_eig <= weak_tol else IDENTIFIABLE
    return crlb, verdict


def fisher_report(
    model: ChannelModel,
    theta,
    pi: InputDistribution | None = None,
    total_derivative: bool = False,
    singular_tol: float = SINGULAR_TOL,
    weak_tol: float = WEAK_TOL,
) -> FisherReport:
    """Assemble the full report; pi defaults to the BA solution at theta.

    ``total_derivative=True`` chains the input-distribution shift
    d_pi/d_theta through the diagnostics (computed via the implicit
    fixed-point sensitivity), instead of holding pi fixed.
    """
    if pi is None:
        pi = ba.ba_solve(model.matrix_at(theta)).pi_star
    d_pi = None
    if total_derivative:
        from .implicit import ba_jacobians, pi_sensitivity

        d_pi = pi_sensitivity(ba_jacobians(model, theta, pi)).d_pi_d_theta
    jac = output_jacobian(model, theta, pi, d_pi)
    fisher = fisher_information(model, theta, pi, d_pi)
    crlb, verdict = crlb_and_verdict(fisher, singular_tol, weak_tol)
    return FisherReport(
        output_jacobian=jac,
        fisher=fisher,
        crlb=crlb,
        identifiable=verdict,
        jacobian_norm=float(np.max(np.abs(jac))) if jac.size else 0.0,
    )
