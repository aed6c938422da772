"""
Post-estimation quantities: factor estimates, covariance of beta-hat and
first-order-condition residuals.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from numpy.typing import NDArray
from typing_extensions import Literal

from .exceptions import SingularMatrixError
from .panel import ModelVariant, Moments, PanelDataset, SigmaZzFactor, Theta, demean_panel, symmetrize

logger = logging.getLogger(__name__)

DataLike = Union[PanelDataset, Moments]


@dataclass
class CovarianceEstimate:
    """
    Estimated limiting precision of sqrt(NT)(beta_hat - beta).

    Attributes:
        omega_hat: K x K precision matrix
        se_beta: Standard errors sqrt(diag(omega_hat^{-1}) / NT)
        method: "trace_form" or "moment_form"
        n_obs: NT used for scaling
    """

    omega_hat: NDArray
    se_beta: NDArray
    method: Literal["trace_form", "moment_form"]
    n_obs: int

    @property
    def covariance(self) -> NDArray:
        return np.linalg.inv(self.omega_hat) / self.n_obs


def _as_moments(data: DataLike) -> Moments:
    if isinstance(data, Moments):
        return data
    # the dense copy is not needed here
    return demean_panel(data, dense_cap=0)


def _finish(omega: NDArray, n_obs: int, method: str) -> CovarianceEstimate:
    omega = symmetrize(omega)
    eigvals = np.linalg.eigvalsh(omega)
    if eigvals.size and eigvals[0] <= 0:
        raise SingularMatrixError(
            f"{method} precision matrix is not positive definite "
            f"(smallest eigenvalue {eigvals[0]:.3e})",
            smallest_eigenvalue=float(eigvals[0]),
        )
    se = np.sqrt(np.diag(np.linalg.inv(omega)) / n_obs) if eigvals.size else np.zeros(0)
    return CovarianceEstimate(omega_hat=omega, se_beta=se, method=method, n_obs=n_obs)


def estimate_factors(theta_hat: Theta, data: DataLike) -> NDArray:
    """
    GLS factor estimates.

    f_t = (sum_i Gamma_i Sigma_ii^{-1} Gamma_i')^{-1} sum_i Gamma_i Sigma_ii^{-1} B zdot_it,
    returned as a T x r matrix.
    """
    moments = _as_moments(data)
    r = theta_hat.n_factors
    if r == 0:
        return np.zeros((moments.n_periods, 0))
    bz = moments.transformed(theta_hat.beta)
    a = np.einsum("iab,ibr->iar", theta_hat.sigma.inverse_blocks(), theta_hat.gamma)
    gram = symmetrize(np.einsum("iar,ias->rs", theta_hat.gamma, a))
    rank = int(np.linalg.matrix_rank(gram))
    if rank < r:
        raise SingularMatrixError(
            f"loading Gram matrix has rank {rank} < r={r}; factors are not identified", rank=rank
        )
    return np.linalg.solve(gram, np.einsum("iat,iar->rt", bz, a)).T


def covariance_trace_form(
    theta_hat: Theta,
    data: DataLike,
    f_hat: NDArray,
    g_cols: Optional[Sequence[int]] = None,
    extra_basis: Optional[NDArray] = None,
) -> CovarianceEstimate:
    """
    Trace-form precision matrix for beta-hat.

    Entry (p, q) is (1/NT) tr[Mdd X_p M(basis) X_q'] where X_k is the N x T demeaned
    regressor, Mdd = S^{-1} - S^{-1} L (L' S^{-1} L)^{-1} L' S^{-1} with S the diagonal of
    y-equation variances and L the nonzero y-equation loading columns, and the basis is
    (1_T, F_hat[:, g_cols], extra_basis).

    Args:
        theta_hat: Fitted parameters
        data: Panel or its demeaned moments
        f_hat: Estimated factors, T x r
        g_cols: Factor columns projected out along time (all by default)
        extra_basis: Additional T x q time-series basis, e.g. observed common regressors
    """
    moments = _as_moments(data)
    n, t, k = moments.n_units, moments.n_periods, moments.n_regressors
    f_hat = np.asarray(f_hat, dtype=float).reshape(t, -1)
    if g_cols is None:
        g_cols = range(f_hat.shape[1])
    x = moments.zdot[:, 1:, :]  # N x K x T

    lam = theta_hat.lambda_y
    lam = lam[:, ~np.all(lam == 0.0, axis=0)]
    w = 1.0 / theta_hat.sigma.sigma_e
    wl = w[:, None] * lam
    if lam.shape[1]:
        gram = symmetrize(lam.T @ wl)
        rank = int(np.linalg.matrix_rank(gram))
        if rank < lam.shape[1]:
            raise SingularMatrixError(
                f"Lambda' Sigma_ee^-1 Lambda has rank {rank} < {lam.shape[1]}", rank=rank
            )

    columns = [np.ones((t, 1)), f_hat[:, list(g_cols)]]
    if extra_basis is not None:
        columns.append(np.asarray(extra_basis, dtype=float).reshape(t, -1))
    q_basis = scipy.linalg.orth(np.hstack(columns))

    x_time = x - np.einsum("ikq,sq->iks", np.einsum("ikt,tq->ikq", x, q_basis), q_basis)
    x_cross = w[:, None, None] * x
    if lam.shape[1]:
        rhs = np.einsum("ir,ikt->rkt", wl, x)
        coef = np.linalg.solve(gram, rhs.reshape(rhs.shape[0], -1)).reshape(rhs.shape)
        x_cross = x_cross - np.einsum("ir,rkt->ikt", wl, coef)

    omega = np.einsum("ipt,iqt->pq", x_cross, x_time) / (n * t)
    return _finish(omega, n * t, "trace_form")


def covariance_moment_form(theta_hat: Theta, n_periods: int) -> CovarianceEstimate:
    """
    Moment-form precision for the basic model: Omega = (1/N) sum_i Sigma_ix / sigma_ie.

    ``n_periods`` is needed only to scale the standard errors.
    """
    sigma = theta_hat.sigma
    omega = np.einsum("i,ipq->pq", 1.0 / sigma.sigma_e, sigma.sigma_x) / sigma.n_units
    return _finish(omega, sigma.n_units * n_periods, "moment_form")


def foc_components(
    theta_hat: Theta, moments: Moments, variant: Optional[ModelVariant] = None
) -> Dict[str, float]:
    """
    Norms of the first-order conditions of the likelihood at theta_hat.

    Keys:
        beta: max-abs of (1/NT) sum_it sigma_ie^{-1} (ydot - xdot'beta - lambda_i'f_t) xdot_it
        gamma: max-abs of the loading score Sigma_zz^{-1} U A G over free entries
        sigma: max-abs of the Sigma_ii score on its e entry and x block
        m_ff: max-abs of Gamma' Sigma^{-1} U Sigma^{-1} Gamma / N (restricted variants)
        identity: max-abs of the h-row identity linking the y-equation score to the loadings
            (restricted variants with r2 > 0)

    Here U = (I kron B) M_zz (I kron B') - Sigma_zz, A = Sigma_ee^{-1} Gamma and
    G = (M_ff^{-1} + Gamma' A)^{-1}.  Every part is a max-norm of the
    corresponding left-hand side.
    """
    variant = variant or ModelVariant.basic(theta_hat.n_factors)
    n, p, r = theta_hat.gamma.shape
    t = moments.n_periods
    factor = SigmaZzFactor(theta_hat)
    bz = moments.transformed(theta_hat.beta)
    gamma, a, g = theta_hat.gamma, factor.a, factor.g
    sigma_blocks = theta_hat.sigma.blocks()
    parts: Dict[str, float] = {}

    f_mean = np.einsum("iat,iar->tr", bz, a) @ g if r else np.zeros((t, 0))

    if p > 1:
        resid = bz[:, 0, :] - theta_hat.lambda_y @ f_mean.T
        score = np.einsum("i,ikt,it->k", 1.0 / theta_hat.sigma.sigma_e, moments.zdot[:, 1:, :], resid)
        parts["beta"] = float(np.max(np.abs(score / (n * t))))

    # U A = S A - Gamma M Q - Gamma
    if r:
        sa = np.einsum("iat,tr->iar", bz, np.einsum("jbt,jbr->tr", bz, a)) / t
        ua = sa - np.einsum("iar,rs->ias", gamma, theta_hat.m_ff @ factor.q) - gamma
        aua = symmetrize(np.einsum("iar,ias->rs", a, ua))
    else:
        ua = np.zeros((n, p, 0))
        aua = np.zeros((0, 0))

    s_blocks = symmetrize(np.einsum("iat,ibt->iab", bz, bz) / t)
    u_blocks = s_blocks - np.einsum("iar,rs,ibs->iab", gamma, theta_hat.m_ff, gamma) - sigma_blocks
    if r:
        cross = np.einsum("iar,rs,ibs->iab", gamma, g, ua)
        quad = np.einsum("iar,rs,st,tu,ibu->iab", gamma, g, aua, g, gamma, optimize=True)
        w_blocks = u_blocks - cross - np.swapaxes(cross, 1, 2) + quad
    else:
        w_blocks = u_blocks
    parts["sigma"] = float(
        max(np.max(np.abs(w_blocks[:, 0, 0])), np.max(np.abs(w_blocks[:, 1:, 1:]), initial=0.0))
    )

    if r:
        grad = factor.apply_inverse((ua @ g).reshape(n * p, r)).reshape(n, p, r)
        free = np.ones((n, p, r), dtype=bool)
        free[:, 0, variant.r1:] = False
        parts["gamma"] = float(np.max(np.abs(grad[free]), initial=0.0))

        if variant.r2:
            parts["m_ff"] = float(np.max(np.abs(aua)) / n)
            u_y = ua[:, 0, :] / theta_hat.sigma.sigma_e[:, None]
            # observed loadings enter the identity, structural zeros do not
            lam = theta_hat.lambda_y if variant.phi is not None else theta_hat.lambda_y[:, : variant.r1]
            parts["identity"] = float(np.max(np.abs(g[variant.r1:, :] @ u_y.T @ lam), initial=0.0) / n)

    return parts


def foc_residuals(
    theta_hat: Theta, moments: Moments, variant: Optional[ModelVariant] = None
) -> float:
    """Largest first-order-condition residual of the variant's system; 0 when there is nothing to check."""
    parts = foc_components(theta_hat, moments, variant)
    return max(parts.values()) if parts else 0.0
