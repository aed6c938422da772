"""
ECM estimation of the interactive-effects likelihood.

One sweep computes the conditional factor moments at theta_k (E-step), then updates
(Gamma, Sigma_ee, M_ff) with beta held fixed and finally beta given the new loadings
and variances.  Loading restrictions of the restricted models enter through
:class:`~interfx.panel.ModelVariant` as pinned y-equation entries.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple, Type

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .baselines import iterated_pc, principal_components, sign_columns, within_group
from .config import EmConfig
from .exceptions import (
    ConvergenceWarning,
    IdentificationWarning,
    InterfxError,
    SingularMatrixError,
)
from .inference import CovarianceEstimate, covariance_trace_form, estimate_factors, foc_components
from .panel import (
    SINGULAR_RTOL,
    BlockCov,
    ModelVariant,
    Moments,
    PanelDataset,
    SigmaZzFactor,
    Theta,
    demean_panel,
    log_likelihood,
    symmetrize,
)

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-10
TIE_TOL = 1e-10
INIT_VARIANCE_SHARE = 1e-3


@dataclass
class FitResult:
    """
    Outcome of a likelihood fit.

    Attributes:
        theta_hat: Normalized parameter estimates
        f_hat: T x r GLS factor estimates
        loglik_trace: Log-likelihood at the start and after every sweep
        se_beta: Trace-form standard errors (NaN when unavailable)
        n_iters: ECM sweeps performed
        converged: Parameter change below tolerance and FOC residual below tol_foc
        foc_residual: Largest first-order-condition residual at theta_hat
        variant: Restrictions the fit imposed
        foc_parts: FOC residual by parameter block
        covariance: Covariance estimate behind se_beta
        n_clamped: Sigma blocks clamped in the last sweep
        delta_hat: Common-regressor coefficients, when concentrated out
        warnings: Messages for every recoverable numerical event
    """

    theta_hat: Theta
    f_hat: NDArray
    loglik_trace: NDArray
    se_beta: NDArray
    n_iters: int
    converged: bool
    foc_residual: float
    variant: ModelVariant = field(default_factory=ModelVariant)
    foc_parts: Dict[str, float] = field(default_factory=dict)
    covariance: Optional[CovarianceEstimate] = None
    n_clamped: int = 0
    delta_hat: Optional[NDArray] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def beta_hat(self) -> NDArray:
        return self.theta_hat.beta

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])

    @property
    def r1(self) -> int:
        return self.variant.r1

    @property
    def r2(self) -> int:
        return self.variant.r2

    def summary(self) -> str:
        """Coefficient table plus fit diagnostics."""
        table = pd.DataFrame(
            {"estimate": self.beta_hat, "se": self.se_beta},
            index=[f"beta{k + 1}" for k in range(self.beta_hat.size)],
        )
        table["t"] = table["estimate"] / table["se"]
        lines = [
            f"model: {self.variant.name}  r1={self.variant.r1} r2={self.variant.r2}",
            f"loglik: {self.loglik:.10g}  iterations: {self.n_iters}  converged: {self.converged}",
            f"foc residual: {self.foc_residual:.3e}",
            table.to_string(float_format=lambda v: f"{v:.6f}"),
        ]
        return "\n".join(lines)


class _Expectations(NamedTuple):
    eff: NDArray
    ezf: NDArray
    f_mean: NDArray


def _record(messages: Optional[List[str]], message: str, category: Type[Warning]) -> None:
    logger.warning(message)
    warnings.warn(message, category, stacklevel=3)
    if messages is not None:
        messages.append(message)


def _check_invertible(mat: NDArray, name: str) -> None:
    eigvals = np.linalg.eigvalsh(mat)
    if eigvals[0] <= SINGULAR_RTOL * max(1.0, abs(eigvals[-1])):
        raise SingularMatrixError(
            f"{name} is singular (smallest eigenvalue {eigvals[0]:.3e})",
            smallest_eigenvalue=float(eigvals[0]),
        )


def _expectations(theta: Theta, moments: Moments, factor: Optional[SigmaZzFactor] = None) -> _Expectations:
    factor = factor or SigmaZzFactor(theta)
    t = moments.n_periods
    bz = moments.transformed(theta.beta)
    # conditional means F = Zdot'(I kron B') Sigma_zz^{-1} Gamma M_ff
    f_mean = np.einsum("iat,iar->tr", bz, factor.inverse_gamma())
    ezf = np.einsum("iat,tr->iar", bz, f_mean) / t
    eff = symmetrize(factor.g + f_mean.T @ f_mean / t)
    return _Expectations(eff, ezf, f_mean)


def e_step(theta_k: Theta, moments: Moments) -> Tuple[NDArray, NDArray]:
    """
    Conditional factor moments at theta_k.

    Returns:
        eff: r x r, E(f f' | Z) averaged over t
        ezf: N(K+1) x r, (I kron B) M_zz (I kron B') Sigma_zz^{-1} Gamma M_ff
    """
    exp = _expectations(theta_k, moments)
    n, p, r = exp.ezf.shape
    return exp.eff, exp.ezf.reshape(n * p, r)


def _update_loadings(eff: NDArray, ezf: NDArray, variant: ModelVariant) -> NDArray:
    n, p, r = ezf.shape
    if r == 0:
        return np.zeros((n, p, 0))
    _check_invertible(eff, "E[ff']")
    gamma = np.linalg.solve(eff, ezf.reshape(-1, r).T).T.reshape(n, p, r)
    if variant.r2:
        r1 = variant.r1
        pinned = variant.pinned_values(n)
        gamma[:, 0, r1:] = pinned
        if r1:
            # least squares for the free y-equation loadings with the pinned part fixed
            rhs = ezf[:, 0, :r1] - pinned @ eff[r1:, :r1]
            gamma[:, 0, :r1] = np.linalg.solve(eff[:r1, :r1], rhs.T).T
    return gamma


def _update_beta(moments: Moments, lam: NDArray, sigma_e: NDArray, f_mean: NDArray) -> NDArray:
    if moments.n_regressors == 0:
        return np.zeros(0)
    ydot = moments.zdot[:, 0, :]
    xdot = moments.zdot[:, 1:, :]
    w = 1.0 / sigma_e
    resid = ydot - lam @ f_mean.T
    xx = symmetrize(np.einsum("i,ikt,ilt->kl", w, xdot, xdot))
    xy = np.einsum("i,ikt,it->k", w, xdot, resid)
    _check_invertible(xx, "weighted regressor Gram matrix")
    return np.linalg.solve(xx, xy)


def _clamp_spd(mat: NDArray, floor: float, bound: float) -> NDArray:
    w, v = np.linalg.eigh(symmetrize(mat))
    return symmetrize((v * np.clip(w, floor, bound)) @ v.T)


def _m_step(
    theta: Theta,
    moments: Moments,
    eff: NDArray,
    ezf: NDArray,
    f_mean: NDArray,
    variant: ModelVariant,
    cfg: EmConfig,
) -> Tuple[Theta, int]:
    n, p, r = theta.gamma.shape
    ezf = np.asarray(ezf, dtype=float).reshape(n, p, r)
    eff = symmetrize(np.asarray(eff, dtype=float))

    gamma = _update_loadings(eff, ezf, variant)

    # expected residual covariance blocks, Dg-projected and clamped
    cross = np.einsum("iar,ibr->iab", ezf, gamma)
    resid_cov = (
        moments.sandwich_blocks(theta.beta)
        - cross
        - np.swapaxes(cross, 1, 2)
        + np.einsum("iar,rs,ibs->iab", gamma, eff, gamma, optimize=True)
    )
    sigma, n_clamped = BlockCov.from_blocks_clamped(resid_cov, cfg.var_floor, cfg.eig_bound)

    if variant.free_m_ff:
        m_ff = _clamp_spd(eff, 1.0 / cfg.eig_bound, cfg.eig_bound)
    else:
        m_ff = np.eye(r)

    beta = _update_beta(moments, gamma[:, 0, :], sigma.sigma_e, f_mean)
    return Theta(beta=beta, gamma=gamma, sigma=sigma, m_ff=m_ff), n_clamped


def m_step(
    theta_k: Theta,
    moments: Moments,
    eff: NDArray,
    ezf: NDArray,
    variant: Optional[ModelVariant] = None,
    cfg: Optional[EmConfig] = None,
) -> Theta:
    """
    Conditional maximization given the E-step moments.

    Gamma = ezf eff^{-1} (row-wise constrained where the variant pins loadings),
    Sigma_ee = Dg of the expected residual covariance at beta_k, then beta by weighted
    least squares on ydot - lambda_i'E(f_t | Z).
    """
    variant = variant or ModelVariant.basic(theta_k.n_factors)
    cfg = cfg or EmConfig()
    f_mean = _expectations(theta_k, moments).f_mean
    theta, _ = _m_step(theta_k, moments, eff, ezf, f_mean, variant, cfg)
    return theta


def _max_change(old: Theta, new: Theta) -> float:
    diffs = [
        np.abs(new.beta - old.beta),
        np.abs(new.gamma - old.gamma),
        np.abs(new.sigma.sigma_e - old.sigma.sigma_e),
        np.abs(new.sigma.sigma_x - old.sigma.sigma_x),
        np.abs(new.m_ff - old.m_ff),
    ]
    return float(max((np.max(d) for d in diffs if d.size), default=0.0))


# ---------------------------------------------------------------------------
# identification


def _factor_rows(f: NDArray, r: int) -> NDArray:
    f = np.asarray(f, dtype=float)
    # explicit row count: reshape(-1, 0) is undefined when r == 0
    return f.reshape(f.shape[0] if f.ndim else 0, r)


def _sym_sqrt(m: NDArray) -> Tuple[NDArray, NDArray]:
    w, v = np.linalg.eigh(symmetrize(m))
    if w[0] <= 0:
        raise SingularMatrixError(
            f"M_ff is not positive definite (smallest eigenvalue {w[0]:.3e})",
            smallest_eigenvalue=float(w[0]),
        )
    root = np.sqrt(w)
    return symmetrize((v * root) @ v.T), symmetrize((v / root) @ v.T)


def _ordered_eigh(mat: NDArray, messages: Optional[List[str]] = None) -> Tuple[NDArray, NDArray]:
    """Eigenpairs in descending order; tied eigenvalues ordered by their eigenvectors."""
    w, v = np.linalg.eigh(symmetrize(mat))
    w, v = w[::-1], v[:, ::-1]
    v = v * sign_columns(v)
    tied = np.abs(np.diff(w)) <= TIE_TOL * max(1.0, abs(w[0]))
    if np.any(tied):
        _record(
            messages,
            f"loading Gram matrix has repeated eigenvalues {np.round(w, 12).tolist()}; "
            "ordering tied factors by their eigenvectors",
            IdentificationWarning,
        )
        order: List[int] = []
        start = 0
        for j in range(1, w.size + 1):
            if j == w.size or not tied[j - 1]:
                group = sorted(range(start, j), key=lambda c: tuple(-v[:, c]))
                order.extend(group)
                start = j
        w, v = w[order], v[:, order]
    return w, v


def _gram(gamma: NDArray, sigma_inv: NDArray) -> NDArray:
    n = gamma.shape[0]
    return symmetrize(np.einsum("iar,iab,ibs->rs", gamma, sigma_inv, gamma, optimize=True)) / n


def normalize_identification(
    theta: Theta, f: NDArray, messages: Optional[List[str]] = None
) -> Tuple[Theta, NDArray]:
    """
    Rotate (Gamma, f) to the basic-model normalization.

    Afterwards M_ff = I_r, the factors have mean zero and N^{-1} Gamma' Sigma_ee^{-1} Gamma
    is diagonal with descending entries.  Gamma f' and the likelihood are unchanged; each
    loading column is signed so that its largest-magnitude entry is positive.
    """
    r = theta.n_factors
    f = _factor_rows(f, r)
    f = f - f.mean(axis=0)
    if r == 0:
        return theta, f

    if np.array_equal(theta.m_ff, np.eye(r)):
        half = inv_half = np.eye(r)
    else:
        half, inv_half = _sym_sqrt(theta.m_ff)

    scaled = np.einsum("iar,rs->ias", theta.gamma, half)
    _, rot = _ordered_eigh(_gram(scaled, theta.sigma.inverse_blocks()), messages)
    gamma = np.einsum("iar,rs->ias", scaled, rot)
    signs = sign_columns(gamma.reshape(-1, r))
    gamma = gamma * signs
    rot = rot * signs
    return theta.replace(gamma=gamma, m_ff=np.eye(r)), f @ inv_half @ rot


def normalize_zero_restrictions(
    theta: Theta, f: NDArray, r1: int, messages: Optional[List[str]] = None
) -> Tuple[Theta, NDArray]:
    """
    Normalization with zero y-loadings on the trailing factors.

    M_ff becomes I_r and the g and h blocks are diagonalized separately, so the
    structural zeros survive the rotation.
    """
    r = theta.n_factors
    f = _factor_rows(f, r)
    f = f - f.mean(axis=0)
    gamma = theta.gamma
    if r == 0:
        return theta, f

    if not np.array_equal(theta.m_ff, np.eye(r)):
        # lower Cholesky factor keeps the block-triangular zero pattern
        chol = np.linalg.cholesky(theta.m_ff)
        gamma = np.einsum("iar,rs->ias", gamma, chol)
        f = np.linalg.solve(chol, f.T).T

    sigma_inv = theta.sigma.inverse_blocks()
    rot = np.zeros((r, r))
    for cols in (slice(0, r1), slice(r1, r)):
        block = gamma[:, :, cols]
        if block.shape[2] == 0:
            continue
        _, rot[cols, cols] = _ordered_eigh(_gram(block, sigma_inv), messages)
    gamma = np.einsum("iar,rs->ias", gamma, rot)
    signs = sign_columns(gamma.reshape(-1, r))
    gamma = gamma * signs
    gamma[:, 0, r1:] = 0.0
    return theta.replace(gamma=gamma, m_ff=np.eye(r)), f @ (rot * signs)


def normalize_observed_phi(
    theta: Theta, f: NDArray, r1: int, messages: Optional[List[str]] = None
) -> Tuple[Theta, NDArray]:
    """
    Normalization with observed y-loadings on the trailing factors.

    Maps (g, h) to (g*, h*) with M_gg = I, M_gh = 0 and N^{-1} Gamma_g' Sigma^{-1} Gamma_g
    diagonal descending; M_hh stays free and the observed loadings are untouched.
    """
    r = theta.n_factors
    f = _factor_rows(f, r)
    f = f - f.mean(axis=0)
    if r1 == 0:
        return theta, f
    g, h = slice(0, r1), slice(r1, r)
    m = theta.m_ff
    m_gg, m_hg = m[g, g], m[h, g]
    coef = np.linalg.solve(m_gg, m_hg.T).T  # M_hg M_gg^{-1}

    gamma = theta.gamma.copy()
    gamma_g = gamma[:, :, g] + np.einsum("iar,rs->ias", gamma[:, :, h], coef)
    half, inv_half = _sym_sqrt(m_gg)
    scaled = np.einsum("iar,rs->ias", gamma_g, half)
    _, rot = _ordered_eigh(_gram(scaled, theta.sigma.inverse_blocks()), messages)
    new_g = np.einsum("iar,rs->ias", scaled, rot)
    signs = sign_columns(new_g.reshape(-1, r1))
    gamma[:, :, g] = new_g * signs
    rot = rot * signs

    f_new = np.empty_like(f)
    f_new[:, g] = f[:, g] @ inv_half @ rot
    f_new[:, h] = f[:, h] - f[:, g] @ coef.T

    m_new = np.zeros_like(m)
    m_new[g, g] = np.eye(r1)
    m_new[h, h] = symmetrize(m[h, h] - coef @ m_hg.T)
    return theta.replace(gamma=gamma, m_ff=m_new), f_new


def normalize_variant(
    theta: Theta, f: NDArray, variant: ModelVariant, messages: Optional[List[str]] = None
) -> Tuple[Theta, NDArray]:
    if variant.r2 == 0:
        return normalize_identification(theta, f, messages)
    if variant.phi is None:
        return normalize_zero_restrictions(theta, f, variant.r1, messages)
    return normalize_observed_phi(theta, f, variant.r1, messages)


# ---------------------------------------------------------------------------
# starting values


def _theta_from_factors(
    moments: Moments, beta: NDArray, f: NDArray, variant: ModelVariant, cfg: EmConfig
) -> Theta:
    """Loadings and variances by (constrained) regression of B zdot on given factors."""
    n, p, t = moments.zdot.shape
    bz = moments.transformed(beta)
    eff = symmetrize(f.T @ f / t)
    ezf = np.einsum("iat,tr->iar", bz, f) / t
    gamma = _update_loadings(eff, ezf, variant)
    resid = bz - np.einsum("iar,tr->iat", gamma, f)
    blocks = np.einsum("iat,ibt->iab", resid, resid) / t
    floor = max(cfg.var_floor, INIT_VARIANCE_SHARE * float(np.mean(np.einsum("iaa->ia", blocks))))
    sigma, _ = BlockCov.from_blocks_clamped(blocks, floor, cfg.eig_bound)
    m_ff = _clamp_spd(eff, 1.0 / cfg.eig_bound, cfg.eig_bound) if variant.free_m_ff else np.eye(f.shape[1])
    return Theta(beta=beta, gamma=gamma, sigma=sigma, m_ff=m_ff)


def _pc_start(data: PanelDataset, moments: Moments, variant: ModelVariant, cfg: EmConfig) -> Optional[Theta]:
    pc = iterated_pc(data, variant.y_factors, cfg.pc_max_iters, cfg.pc_tol)
    if not pc.converged:
        return None
    t = moments.n_periods
    beta = pc.beta_hat
    bz = moments.transformed(beta)
    r1, r2 = variant.r1, variant.r2

    if r2 == 0:
        f, _ = principal_components(bz.reshape(-1, t), r1)
    elif variant.phi is None:
        # g from the y equation, h from what the x equations have left
        f_g = pc.pc_factors
        flat = bz.reshape(-1, t)
        f_h, _ = principal_components(flat - (flat @ f_g) @ f_g.T / t, r2)
        f = np.hstack([f_g, f_h])
    else:
        # h from a cross-section regression of the y residual on phi, g from the rest
        phi = variant.pinned_values(moments.n_units)
        resid = bz[:, 0, :]
        h = np.linalg.lstsq(phi, resid, rcond=None)[0].T
        f_g, _ = principal_components(resid - phi @ h.T, r1)
        f = np.hstack([f_g, h])
    return _theta_from_factors(moments, beta, f, variant, cfg)


def _random_start(data: PanelDataset, moments: Moments, variant: ModelVariant, cfg: EmConfig) -> Theta:
    rng = np.random.default_rng(cfg.seed)
    n, p, _ = moments.zdot.shape
    r = variant.n_factors
    beta = within_group(data).beta_hat if data.n_regressors else np.zeros(0)
    blocks = moments.sandwich_blocks(beta)
    variances = np.einsum("iaa->ia", blocks)
    gamma = rng.standard_normal((n, p, r)) * np.sqrt(variances)[:, :, None]
    if variant.r2:
        gamma[:, 0, variant.r1:] = variant.pinned_values(n)
    diag_blocks = np.zeros_like(blocks)
    idx = np.arange(p)
    diag_blocks[:, idx, idx] = variances
    sigma, _ = BlockCov.from_blocks_clamped(diag_blocks, cfg.var_floor, cfg.eig_bound)
    return Theta(beta=beta, gamma=gamma, sigma=sigma, m_ff=np.eye(r))


def _initial_theta(
    data: PanelDataset, moments: Moments, variant: ModelVariant, cfg: EmConfig, messages: List[str]
) -> Theta:
    if cfg.init == "user":
        theta = cfg.init_theta
        expected = (moments.n_units, moments.n_regressors + 1, variant.n_factors)
        if theta.gamma.shape != expected:
            raise ValueError(f"init_theta loadings have shape {theta.gamma.shape}, expected {expected}")
        if variant.r2:
            gamma = theta.gamma.copy()
            gamma[:, 0, variant.r1:] = variant.pinned_values(moments.n_units)
            theta = theta.replace(gamma=gamma)
        return theta

    if cfg.init == "iterated_pc":
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                theta = _pc_start(data, moments, variant, cfg)
            reason = "iterated PC did not converge"
        except (InterfxError, np.linalg.LinAlgError, ValueError) as exc:
            theta, reason = None, f"iterated PC failed: {exc}"
        if theta is not None:
            return theta
        _record(messages, f"{reason}; falling back to a random start", ConvergenceWarning)

    return _random_start(data, moments, variant, cfg)


# ---------------------------------------------------------------------------
# driver


def _run_ecm(
    moments: Moments, theta: Theta, variant: ModelVariant, cfg: EmConfig, messages: List[str]
) -> Tuple[Theta, List[float], int, bool, int]:
    factor = SigmaZzFactor(theta)
    loglik = log_likelihood(theta, moments, factor)
    trace = [loglik]
    n_clamped = 0
    converged = False
    warned_clamp = warned_drop = False
    n_iters = 0

    for sweep in range(1, cfg.max_iters + 1):
        try:
            exp = _expectations(theta, moments, factor)
            new_theta, n_clamped = _m_step(theta, moments, exp.eff, exp.ezf, exp.f_mean, variant, cfg)
            new_factor = SigmaZzFactor(new_theta)
        except SingularMatrixError as exc:
            _record(messages, f"ECM aborted at sweep {sweep}: {exc}", ConvergenceWarning)
            break

        new_loglik = log_likelihood(new_theta, moments, new_factor)
        change = _max_change(theta, new_theta)
        if n_clamped and not warned_clamp:
            _record(messages, f"{n_clamped} variance block(s) clamped at sweep {sweep}", ConvergenceWarning)
            warned_clamp = True
        if new_loglik < loglik - MONOTONE_SLACK and not warned_drop:
            _record(
                messages,
                f"log-likelihood fell by {loglik - new_loglik:.3e} at sweep {sweep}",
                ConvergenceWarning,
            )
            warned_drop = True

        theta, factor, loglik = new_theta, new_factor, new_loglik
        trace.append(loglik)
        n_iters = sweep
        logger.debug("sweep %d: loglik=%.12g change=%.3e", sweep, loglik, change)

        if change < cfg.tol_param:
            # keep iterating while the score is still visibly nonzero
            parts = foc_components(theta, moments, variant)
            if max(parts.values(), default=0.0) <= cfg.tol_foc:
                converged = True
                break

    return theta, trace, n_iters, converged, n_clamped


def fit_variant(
    data: PanelDataset,
    variant: ModelVariant,
    cfg: Optional[EmConfig] = None,
    moments: Optional[Moments] = None,
    extra_basis: Optional[NDArray] = None,
) -> FitResult:
    """
    Maximize the likelihood under the loading restrictions of ``variant``.

    Args:
        data: Panel (already concentrated when common regressors are present)
        variant: Restrictions on the loadings
        cfg: ECM settings
        moments: Precomputed demeaned moments of ``data``
        extra_basis: Extra time-series basis for the trace-form covariance

    Returns:
        FitResult with normalized estimates
    """
    cfg = cfg or EmConfig()
    n, t = data.n_units, data.n_periods
    r = variant.n_factors
    if not 0 <= r < min(n, t):
        raise ValueError(f"need 0 <= r < min(N, T) = {min(n, t)}, got r={r}")
    moments = moments if moments is not None else demean_panel(data, cfg.dense_cap)
    messages: List[str] = []

    theta = _initial_theta(data, moments, variant, cfg, messages)
    theta, trace, n_iters, converged, n_clamped = _run_ecm(moments, theta, variant, cfg, messages)
    theta, _ = normalize_variant(theta, np.zeros((t, r)), variant, messages)

    f_hat = estimate_factors(theta, moments)
    parts = foc_components(theta, moments, variant)
    foc = max(parts.values(), default=0.0)
    if not converged:
        _record(
            messages,
            f"ECM did not converge after {n_iters} sweeps (FOC residual {foc:.3e})",
            ConvergenceWarning,
        )

    covariance = None
    se = np.full(data.n_regressors, np.nan)
    if data.n_regressors:
        try:
            covariance = covariance_trace_form(theta, moments, f_hat, variant.g_cols, extra_basis)
            se = covariance.se_beta
        except SingularMatrixError as exc:
            _record(messages, f"standard errors unavailable: {exc}", IdentificationWarning)

    logger.info(
        "%s fit: r1=%d r2=%d sweeps=%d converged=%s loglik=%.10g foc=%.3e",
        variant.name, variant.r1, variant.r2, n_iters, converged, trace[-1], foc,
    )
    return FitResult(
        theta_hat=theta,
        f_hat=f_hat,
        loglik_trace=np.asarray(trace),
        se_beta=se,
        n_iters=n_iters,
        converged=converged,
        foc_residual=foc,
        variant=variant,
        foc_parts=parts,
        covariance=covariance,
        n_clamped=n_clamped,
        warnings=messages,
    )


def fit_mle(data: PanelDataset, r: int, cfg: Optional[EmConfig] = None) -> FitResult:
    """Maximum likelihood fit of the basic model with r factors."""
    return fit_variant(data, ModelVariant.basic(r), cfg)
