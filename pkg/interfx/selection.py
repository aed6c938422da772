"""
Selection of the number of factors.

The total number r comes from a likelihood information criterion over basic-model
fits with 0..r_max factors.  For the zero-restrictions model the y-equation count r1
is then picked from the y residual at the selected fit, capped at r.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from typing_extensions import Literal

from .config import EmConfig
from .em import FitResult, fit_mle
from .exceptions import EstimationError, InterfxError
from .panel import PanelDataset, SigmaZzFactor, Theta

logger = logging.getLogger(__name__)

DEFAULT_R_MAX = 4

Criterion = Literal["icp2", "ic"]


def ic_penalty(m: int, n_rows: int, t: int) -> float:
    """m (NK + T)/(NK T) ln min(NK, T) with NK = N(K+1) rows."""
    return m * (n_rows + t) / (n_rows * t) * np.log(min(n_rows, t))


def _ic_from_fit(result: FitResult, n_periods: int) -> float:
    theta = result.theta_hat
    n_rows = theta.gamma_matrix.shape[0]
    # normalized fits carry M_ff = I, so this is ln|Gamma Gamma' + Sigma|
    log_det = SigmaZzFactor(theta).log_det
    return log_det / n_rows + ic_penalty(theta.n_factors, n_rows, n_periods)


def _pad_theta(theta: Theta, rng: np.random.Generator) -> Theta:
    """Append one random loading column, scaled to the idiosyncratic standard deviations."""
    scale = np.sqrt(np.einsum("iaa->ia", theta.sigma.blocks()))
    column = rng.standard_normal(scale.shape) * scale
    gamma = np.concatenate([theta.gamma, column[:, :, None]], axis=2)
    return theta.replace(gamma=gamma, m_ff=np.eye(gamma.shape[2]))


def _fit_m(data: PanelDataset, m: int, cfg: EmConfig) -> FitResult:
    try:
        return fit_mle(data, m, cfg)
    except (InterfxError, np.linalg.LinAlgError, ValueError) as exc:
        raise EstimationError(f"basic-model fit with m={m} factors failed: {exc}") from exc


def ic_value(data: PanelDataset, m: int, cfg: Optional[EmConfig] = None) -> float:
    """
    Information criterion of the basic model with m factors.

    IC(m) = (1/NK) ln|Gamma Gamma' + Sigma_ee| + m (NK + T)/(NK T) ln min(NK, T),
    with NK = N(K+1) and the log-determinant taken at the fitted parameters.
    """
    if m < 0:
        raise ValueError(f"m must be non-negative, got {m}")
    cfg = cfg or EmConfig()
    return _ic_from_fit(_fit_m(data, m, cfg), data.n_periods)


@dataclass
class IcPath:
    """
    Information criteria for m = 0..r_max.

    Attributes:
        values: IC(m) indexed by m
        fits: Basic-model fit for every m
    """

    values: pd.Series
    fits: Dict[int, FitResult] = field(default_factory=dict)

    @property
    def r_hat(self) -> int:
        # first minimum, so ties go to the smaller model
        return int(self.values.index[int(np.argmin(self.values.to_numpy()))])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "ic": self.values,
                "loglik": pd.Series({m: fit.loglik for m, fit in self.fits.items()}),
                "converged": pd.Series({m: fit.converged for m, fit in self.fits.items()}),
            }
        ).rename_axis("m")


def information_criteria(
    data: PanelDataset,
    r_max: int = DEFAULT_R_MAX,
    cfg: Optional[EmConfig] = None,
    warm_start: bool = True,
) -> IcPath:
    """
    Fit the basic model for m = 0..r_max and evaluate IC(m).

    With ``warm_start`` each fit starts from the previous one padded with a random
    loading column.
    """
    if r_max < 0:
        raise ValueError(f"r_max must be non-negative, got {r_max}")
    if r_max >= min(data.n_units, data.n_periods):
        raise ValueError(f"r_max={r_max} must be below min(N, T) = {min(data.n_units, data.n_periods)}")
    cfg = cfg or EmConfig()
    rng = np.random.default_rng(cfg.seed)

    values: Dict[int, float] = {}
    fits: Dict[int, FitResult] = {}
    previous: Optional[FitResult] = None
    for m in range(r_max + 1):
        fit_cfg = cfg
        if warm_start and previous is not None:
            fit_cfg = replace(cfg, init="user", init_theta=_pad_theta(previous.theta_hat, rng))
        result = _fit_m(data, m, fit_cfg)
        values[m] = _ic_from_fit(result, data.n_periods)
        fits[m] = previous = result
        logger.debug("IC(%d) = %.10g", m, values[m])

    path = IcPath(values=pd.Series(values, name="ic").rename_axis("m"), fits=fits)
    logger.info("selected r=%d from IC over m=0..%d", path.r_hat, r_max)
    return path


def select_r(data: PanelDataset, r_max: int = DEFAULT_R_MAX, cfg: Optional[EmConfig] = None) -> int:
    """argmin over 0 <= m <= r_max of IC(m); ties go to the smaller m."""
    return information_criteria(data, r_max, cfg).r_hat


def bai_ng(w: NDArray, r_max: int) -> int:
    """
    Number of factors in an N x T matrix by the IC_p2 criterion.

    IC_p2(k) = ln V(k) + k (N + T)/(NT) ln min(N, T), with V(k) the mean squared
    residual after removing k principal components.
    """
    w = np.asarray(w, dtype=float)
    n, t = w.shape
    r_max = min(r_max, min(n, t))
    sv2 = np.linalg.svd(w, compute_uv=False) ** 2
    total = float(np.sum(sv2))
    explained = np.concatenate([[0.0], np.cumsum(sv2[:r_max])])
    v = np.maximum(total - explained, np.finfo(float).tiny) / (n * t)
    k = np.arange(r_max + 1)
    crit = np.log(v) + k * (n + t) / (n * t) * np.log(min(n, t))
    return int(np.argmin(crit))


def y_residual(data: PanelDataset, beta: NDArray) -> NDArray:
    """R = ydot - xdot beta, N x T."""
    y = data.y - data.y.mean(axis=1, keepdims=True)
    x = data.x - data.x.mean(axis=1, keepdims=True)
    return y - np.einsum("itk,k->it", x, beta)


def select_r1_r2(
    data: PanelDataset,
    cfg: Optional[EmConfig] = None,
    r_max: int = DEFAULT_R_MAX,
    criterion: Criterion = "icp2",
    path: Optional[IcPath] = None,
) -> Tuple[int, int]:
    """
    Two-step choice of (r1, r2) for the zero-restrictions model.

    Step one selects r from IC(m) and keeps beta-hat of the r-factor fit.  Step two
    counts the factors of ydot - xdot beta-hat, at most r: by IC_p2 (``criterion="icp2"``)
    or by IC(m) on the residual treated as a panel without regressors (``"ic"``).

    Args:
        data: Panel
        cfg: ECM settings for all fits
        r_max: Largest total factor count considered
        criterion: Second-step criterion
        path: Precomputed information criteria, reused instead of refitting
    """
    if criterion not in ("icp2", "ic"):
        raise ValueError(f"unknown criterion '{criterion}'")
    cfg = cfg or EmConfig()
    path = path or information_criteria(data, r_max, cfg)
    r_hat = path.r_hat
    if r_hat == 0:
        return 0, 0

    resid = y_residual(data, path.fits[r_hat].beta_hat)
    if criterion == "icp2":
        r1 = bai_ng(resid, r_hat)
    else:
        r1 = information_criteria(PanelDataset(y=resid, x=None), r_hat, cfg).r_hat
    logger.info("two-step selection: r=%d, r1=%d, r2=%d (%s)", r_hat, r1, r_hat - r1, criterion)
    return r1, r_hat - r1
