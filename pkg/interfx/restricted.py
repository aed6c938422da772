"""
Restricted loading structures.

Three models sit on top of the ECM engine in :mod:`interfx.em`:

- zero restrictions: the trailing ``r2`` factors h_t hit only the regressors,
- observed phi: the y-equation loadings on h_t are observed time-invariant regressors,
- phi and common: additionally, observed common regressors d_t enter every series.
  They are concentrated out by projecting the data off the span of D.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from typing_extensions import Literal

from .config import EmConfig
from .em import FitResult, _record, fit_mle, fit_variant
from .exceptions import IdentificationError, IdentificationWarning, PanelDataError
from .panel import ModelVariant, PanelDataset

logger = logging.getLogger(__name__)

RestrictedName = Literal["zero_restrictions", "observed_phi", "phi_and_common"]

# 1_T counts as spanned by D when its residual norm is below this share of sqrt(T)
SPAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RestrictedSpec:
    """
    A restricted model to be fitted.

    Attributes:
        variant: Which restriction applies
        r1: Number of unrestricted factors g_t
        r2: Number of factors h_t with restricted y-loadings (zero restrictions only;
            taken from phi otherwise)
        phi: Observed loadings, N x r2
        d: Observed common regressors, T x r3
    """

    variant: RestrictedName
    r1: int
    r2: int = 0
    phi: Optional[NDArray] = None
    d: Optional[NDArray] = None

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError(f"factor counts must be non-negative, got r1={self.r1}, r2={self.r2}")
        if self.phi is not None:
            phi = np.array(self.phi, dtype=float)
            object.__setattr__(self, "phi", phi[:, None] if phi.ndim == 1 else phi)

    def to_variant(self) -> ModelVariant:
        """Loading restrictions imposed during ECM (common regressors are concentrated out first)."""
        if self.variant == "zero_restrictions":
            return ModelVariant(name="zero_restrictions", r1=self.r1, r2=self.r2)
        if self.phi is None:
            if self.variant == "observed_phi":
                raise IdentificationError("observed_phi requires phi")
            return ModelVariant(name=self.variant, r1=self.r1)
        return ModelVariant(name=self.variant, r1=self.r1, r2=self.phi.shape[1], phi=self.phi)

    def fit(self, data: PanelDataset, cfg: Optional[EmConfig] = None) -> FitResult:
        """Fit this model; ``phi`` and ``d`` override the panel's side data when set."""
        if self.variant == "zero_restrictions":
            return fit_zero_restrictions(data, self.r1, self.r2, cfg)
        data = replace(
            data,
            phi_observed=self.phi if self.phi is not None else data.phi_observed,
            d_observed=self.d if self.d is not None else data.d_observed,
        )
        if self.variant == "observed_phi":
            return fit_observed_phi(data, self.r1, cfg)
        return fit_phi_and_common(data, self.r1, cfg)


def _warn_rank(result: FitResult, mat: NDArray, name: str) -> None:
    if mat.shape[1] == 0:
        return
    rank = int(np.linalg.matrix_rank(mat))
    if rank < mat.shape[1]:
        _record(
            result.warnings,
            f"{name} has rank {rank} < {mat.shape[1]}; the restricted model is weakly identified",
            IdentificationWarning,
        )


def fit_zero_restrictions(
    data: PanelDataset, r1: int, r2: int, cfg: Optional[EmConfig] = None
) -> FitResult:
    """
    Fit the model whose last ``r2`` factors do not load on the y equation.

    The y-row loadings on h_t are held at zero throughout ECM and the exit
    normalization diagonalizes the g and h loading blocks separately.  With
    ``r2 == 0`` this is exactly :func:`~interfx.em.fit_mle`.
    """
    if r1 < 0 or r2 < 0:
        raise ValueError(f"factor counts must be non-negative, got r1={r1}, r2={r2}")
    if r2 == 0:
        return fit_mle(data, r1, cfg)

    result = fit_variant(data, ModelVariant(name="zero_restrictions", r1=r1, r2=r2), cfg)
    _warn_rank(result, result.theta_hat.lambda_y[:, :r1], "Psi")
    return result


def _require_phi(data: PanelDataset) -> NDArray:
    if data.phi_observed is None:
        raise PanelDataError("observed loadings (phi) are required for this model")
    phi = data.phi_observed
    rank = int(np.linalg.matrix_rank(phi))
    if rank < phi.shape[1]:
        raise IdentificationError(f"phi has rank {rank} but {phi.shape[1]} columns")
    return phi


def fit_observed_phi(data: PanelDataset, r1: int, cfg: Optional[EmConfig] = None) -> FitResult:
    """
    Fit the model with observed time-invariant regressors phi.

    The y-row loadings on h_t stay at phi, M_hh is estimated and the exit
    normalization sets M_gg = I and M_gh = 0.
    """
    phi = _require_phi(data)
    variant = ModelVariant(name="observed_phi", r1=r1, r2=phi.shape[1], phi=phi)
    result = fit_variant(data, variant, cfg)
    _warn_rank(result, result.theta_hat.lambda_y, "Lambda = [Psi, Phi]")
    return result


def common_basis(d: NDArray) -> NDArray:
    """Observed common regressors with 1_T appended unless it is already spanned."""
    d = np.asarray(d, dtype=float)
    t = d.shape[0]
    ones = np.ones((t, 1))
    coef = np.linalg.lstsq(d, ones, rcond=None)[0]
    if np.linalg.norm(ones - d @ coef) <= SPAN_TOL * np.sqrt(t):
        return d
    return np.hstack([ones, d])


def concentrate_common_regressors(data: PanelDataset) -> PanelDataset:
    """
    Project every series off the span of the common regressors.

    Returns the panel Z M(D) with M(D) = I_T - D(D'D)^{-1}D', which replaces demeaning:
    when D = 1_T the result equals the demeaned panel.  The returned panel keeps
    ``phi_observed`` and drops ``d_observed``.
    """
    if data.d_observed is None:
        raise PanelDataError("observed common regressors (d) are required for this model")
    d = common_basis(data.d_observed)
    t = data.n_periods
    if t <= d.shape[1]:
        raise PanelDataError(f"need T > {d.shape[1]} common regressors (1_T included), got T={t}")
    q, upper = np.linalg.qr(d)
    diag = np.abs(np.diag(upper))
    if diag.min() <= 1e-12 * max(1.0, diag.max()):
        raise IdentificationError("D'D is singular")

    y = data.y - (data.y @ q) @ q.T
    x = data.x - np.einsum("isk,qs->iqk", np.einsum("itk,ts->isk", data.x, q), q)
    return PanelDataset(y=y, x=x, phi_observed=data.phi_observed)


def fit_phi_and_common(data: PanelDataset, r1: int, cfg: Optional[EmConfig] = None) -> FitResult:
    """
    Fit the model with observed phi and observed common regressors d_t.

    The panel is concentrated on M(D) and then fitted as the observed-phi model
    (the basic model when phi is absent).  Delta-hat, the loadings on d_t, is
    recovered afterwards from the raw data at the fitted beta.
    """
    concentrated = concentrate_common_regressors(data)
    d = common_basis(data.d_observed)

    if data.phi_observed is None:
        variant = ModelVariant(name="phi_and_common", r1=r1, r2=0)
    else:
        phi = _require_phi(data)
        variant = ModelVariant(name="phi_and_common", r1=r1, r2=phi.shape[1], phi=phi)

    result = fit_variant(concentrated, variant, cfg, extra_basis=d)

    # Delta = (I kron B)(sum_s z_s d_s')(sum_s d_s d_s')^{-1}
    z = data.stacked()
    z[:, 0, :] -= np.einsum("ikt,k->it", z[:, 1:, :], result.beta_hat)
    zd = np.einsum("iat,tq->iaq", z, d).reshape(-1, d.shape[1])
    delta = np.linalg.solve(d.T @ d, zd.T).T

    _warn_rank(result, result.theta_hat.lambda_y, "Lambda = [Psi, Phi]")
    logger.info("common-regressor loadings recovered for %d series on %d regressors", *delta.shape)
    return replace(result, delta_hat=delta)
