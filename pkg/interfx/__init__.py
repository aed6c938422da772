"""
Maximum likelihood estimation of panel data models with interactive effects.
"""

__version__ = "0.1.0"

from .baselines import iterated_pc, within_group
from .config import DgpConfig, EmConfig
from .em import FitResult, e_step, fit_mle, fit_variant, m_step, normalize_identification
from .exceptions import (
    ConvergenceWarning,
    EstimationError,
    IdentificationError,
    IdentificationWarning,
    InterfxError,
    PanelDataError,
    SingularMatrixError,
)
from .inference import covariance_moment_form, covariance_trace_form, estimate_factors, foc_residuals
from .loader import load_panel
from .panel import PanelDataset, Theta, demean_panel, log_likelihood, sigma_zz_apply_inverse
from .restricted import (
    RestrictedSpec,
    concentrate_common_regressors,
    fit_observed_phi,
    fit_phi_and_common,
    fit_zero_restrictions,
)
from .selection import ic_value, select_r, select_r1_r2
from .simulation import McReport, generate_dgp, run_monte_carlo

__all__ = [
    "ConvergenceWarning",
    "DgpConfig",
    "EmConfig",
    "EstimationError",
    "FitResult",
    "IdentificationError",
    "IdentificationWarning",
    "InterfxError",
    "McReport",
    "PanelDataError",
    "PanelDataset",
    "RestrictedSpec",
    "SingularMatrixError",
    "Theta",
    "concentrate_common_regressors",
    "covariance_moment_form",
    "covariance_trace_form",
    "demean_panel",
    "e_step",
    "estimate_factors",
    "fit_mle",
    "fit_observed_phi",
    "fit_phi_and_common",
    "fit_variant",
    "fit_zero_restrictions",
    "foc_residuals",
    "generate_dgp",
    "ic_value",
    "iterated_pc",
    "load_panel",
    "log_likelihood",
    "m_step",
    "normalize_identification",
    "run_monte_carlo",
    "select_r",
    "select_r1_r2",
    "sigma_zz_apply_inverse",
    "within_group",
]
