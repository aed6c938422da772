"""
End-to-end estimation from files: load, choose factor numbers, fit, report.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple, Union

from typing_extensions import Literal

from .config import EmConfig
from .em import FitResult, fit_mle
from .inference import covariance_moment_form
from .loader import PanelLoader
from .panel import PanelDataset
from .report import ReportWriter
from .restricted import fit_observed_phi, fit_phi_and_common, fit_zero_restrictions
from .selection import DEFAULT_R_MAX, IcPath, information_criteria, select_r1_r2

logger = logging.getLogger(__name__)

ModelName = Literal["basic", "zero", "phi", "phi-common"]
FactorCount = Union[int, Literal["auto"]]


@dataclass
class EstimationConfig:
    """Configuration for estimating one model from files."""

    panel_path: str
    model: ModelName = "basic"
    r: FactorCount = "auto"
    r1: FactorCount = "auto"
    r2: FactorCount = "auto"
    phi_path: Optional[str] = None
    common_path: Optional[str] = None
    se_method: Literal["trace", "moment"] = "trace"
    out_path: Optional[str] = None
    tol: float = 1e-8
    max_iters: int = 3000
    seed: int = 0
    r_max: int = DEFAULT_R_MAX

    def __post_init__(self):
        if self.model not in ("basic", "zero", "phi", "phi-common"):
            raise ValueError(f"unknown model '{self.model}'")
        if self.model in ("phi", "phi-common") and not self.phi_path:
            raise ValueError(f"--model {self.model} requires --phi <path>")
        if self.model == "phi-common" and not self.common_path:
            raise ValueError("--model phi-common requires --common <path>")
        if self.se_method not in ("trace", "moment"):
            raise ValueError(f"unknown standard-error method '{self.se_method}'")
        if self.se_method == "moment" and self.model != "basic":
            raise ValueError("moment-form standard errors are only available for the basic model")
        for name in ("r", "r1", "r2"):
            value = getattr(self, name)
            if value != "auto" and (not isinstance(value, int) or value < 0):
                raise ValueError(f"{name} must be a non-negative integer or 'auto', got {value!r}")

    def em_config(self) -> EmConfig:
        return EmConfig(max_iters=self.max_iters, tol_param=self.tol, seed=self.seed)


class PanelEstimator:
    """
    Orchestrates one estimation run.

    1. Loads the panel and its side files
    2. Chooses factor numbers where they are set to ``auto``
    3. Fits the requested model
    4. Computes standard errors
    5. Writes the report
    """

    def __init__(self, config: EstimationConfig):
        self.config = config
        self.loader = PanelLoader()
        self.writer = ReportWriter()
        self.em_cfg = config.em_config()

    def run(self) -> Dict[str, Any]:
        """
        Execute every step.

        Returns:
            Dict with the fit, the selection table (or None) and the report path
        """
        cfg = self.config
        logger.info("Step 1: loading %s", cfg.panel_path)
        data = self.loader.load(
            cfg.panel_path,
            cfg.phi_path if cfg.model in ("phi", "phi-common") else None,
            cfg.common_path if cfg.model == "phi-common" else None,
        )

        logger.info("Step 2: choosing factor numbers")
        (r1, r2), path = self._factor_counts(data)

        logger.info("Step 3: fitting the %s model with r1=%d r2=%d", cfg.model, r1, r2)
        fit = self._fit(data, r1, r2)

        logger.info("Step 4: standard errors (%s form)", cfg.se_method)
        if cfg.se_method == "moment" and data.n_regressors:
            covariance = covariance_moment_form(fit.theta_hat, data.n_periods)
            fit = replace(fit, se_beta=covariance.se_beta, covariance=covariance)

        selection = path.to_frame() if path is not None else None
        report_path = None
        if cfg.out_path:
            logger.info("Step 5: writing %s", cfg.out_path)
            meta = {
                "model": cfg.model,
                "n": data.n_units,
                "t": data.n_periods,
                "k": data.n_regressors,
                "se_method": cfg.se_method,
                "r_selected": path.r_hat if path is not None else None,
            }
            content = self.writer.estimation_report(fit, meta, selection)
            report_path = self.writer.write(content, cfg.out_path)

        return {
            "model": cfg.model,
            "fit": fit,
            "selection": selection,
            "report_path": report_path,
            "converged": fit.converged,
        }

    def _observed_count(self, data: PanelDataset) -> int:
        count = 0
        if data.phi_observed is not None:
            count += data.phi_observed.shape[1]
        if self.config.model == "phi-common" and data.d_observed is not None:
            count += data.d_observed.shape[1]
        return count

    def _factor_counts(self, data: PanelDataset) -> Tuple[Tuple[int, int], Optional[IcPath]]:
        cfg = self.config
        if cfg.model == "basic":
            if cfg.r != "auto":
                return (int(cfg.r), 0), None
            path = information_criteria(data, cfg.r_max, self.em_cfg)
            return (path.r_hat, 0), path

        if cfg.model == "zero":
            if cfg.r1 != "auto" and cfg.r2 != "auto":
                return (int(cfg.r1), int(cfg.r2)), None
            path = information_criteria(data, cfg.r_max, self.em_cfg)
            r1, r2 = select_r1_r2(data, self.em_cfg, cfg.r_max, path=path)
            if cfg.r1 != "auto":
                r1, r2 = int(cfg.r1), max(path.r_hat - int(cfg.r1), 0)
            elif cfg.r2 != "auto":
                r1, r2 = max(path.r_hat - int(cfg.r2), 0), int(cfg.r2)
            return (r1, r2), path

        # observed loadings and common regressors count towards the total
        observed = self._observed_count(data)
        r2 = data.phi_observed.shape[1]
        if cfg.r1 != "auto":
            return (int(cfg.r1), r2), None
        path = information_criteria(data, cfg.r_max, self.em_cfg)
        return (max(path.r_hat - observed, 0), r2), path

    def _fit(self, data: PanelDataset, r1: int, r2: int) -> FitResult:
        model = self.config.model
        if model == "basic":
            return fit_mle(data, r1, self.em_cfg)
        if model == "zero":
            return fit_zero_restrictions(data, r1, r2, self.em_cfg)
        if model == "phi":
            return fit_observed_phi(data, r1, self.em_cfg)
        return fit_phi_and_common(data, r1, self.em_cfg)
