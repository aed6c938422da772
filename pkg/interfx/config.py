"""
Configuration objects shared by the estimators.
"""

import logging
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple

from typing_extensions import Literal

if TYPE_CHECKING:
    from .panel import Theta

logger = logging.getLogger(__name__)

InitMethod = Literal["iterated_pc", "random", "user"]

THREADS_ENV_VAR = "INTERFX_THREADS"


@dataclass
class EmConfig:
    """
    Settings for the ECM fit.

    Attributes:
        max_iters: Maximum number of ECM sweeps
        tol_param: Stop once the max-norm change of (beta, Gamma, Sigma, M_ff) falls below this
        tol_foc: First-order-condition residual required to certify convergence
        init: Starting values: iterated PC, random draw (uses ``seed``) or ``init_theta``
        seed: Seed for random initialization and warm-start padding
        init_theta: Starting Theta when ``init == "user"``
        eig_bound: Eigenvalues of each Sigma_ii block are clamped into [var_floor, eig_bound]
        var_floor: Smallest admissible idiosyncratic variance
        dense_cap: Moments keep a dense N(K+1) x N(K+1) copy only up to this size
        pc_max_iters: Iteration cap for the iterated PC initializer
        pc_tol: Tolerance for the iterated PC initializer
    """

    max_iters: int = 3000
    tol_param: float = 1e-8
    tol_foc: float = 1e-6
    init: InitMethod = "iterated_pc"
    seed: Optional[int] = None
    init_theta: Optional["Theta"] = None
    eig_bound: float = 1e6
    var_floor: float = 1e-8
    dense_cap: int = 500
    pc_max_iters: int = 500
    pc_tol: float = 1e-9

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.tol_param <= 0 or self.tol_foc <= 0:
            raise ValueError("tolerances must be positive")
        if self.init not in ("iterated_pc", "random", "user"):
            raise ValueError(f"unknown init method '{self.init}'")
        if self.init == "user" and self.init_theta is None:
            raise ValueError("init='user' requires init_theta")
        if not 0 < self.var_floor < self.eig_bound:
            raise ValueError("need 0 < var_floor < eig_bound")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, then INTERFX_THREADS, then the number of cores."""
    if threads is not None:
        if threads < 1:
            raise ValueError(f"threads must be at least 1, got {threads}")
        return threads

    env_value = os.getenv(THREADS_ENV_VAR)
    if env_value:
        try:
            value = int(env_value)
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV_VAR, env_value)
        else:
            if value >= 1:
                return value
            logger.warning("Ignoring non-positive %s=%r", THREADS_ENV_VAR, env_value)

    return os.cpu_count() or 1


DesignName = Literal["dgp1", "dgp2", "dgp3", "dgp4"]
ErrorDist = Literal["chisq2_normalized", "normal", "student_t"]


@dataclass(frozen=True)
class DgpConfig:
    """
    Simulation design.

    Attributes:
        design: dgp1 (one factor), dgp2 (extra factor absent from y), dgp3 (observed phi),
            dgp4 (observed phi and common regressor)
        n: Number of units
        t: Number of periods
        beta_true: Slope coefficients; K = len(beta_true)
        error_dist: Distribution of the standardized error draws
        df: Degrees of freedom for ``student_t``
        u: Heteroscedasticity shares are drawn from U[u, 1 - u]
        seed: Seed for all draws
        noise_scale: Multiplier on the idiosyncratic errors (0 gives noiseless data)
    """

    design: DesignName = "dgp1"
    n: int = 50
    t: int = 75
    beta_true: Tuple[float, ...] = (1.0, 2.0)
    error_dist: ErrorDist = "chisq2_normalized"
    df: float = 5.0
    u: float = 0.1
    seed: int = 0
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.design not in ("dgp1", "dgp2", "dgp3", "dgp4"):
            raise ValueError(f"unknown design '{self.design}'")
        if self.n < 2 or self.t < 2:
            raise ValueError(f"need n, t >= 2, got n={self.n}, t={self.t}")
        if not 0 < self.u < 0.5:
            raise ValueError(f"u must lie in (0, 0.5), got {self.u}")
        if self.error_dist not in ("chisq2_normalized", "normal", "student_t"):
            raise ValueError(f"unknown error distribution '{self.error_dist}'")
        if self.error_dist == "student_t" and self.df <= 2:
            raise ValueError(f"student_t errors need df > 2 for unit variance, got {self.df}")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))

    @property
    def n_regressors(self) -> int:
        return len(self.beta_true)
