"""
Within-group and iterated principal components estimators.

Both serve as comparison estimators in the simulations; iterated PC also supplies
starting values for the ECM fit.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from typing_extensions import Literal

from .exceptions import ConvergenceWarning, PanelDataError, SingularMatrixError
from .panel import PanelDataset

logger = logging.getLogger(__name__)


@dataclass
class BaselineResult:
    """
    Output of a baseline estimator.

    Attributes:
        beta_hat: Slope estimates, length K
        method: "wg" or "iterated_pc"
        pc_factors: T x r factors with F'F/T = I (iterated PC only)
        pc_loadings: N x r loadings (iterated PC only)
        n_iters: Iterations used
        converged: False when iterated PC hit its iteration cap
        objective_trace: Sum of squared residuals after each factor extraction
    """

    beta_hat: NDArray
    method: Literal["wg", "iterated_pc"]
    pc_factors: Optional[NDArray] = None
    pc_loadings: Optional[NDArray] = None
    n_iters: int = 1
    converged: bool = True
    objective_trace: List[float] = field(default_factory=list)


def _demeaned(data: PanelDataset) -> Tuple[NDArray, NDArray]:
    y = data.y - data.y.mean(axis=1, keepdims=True)
    x = data.x - data.x.mean(axis=1, keepdims=True)
    return y, x


def _least_squares(x: NDArray, y: NDArray) -> NDArray:
    """Pooled LS of y (N x T) on x (N x T x K)."""
    return _least_squares_projected(x, x, y)


def sign_columns(a: NDArray) -> NDArray:
    """Sign flips making the largest-magnitude entry of each column positive."""
    if a.shape[1] == 0:
        return np.ones(0)
    idx = np.argmax(np.abs(a), axis=0)
    signs = np.sign(a[idx, np.arange(a.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def principal_components(w: NDArray, r: int) -> Tuple[NDArray, NDArray]:
    """
    Extract r principal components from an N x T matrix.

    Returns (F, Lambda) with F'F/T = I_r and Lambda = W F / T.
    """
    n, t = w.shape
    if r == 0:
        return np.zeros((t, 0)), np.zeros((n, 0))
    _, _, vt = np.linalg.svd(w, full_matrices=False)
    f = np.sqrt(t) * vt[:r].T
    f = f * sign_columns(f)
    return f, w @ f / t


def within_group(data: PanelDataset) -> BaselineResult:
    """Fixed-effects (within) estimator: LS after removing unit means."""
    if data.n_regressors < 1:
        raise PanelDataError("within-group estimation needs at least one regressor")
    y, x = _demeaned(data)
    return BaselineResult(beta_hat=_least_squares(x, y), method="wg")


def iterated_pc(
    data: PanelDataset,
    r: int,
    max_iters: int = 500,
    tol: float = 1e-9,
) -> BaselineResult:
    """
    Iterated principal components estimator.

    Alternates principal components extraction of r factors from ydot - xdot beta with
    least squares for beta on the factor-projected data, starting from the within
    estimate, until beta moves less than ``tol``.

    Args:
        data: Panel
        r: Number of factors in the y equation
        max_iters: Iteration cap
        tol: Max-norm tolerance on the change in beta

    Returns:
        BaselineResult with factors normalized so that F'F/T = I
    """
    n, t, k = data.n_units, data.n_periods, data.n_regressors
    if not 0 <= r < min(n, t):
        raise ValueError(f"need 0 <= r < min(N, T) = {min(n, t)}, got r={r}")

    y, x = _demeaned(data)
    beta = _least_squares(x, y) if k else np.zeros(0)
    trace: List[float] = []
    converged = False
    n_iters = 0

    for n_iters in range(1, max_iters + 1):
        resid = y - np.einsum("itk,k->it", x, beta)
        f, lam = principal_components(resid, r)
        trace.append(float(np.sum((resid - lam @ f.T) ** 2)))
        if not k:
            converged = True
            break

        # M_F applied along time for every series
        y_mf = y - (y @ f) @ f.T / t
        x_mf = x - np.einsum("isk,qs->iqk", np.einsum("itk,ts->isk", x, f), f) / t
        beta_new = _least_squares_projected(x_mf, x, y_mf)
        change = float(np.max(np.abs(beta_new - beta)))
        beta = beta_new
        logger.debug("iterated PC iteration %d: ssr=%.10g change=%.3e", n_iters, trace[-1], change)
        if change < tol:
            converged = True
            break

    resid = y - np.einsum("itk,k->it", x, beta)
    f, lam = principal_components(resid, r)

    if not converged:
        message = f"iterated PC did not converge in {max_iters} iterations"
        logger.warning(message)
        warnings.warn(message, ConvergenceWarning, stacklevel=2)

    return BaselineResult(
        beta_hat=beta,
        method="iterated_pc",
        pc_factors=f,
        pc_loadings=lam,
        n_iters=n_iters,
        converged=converged,
        objective_trace=trace,
    )


def _least_squares_projected(x_mf: NDArray, x: NDArray, y_mf: NDArray) -> NDArray:
    # M_F is idempotent, so x' M_F x = (M_F x)' x and x' M_F y = (M_F x)' y
    xx = np.einsum("itk,itl->kl", x_mf, x)
    xy = np.einsum("itk,it->k", x_mf, y_mf)
    xx = 0.5 * (xx + xx.T)
    rank = np.linalg.matrix_rank(xx)
    if rank < xx.shape[0]:
        raise SingularMatrixError(f"projected regressor Gram has rank {rank}", rank=int(rank))
    return np.linalg.solve(xx, xy)
