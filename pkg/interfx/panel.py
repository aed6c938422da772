"""
Panel data model, demeaned moments and block covariance algebra.

The model for unit ``i`` and period ``t`` is

    (I_N kron B) z_t = mu + Gamma f_t + eps_t,   z_it = (y_it, x_it')'

with ``B`` unit upper-triangular (first row ``(1, -beta')``), ``Gamma`` stacked from
per-unit ``(K+1) x r`` blocks and a block-diagonal ``Sigma_ee`` whose blocks are
``diag(sigma_e_i, Sigma_x_i)``.  Arrays indexed by series use the layout
``(N, K+1, ...)``; flattening gives the unit-major ``N(K+1)`` ordering.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray
from typing_extensions import Literal

from .exceptions import IdentificationError, PanelDataError, SingularMatrixError

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 500
SINGULAR_RTOL = 1e-12


def symmetrize(a: NDArray) -> NDArray:
    """(A + A') / 2 over the last two axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _inv_stack(a: NDArray) -> NDArray:
    if a.shape[-1] == 0:
        return a.copy()
    return symmetrize(np.linalg.inv(a))


def b_matrix(beta: NDArray) -> NDArray:
    """The (K+1) x (K+1) transform mapping z_it to (y_it - x_it'beta, x_it')'."""
    beta = np.asarray(beta, dtype=float)
    b = np.eye(beta.size + 1)
    b[0, 1:] = -beta
    return b


def _first_bad_index(a: NDArray) -> Tuple[int, ...]:
    bad = np.argwhere(~np.isfinite(a))
    return tuple(int(v) for v in bad[0])


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """
    A balanced panel.

    Attributes:
        y: Dependent variable, N x T
        x: Regressors, N x T x K (K may be zero)
        phi_observed: Observed time-invariant loadings, N x r2
        d_observed: Observed common regressors, T x r3
    """

    y: NDArray
    x: NDArray
    phi_observed: Optional[NDArray] = None
    d_observed: Optional[NDArray] = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.ndim != 2:
            raise PanelDataError(f"y must be N x T, got shape {y.shape}")
        n, t = y.shape
        x = np.array(self.x, dtype=float) if self.x is not None else np.zeros((n, t, 0))
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[:2] != (n, t):
            raise PanelDataError(f"x must be {n} x {t} x K, got shape {x.shape}")
        if n < 1:
            raise PanelDataError("panel has no units")
        if t < 2:
            raise PanelDataError(f"need at least 2 periods, got {t}")

        if not np.all(np.isfinite(y)):
            i, s = _first_bad_index(y)
            raise PanelDataError(f"non-finite y at unit {i}, period {s}", index=(i, s))
        if not np.all(np.isfinite(x)):
            i, s, k = _first_bad_index(x)
            raise PanelDataError(
                f"non-finite x{k + 1} at unit {i}, period {s}", index=(i, s)
            )

        phi = self._check_side(self.phi_observed, n, "phi_observed", "units")
        d = self._check_side(self.d_observed, t, "d_observed", "periods")

        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "phi_observed", phi)
        object.__setattr__(self, "d_observed", d)

    @staticmethod
    def _check_side(a: Optional[NDArray], rows: int, name: str, what: str) -> Optional[NDArray]:
        if a is None:
            return None
        a = np.array(a, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] != rows:
            raise PanelDataError(f"{name} must have one row per {what} ({rows}), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise PanelDataError(f"non-finite entry in {name}", index=_first_bad_index(a))
        rank = np.linalg.matrix_rank(a)
        if rank < a.shape[1]:
            raise IdentificationError(
                f"{name} has rank {rank} but {a.shape[1]} columns; full column rank required"
            )
        return a

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[2]

    @property
    def n_series(self) -> int:
        return self.n_regressors + 1

    def stacked(self) -> NDArray:
        """z as an (N, K+1, T) array."""
        return np.concatenate([self.y[:, None, :], np.moveaxis(self.x, 2, 1)], axis=1)

    def permute_units(self, order: NDArray) -> "PanelDataset":
        order = np.asarray(order)
        phi = None if self.phi_observed is None else self.phi_observed[order]
        return replace(self, y=self.y[order], x=self.x[order], phi_observed=phi)


VariantName = Literal["basic", "zero_restrictions", "observed_phi", "phi_and_common"]


@dataclass(frozen=True, eq=False)
class ModelVariant:
    """
    Loading restrictions defining which likelihood is maximized.

    Factors are ordered (g, h): the first ``r1`` columns are unrestricted, the trailing
    ``r2`` columns have their y-equation loadings pinned, at zero when ``phi`` is None
    and at the observed ``phi`` otherwise.  The basic model is ``r2 == 0``.
    """

    name: VariantName = "basic"
    r1: int = 0
    r2: int = 0
    phi: Optional[NDArray] = None

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError(f"factor counts must be non-negative, got r1={self.r1}, r2={self.r2}")
        if self.phi is not None:
            phi = np.array(self.phi, dtype=float)
            if phi.ndim == 1:
                phi = phi[:, None]
            if phi.shape[1] != self.r2:
                raise ValueError(f"phi has {phi.shape[1]} columns but r2={self.r2}")
            object.__setattr__(self, "phi", phi)

    @classmethod
    def basic(cls, r: int) -> "ModelVariant":
        return cls(name="basic", r1=r, r2=0)

    @property
    def n_factors(self) -> int:
        return self.r1 + self.r2

    @property
    def free_m_ff(self) -> bool:
        """M_ff is estimated only when observed loadings fix the scale of h."""
        return self.phi is not None and self.r2 > 0

    @property
    def y_factors(self) -> int:
        """Number of factors entering the y equation."""
        return self.r1 + (self.r2 if self.phi is not None else 0)

    @property
    def g_cols(self) -> List[int]:
        return list(range(self.r1))

    def pinned_values(self, n_units: int) -> NDArray:
        if self.phi is None:
            return np.zeros((n_units, self.r2))
        if self.phi.shape[0] != n_units:
            raise ValueError(f"phi has {self.phi.shape[0]} rows for {n_units} units")
        return self.phi


@dataclass(frozen=True, eq=False)
class BlockCov:
    """
    Block-diagonal idiosyncratic covariance.

    Unit ``i`` has block ``diag(sigma_e[i], sigma_x[i])``; the e/v cross covariance
    is identically zero.
    """

    sigma_e: NDArray
    sigma_x: NDArray

    def __post_init__(self):
        sigma_e = np.array(self.sigma_e, dtype=float).reshape(-1)
        sigma_x = np.array(self.sigma_x, dtype=float)
        if sigma_x.ndim != 3 or sigma_x.shape[0] != sigma_e.size or sigma_x.shape[1] != sigma_x.shape[2]:
            raise ValueError(f"sigma_x must be N x K x K, got {sigma_x.shape}")
        if np.any(sigma_e <= 0):
            raise ValueError("sigma_e must be positive")
        object.__setattr__(self, "sigma_e", sigma_e)
        object.__setattr__(self, "sigma_x", symmetrize(sigma_x))

    @classmethod
    def identity(cls, n_units: int, n_regressors: int) -> "BlockCov":
        return cls(np.ones(n_units), np.tile(np.eye(n_regressors), (n_units, 1, 1)))

    @classmethod
    def from_blocks(cls, blocks: NDArray) -> "BlockCov":
        """Apply the Dg operator: keep the e entry and the x block, drop the cross terms."""
        blocks = symmetrize(np.asarray(blocks, dtype=float))
        return cls(blocks[:, 0, 0].copy(), blocks[:, 1:, 1:].copy())

    @property
    def n_units(self) -> int:
        return self.sigma_e.size

    @property
    def n_regressors(self) -> int:
        return self.sigma_x.shape[1]

    def blocks(self) -> NDArray:
        n, k = self.n_units, self.n_regressors
        out = np.zeros((n, k + 1, k + 1))
        out[:, 0, 0] = self.sigma_e
        out[:, 1:, 1:] = self.sigma_x
        return out

    def inverse_blocks(self) -> NDArray:
        n, k = self.n_units, self.n_regressors
        out = np.zeros((n, k + 1, k + 1))
        out[:, 0, 0] = 1.0 / self.sigma_e
        out[:, 1:, 1:] = _inv_stack(self.sigma_x)
        return out

    def log_det(self) -> float:
        total = float(np.sum(np.log(self.sigma_e)))
        if self.n_regressors:
            sign, logdet = np.linalg.slogdet(self.sigma_x)
            if np.any(sign <= 0):
                raise SingularMatrixError("a Sigma_x block is not positive definite")
            total += float(np.sum(logdet))
        return total

    def dense(self) -> NDArray:
        return scipy.linalg.block_diag(*self.blocks())

    @classmethod
    def from_blocks_clamped(cls, blocks: NDArray, floor: float, bound: float) -> Tuple["BlockCov", int]:
        """
        Dg followed by eigenvalue clamping into [floor, bound].

        Returns the covariance and the number of blocks that needed clamping.
        """
        blocks = symmetrize(np.asarray(blocks, dtype=float))
        raw_e = blocks[:, 0, 0]
        sigma_e = np.clip(raw_e, floor, bound)
        n_clamped = int(np.sum(sigma_e != raw_e))
        sigma_x = blocks[:, 1:, 1:].copy()
        if sigma_x.shape[1]:
            w, v = np.linalg.eigh(sigma_x)
            clipped = np.clip(w, floor, bound)
            hit = np.any(clipped != w, axis=1)
            if np.any(hit):
                sigma_x[hit] = np.einsum("nij,nj,nkj->nik", v[hit], clipped[hit], v[hit])
                n_clamped += int(np.sum(hit))
        return cls(sigma_e, sigma_x), n_clamped


@dataclass(frozen=True, eq=False)
class Theta:
    """
    Full parameter state.

    Attributes:
        beta: Slope coefficients, length K
        gamma: Loadings, N x (K+1) x r; ``gamma[i]`` is the transpose of (lambda_i, gamma_ix)
        sigma: Idiosyncratic block covariance
        m_ff: Factor second moment, r x r
    """

    beta: NDArray
    gamma: NDArray
    sigma: BlockCov
    m_ff: Optional[NDArray] = None

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        gamma = np.array(self.gamma, dtype=float)
        if gamma.ndim != 3:
            raise ValueError(f"gamma must be N x (K+1) x r, got {gamma.shape}")
        n, p, r = gamma.shape
        if p != beta.size + 1:
            raise ValueError(f"gamma blocks have {p} rows but beta has {beta.size} entries")
        if self.sigma.n_units != n or self.sigma.n_regressors != beta.size:
            raise ValueError("sigma dimensions do not match gamma")
        m_ff = np.eye(r) if self.m_ff is None else symmetrize(np.array(self.m_ff, dtype=float))
        if m_ff.shape != (r, r):
            raise ValueError(f"m_ff must be {r} x {r}, got {m_ff.shape}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "m_ff", m_ff)

    @property
    def n_units(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.beta.size

    @property
    def n_factors(self) -> int:
        return self.gamma.shape[2]

    @property
    def gamma_matrix(self) -> NDArray:
        """Loadings as an N(K+1) x r matrix."""
        n, p, r = self.gamma.shape
        return self.gamma.reshape(n * p, r)

    @property
    def lambda_y(self) -> NDArray:
        """y-equation loadings, N x r."""
        return self.gamma[:, 0, :]

    def b(self) -> NDArray:
        return b_matrix(self.beta)

    def replace(self, **changes) -> "Theta":
        return replace(self, **changes)

    def dense_sigma_zz(self, cap: int = DEFAULT_DENSE_CAP) -> NDArray:
        """Assemble Gamma M_ff Gamma' + Sigma_ee explicitly (small problems only)."""
        size = self.gamma_matrix.shape[0]
        if size > cap:
            raise ValueError(f"refusing to assemble a {size} x {size} covariance (cap {cap})")
        g = self.gamma_matrix
        return symmetrize(g @ self.m_ff @ g.T + self.sigma.dense())


@dataclass(frozen=True, eq=False)
class Moments:
    """
    Demeaned second moments M_zz = (1/T) Zdot Zdot'.

    ``zdot`` is always kept (N x (K+1) x T); the dense N(K+1) square matrix is kept
    only when it fits under the configured cap.
    """

    zdot: NDArray
    m_zz: Optional[NDArray] = None

    @property
    def n_units(self) -> int:
        return self.zdot.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.zdot.shape[1] - 1

    @property
    def n_periods(self) -> int:
        return self.zdot.shape[2]

    def block(self, i: int, j: int) -> NDArray:
        if self.m_zz is not None:
            p = self.zdot.shape[1]
            return self.m_zz[i * p:(i + 1) * p, j * p:(j + 1) * p]
        return self.zdot[i] @ self.zdot[j].T / self.n_periods

    def transformed(self, beta: NDArray) -> NDArray:
        """(I kron B) Zdot as an (N, K+1, T) array."""
        bz = self.zdot.copy()
        if self.n_regressors:
            bz[:, 0, :] -= np.einsum("ikt,k->it", self.zdot[:, 1:, :], beta)
        return bz

    def sandwich_blocks(self, beta: NDArray) -> NDArray:
        """Diagonal blocks of (I kron B) M_zz (I kron B'), shape (N, K+1, K+1)."""
        bz = self.transformed(beta)
        return symmetrize(np.einsum("iat,ibt->iab", bz, bz) / self.n_periods)

    def dense_sandwich(self, beta: NDArray, cap: int = DEFAULT_DENSE_CAP) -> NDArray:
        bz = self.transformed(beta).reshape(-1, self.n_periods)
        if bz.shape[0] > cap:
            raise ValueError(f"refusing to assemble a {bz.shape[0]} square moment matrix (cap {cap})")
        return symmetrize(bz @ bz.T / self.n_periods)


def demean_panel(data: PanelDataset, dense_cap: int = DEFAULT_DENSE_CAP) -> Moments:
    """
    Time-demean every series and form M_zz.

    Unit intercepts in y and x drop out exactly.
    """
    z = data.stacked()
    zdot = z - z.mean(axis=2, keepdims=True)
    return moments_from_zdot(zdot, dense_cap)


def moments_from_zdot(zdot: NDArray, dense_cap: int = DEFAULT_DENSE_CAP) -> Moments:
    n, p, t = zdot.shape
    m_zz = None
    if n * p <= dense_cap:
        flat = zdot.reshape(n * p, t)
        m_zz = symmetrize(flat @ flat.T / t)
    return Moments(zdot=zdot, m_zz=m_zz)


class SigmaZzFactor:
    """
    Woodbury representation of Sigma_zz = Gamma M Gamma' + Sigma_ee.

    Precomputes A = Sigma_ee^{-1} Gamma, Q = Gamma' A and G = (M^{-1} + Q)^{-1}, so that
    Sigma_zz^{-1} = Sigma_ee^{-1} - A G A'.
    """

    def __init__(self, theta: Theta):
        self.theta = theta
        self.sigma_inv = theta.sigma.inverse_blocks()
        r = theta.n_factors
        self.a = np.einsum("iab,ibr->iar", self.sigma_inv, theta.gamma)
        self.q = symmetrize(np.einsum("iar,ias->rs", theta.gamma, self.a))

        if r == 0:
            self.g = np.zeros((0, 0))
            self.m_inv = np.zeros((0, 0))
            self._logdet_low_rank = 0.0
            return

        sign, logdet_m = np.linalg.slogdet(theta.m_ff)
        if sign <= 0:
            raise SingularMatrixError("M_ff is not positive definite")
        self.m_inv = symmetrize(np.linalg.inv(theta.m_ff))
        core = symmetrize(self.m_inv + self.q)
        eigvals = np.linalg.eigvalsh(core)
        if eigvals[0] <= SINGULAR_RTOL * max(1.0, abs(eigvals[-1])):
            raise SingularMatrixError(
                f"G^-1 = M_ff^-1 + Gamma' Sigma^-1 Gamma is singular "
                f"(smallest eigenvalue {eigvals[0]:.3e})",
                smallest_eigenvalue=float(eigvals[0]),
            )
        chol = scipy.linalg.cho_factor(core, lower=True)
        self.g = symmetrize(scipy.linalg.cho_solve(chol, np.eye(r)))
        self._logdet_low_rank = float(logdet_m + 2.0 * np.sum(np.log(np.diag(chol[0]))))

    @property
    def log_det(self) -> float:
        """ln|Sigma_zz| by the matrix determinant lemma."""
        return self.theta.sigma.log_det() + self._logdet_low_rank

    def apply_inverse(self, v: NDArray) -> NDArray:
        v = np.asarray(v, dtype=float)
        n, p, r = self.a.shape
        if v.shape[0] != n * p:
            raise ValueError(f"expected {n * p} rows, got {v.shape[0]}")
        vec = v.ndim == 1
        blocks = v.reshape(n, p, -1)
        out = np.einsum("iab,ibm->iam", self.sigma_inv, blocks)
        if r:
            atv = np.einsum("iar,iam->rm", self.a, blocks)
            out = out - np.einsum("iar,rm->iam", self.a, self.g @ atv)
        out = out.reshape(n * p, -1)
        return out[:, 0] if vec else out

    def inverse_gamma(self) -> NDArray:
        """Sigma_zz^{-1} Gamma M_ff = A G, shape (N, K+1, r)."""
        return np.einsum("iar,rs->ias", self.a, self.g)


def sigma_zz_apply_inverse(theta: Theta, v: NDArray) -> NDArray:
    """Return Sigma_zz^{-1} v without forming Sigma_zz."""
    return SigmaZzFactor(theta).apply_inverse(v)


def log_likelihood(theta: Theta, moments: Moments, factor: Optional[SigmaZzFactor] = None) -> float:
    """
    Average log-likelihood of the demeaned panel.

    -(1/2N) ln|Sigma_zz| - (1/2N) tr[(I kron B) M_zz (I kron B') Sigma_zz^{-1}];
    det(I kron B) = 1 so no Jacobian term appears.
    """
    factor = factor or SigmaZzFactor(theta)
    n, t = moments.n_units, moments.n_periods
    bz = moments.transformed(theta.beta).reshape(-1, t)
    trace = float(np.sum(bz * factor.apply_inverse(bz))) / t
    return -(factor.log_det + trace) / (2.0 * n)
