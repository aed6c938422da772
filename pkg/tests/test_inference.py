"""
Tests for factor estimates, beta covariance forms and FOC residuals.
"""

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from instances import dense_sandwich, factor_panel, random_theta
from interfx.config import DgpConfig
from interfx.em import fit_mle, normalize_identification
from interfx.exceptions import SingularMatrixError
from interfx.inference import (
    covariance_moment_form,
    covariance_trace_form,
    estimate_factors,
    foc_components,
    foc_residuals,
)
from interfx.panel import BlockCov, Theta, demean_panel
from interfx.restricted import (
    concentrate_common_regressors,
    fit_observed_phi,
    fit_phi_and_common,
    fit_zero_restrictions,
)
from interfx.simulation import generate_dgp


class TestEstimateFactors:
    """Test cases for GLS factor estimates."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(40)
        self.data = factor_panel(self.rng, n=5, t=25, k=1, r=2)
        self.moments = demean_panel(self.data)

    def test_matches_dense_gls(self):
        """Test against (Gamma' S^-1 Gamma)^-1 Gamma' S^-1 B zdot_t."""
        theta = random_theta(self.rng, n=5, k=1, r=2)
        g = theta.gamma_matrix
        s_inv = np.linalg.inv(theta.sigma.dense())
        bz = self.moments.transformed(theta.beta).reshape(10, 25)
        expected = np.linalg.solve(g.T @ s_inv @ g, g.T @ s_inv @ bz).T
        assert_allclose(estimate_factors(theta, self.moments), expected, rtol=1e-10, atol=1e-12)

    def test_equal_weights(self):
        """Test unit loadings with identity variances give the cross-sectional mean."""
        theta = Theta(beta=np.zeros(1), gamma=np.ones((5, 2, 1)), sigma=BlockCov.identity(5, 1))
        expected = self.moments.zdot.reshape(10, 25).mean(axis=0)
        assert_allclose(estimate_factors(theta, self.moments)[:, 0], expected, atol=1e-12)

    def test_rank_deficient_loadings(self):
        """Test zero loadings raise SingularMatrixError."""
        theta = random_theta(self.rng, n=5, k=1, r=1)
        theta = theta.replace(gamma=np.zeros_like(theta.gamma))
        with pytest.raises(SingularMatrixError):
            estimate_factors(theta, self.moments)


class TestCovarianceForms:
    """Test cases for the trace and moment covariance forms."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(41)
        self.data = factor_panel(self.rng, n=6, t=20, k=2, r=1)
        self.moments = demean_panel(self.data)
        self.theta = random_theta(self.rng, n=6, k=2, r=1)
        self.f = self.rng.normal(size=(20, 1))

    def _dense_omega(self, basis):
        x = self.moments.zdot[:, 1:, :]
        w = np.diag(1.0 / self.theta.sigma.sigma_e)
        lam = self.theta.lambda_y
        mdd = w - w @ lam @ np.linalg.solve(lam.T @ w @ lam, lam.T @ w)
        q = scipy.linalg.orth(basis)
        m_f = np.eye(20) - q @ q.T
        omega = np.empty((2, 2))
        for a in range(2):
            for b in range(2):
                omega[a, b] = np.trace(mdd @ x[:, a, :] @ m_f @ x[:, b, :].T) / (6 * 20)
        return omega

    def test_trace_form_matches_dense(self):
        """Test the trace form against explicit projection matrices."""
        est = covariance_trace_form(self.theta, self.moments, self.f)
        expected = self._dense_omega(np.hstack([np.ones((20, 1)), self.f]))
        assert_allclose(est.omega_hat, expected, rtol=1e-10, atol=1e-12)
        assert_allclose(est.se_beta, np.sqrt(np.diag(np.linalg.inv(expected)) / 120), rtol=1e-8)

    def test_extra_basis(self):
        """Test an extra time basis is projected out as well."""
        extra = self.rng.normal(size=(20, 1))
        est = covariance_trace_form(self.theta, self.moments, self.f, extra_basis=extra)
        expected = self._dense_omega(np.hstack([np.ones((20, 1)), self.f, extra]))
        assert_allclose(est.omega_hat, expected, rtol=1e-10, atol=1e-12)

    def test_no_factor_reduction(self):
        """Test zero loadings and identity variances give tr(X_p X_q')/NT."""
        theta = Theta(beta=np.zeros(2), gamma=np.zeros((6, 3, 1)), sigma=BlockCov.identity(6, 2))
        est = covariance_trace_form(theta, self.moments, np.zeros((20, 0)))
        x = self.moments.zdot[:, 1:, :]
        assert_allclose(est.omega_hat, np.einsum("ipt,iqt->pq", x, x) / 120, rtol=1e-10)

    def test_moment_form_hand_example(self):
        """Test sigma_e = (1, 4) with identity Sigma_x gives 0.625 I."""
        theta = Theta(
            beta=np.zeros(2),
            gamma=np.zeros((2, 3, 0)),
            sigma=BlockCov(np.array([1.0, 4.0]), np.broadcast_to(np.eye(2), (2, 2, 2))),
        )
        assert_allclose(covariance_moment_form(theta, 10).omega_hat, 0.625 * np.eye(2))

    def test_moment_form(self):
        """Test Omega = mean of Sigma_ix / sigma_ie."""
        est = covariance_moment_form(self.theta, 20)
        sigma = self.theta.sigma
        expected = np.mean(sigma.sigma_x / sigma.sigma_e[:, None, None], axis=0)
        assert_allclose(est.omega_hat, expected, rtol=1e-12)
        assert est.n_obs == 120
        assert est.method == "moment_form"


class TestFocResiduals:
    """Test cases for first-order-condition residuals."""

    @classmethod
    def setup_class(cls):
        """Fit one design-1 panel for the class."""
        cls.data, _ = generate_dgp(DgpConfig(design="dgp1", n=40, t=60, seed=4))
        cls.moments = demean_panel(cls.data)
        cls.result = fit_mle(cls.data, 1)

    def test_small_at_estimate(self):
        """Test the residual is below tol_foc at the converged estimate."""
        assert self.result.converged
        assert foc_residuals(self.result.theta_hat, self.moments) <= 1e-6

    def test_large_after_perturbation(self):
        """Test perturbing beta gives a clearly nonzero residual."""
        theta = self.result.theta_hat
        perturbed = theta.replace(beta=theta.beta + 1e-2)
        assert foc_residuals(perturbed, self.moments) > 1e-4

    def test_invariant_to_normalization(self):
        """Test rescaling the factors and normalizing back gives the same residual."""
        theta = self.result.theta_hat
        mixed = theta.replace(gamma=-2.0 * theta.gamma, m_ff=np.array([[0.25]]))
        assert foc_residuals(mixed, self.moments) <= 1e-6
        normalized, _ = normalize_identification(mixed, np.zeros((60, 1)))
        assert foc_residuals(normalized, self.moments) == pytest.approx(
            foc_residuals(theta, self.moments), abs=1e-9
        )

    def test_loading_score_is_max_norm(self):
        """Test the loading part is the largest absolute entry of the dense score."""
        rng = np.random.default_rng(44)
        data = factor_panel(rng, n=4, t=30, k=1, r=2)
        moments = demean_panel(data)
        theta = random_theta(rng, n=4, k=1, r=2)
        inv = np.linalg.inv(theta.dense_sigma_zz())
        u = dense_sandwich(theta, moments) - theta.dense_sigma_zz()
        score = inv @ u @ inv @ theta.gamma_matrix @ theta.m_ff
        parts = foc_components(theta, moments)
        assert parts["gamma"] == pytest.approx(np.max(np.abs(score)), rel=1e-8)


class TestRestrictedFocResiduals:
    """Test cases for FOC residuals of the restricted models."""

    @classmethod
    def setup_class(cls):
        """Fit one panel per restricted model."""
        zero, _ = generate_dgp(DgpConfig(design="dgp2", n=40, t=60, seed=41))
        phi, _ = generate_dgp(DgpConfig(design="dgp3", n=40, t=60, seed=42))
        common, _ = generate_dgp(DgpConfig(design="dgp4", n=40, t=60, seed=43))
        cls.fits = {
            "zero_restrictions": (fit_zero_restrictions(zero, 1, 1), demean_panel(zero)),
            "observed_phi": (fit_observed_phi(phi, 1), demean_panel(phi)),
            "phi_and_common": (
                fit_phi_and_common(common, 1),
                demean_panel(concentrate_common_regressors(common)),
            ),
        }

    @pytest.mark.parametrize("name", ["zero_restrictions", "observed_phi", "phi_and_common"])
    def test_small_at_estimate(self, name):
        """Test the converged estimate has every residual below tol_foc."""
        result, moments = self.fits[name]
        assert result.converged
        assert foc_residuals(result.theta_hat, moments, result.variant) <= 1e-6

    @pytest.mark.parametrize("name", ["zero_restrictions", "observed_phi", "phi_and_common"])
    def test_large_after_perturbation(self, name):
        """Test perturbing beta gives a clearly nonzero residual."""
        result, moments = self.fits[name]
        theta = result.theta_hat
        perturbed = theta.replace(beta=theta.beta + 1e-2)
        assert foc_residuals(perturbed, moments, result.variant) > 1e-4


if __name__ == "__main__":
    pytest.main([__file__])
