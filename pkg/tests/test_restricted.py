"""
Tests for the zero-restrictions, observed-loading and common-regressor models.
"""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from interfx.config import DgpConfig
from interfx.em import fit_mle
from interfx.exceptions import IdentificationError, PanelDataError
from interfx.panel import PanelDataset
from interfx.restricted import (
    RestrictedSpec,
    common_basis,
    concentrate_common_regressors,
    fit_observed_phi,
    fit_phi_and_common,
    fit_zero_restrictions,
)
from interfx.simulation import generate_dgp


class TestZeroRestrictions:
    """Test cases for the model with factors absent from y."""

    @classmethod
    def setup_class(cls):
        """Fit one design-2 panel for the class."""
        cls.data, _ = generate_dgp(DgpConfig(design="dgp2", n=50, t=75, seed=31))
        cls.result = fit_zero_restrictions(cls.data, 1, 1)

    def test_beta_close_to_truth(self):
        """Test beta_hat is within 0.01 of (1, 2)."""
        assert_allclose(self.result.beta_hat, [1.0, 2.0], atol=0.01)

    def test_restricted_loadings_are_zero(self):
        """Test the y loadings on h are exactly zero."""
        assert np.all(self.result.theta_hat.lambda_y[:, 1] == 0.0)

    def test_converged(self):
        """Test convergence including the restricted-model identity."""
        assert self.result.converged
        assert self.result.foc_parts["identity"] <= 1e-6

    def test_likelihood_trace_monotone(self):
        """Test the log-likelihood never falls across sweeps."""
        assert np.all(np.diff(self.result.loglik_trace) >= -1e-10)

    def test_normalization(self):
        """Test M_ff = I at the estimate."""
        assert_allclose(self.result.theta_hat.m_ff, np.eye(2))

    def test_no_restricted_factors_is_basic_fit(self):
        """Test r2 = 0 reproduces the basic fit exactly."""
        data, _ = generate_dgp(DgpConfig(design="dgp1", n=20, t=30, seed=2))
        assert np.array_equal(fit_zero_restrictions(data, 1, 0).beta_hat, fit_mle(data, 1).beta_hat)

    def test_negative_counts_rejected(self):
        """Test negative factor counts are rejected."""
        with pytest.raises(ValueError):
            fit_zero_restrictions(self.data, 1, -1)


class TestObservedPhi:
    """Test cases for the model with observed loadings."""

    @classmethod
    def setup_class(cls):
        """Fit one design-3 panel for the class."""
        cls.data, cls.truth = generate_dgp(DgpConfig(design="dgp3", n=50, t=75, seed=32))
        cls.result = fit_observed_phi(cls.data, 1)

    def test_beta_close_to_truth(self):
        """Test beta_hat is within 0.02 of (1, 2)."""
        assert_allclose(self.result.beta_hat, [1.0, 2.0], atol=0.02)

    def test_observed_loadings_kept(self):
        """Test the y loadings on h equal phi exactly."""
        assert np.array_equal(self.result.theta_hat.lambda_y[:, 1], self.data.phi_observed[:, 0])

    def test_normalization(self):
        """Test M_gg = I and M_gh = 0 with M_hh positive."""
        m = self.result.theta_hat.m_ff
        assert_allclose(m[0, 0], 1.0)
        assert m[0, 1] == 0.0
        assert m[1, 1] > 0.0

    def test_likelihood_trace_monotone(self):
        """Test the log-likelihood never falls across sweeps."""
        assert np.all(np.diff(self.result.loglik_trace) >= -1e-10)

    def test_missing_phi(self):
        """Test fitting without phi raises PanelDataError."""
        with pytest.raises(PanelDataError):
            fit_observed_phi(replace(self.data, phi_observed=None), 1)

    def test_zero_phi_rejected(self):
        """Test an all-zero phi is rejected."""
        with pytest.raises(IdentificationError):
            replace(self.data, phi_observed=np.zeros((50, 1)))


class TestCommonRegressors:
    """Test cases for concentrating out observed common regressors."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(33)
        self.y = self.rng.normal(size=(3, 30))
        self.x = self.rng.normal(size=(3, 30, 1))

    def test_constant_equals_demeaning(self):
        """Test D = 1_T gives the demeaned panel."""
        data = PanelDataset(y=self.y, x=self.x, d_observed=np.ones((30, 1)))
        out = concentrate_common_regressors(data)
        assert_allclose(out.y, self.y - self.y.mean(axis=1, keepdims=True), atol=1e-12)
        assert_allclose(out.x, self.x - self.x.mean(axis=1, keepdims=True), atol=1e-12)
        assert out.d_observed is None

    def test_matches_series_regressions(self):
        """Test each series equals its residual from a regression on (1, D)."""
        d = self.rng.normal(size=(30, 2))
        out = concentrate_common_regressors(PanelDataset(y=self.y, x=self.x, d_observed=d))
        design = np.hstack([np.ones((30, 1)), d])
        for i in range(3):
            coef = np.linalg.lstsq(design, self.y[i], rcond=None)[0]
            assert_allclose(out.y[i], self.y[i] - design @ coef, atol=1e-10)

    def test_span_is_annihilated(self):
        """Test series lying in span(1, D) become zero."""
        d = self.rng.normal(size=(30, 2))
        y = 3.0 + d @ self.rng.normal(size=(2, 3))
        out = concentrate_common_regressors(PanelDataset(y=y.T, x=None, d_observed=d))
        assert_allclose(out.y, 0.0, atol=1e-12)

    def test_basis_keeps_spanned_constant(self):
        """Test 1_T is appended only when D does not already span it."""
        assert common_basis(np.ones((10, 1))).shape == (10, 1)
        assert common_basis(self.rng.normal(size=(10, 1))).shape == (10, 2)

    def test_missing_d(self):
        """Test concentrating without d raises PanelDataError."""
        with pytest.raises(PanelDataError):
            concentrate_common_regressors(PanelDataset(y=self.y, x=self.x))

    def test_too_few_periods(self):
        """Test T <= number of common regressors is rejected."""
        data = PanelDataset(y=self.y[:, :3], x=self.x[:, :3], d_observed=self.rng.normal(size=(3, 2)))
        with pytest.raises(PanelDataError):
            concentrate_common_regressors(data)


class TestPhiAndCommon:
    """Test cases for the model with observed phi and common regressors."""

    @classmethod
    def setup_class(cls):
        """Fit one design-4 panel for the class."""
        cls.data, _ = generate_dgp(DgpConfig(design="dgp4", n=50, t=75, seed=34))
        cls.result = fit_phi_and_common(cls.data, 1)

    def test_beta_close_to_truth(self):
        """Test beta_hat is within 0.02 of (1, 2)."""
        assert_allclose(self.result.beta_hat, [1.0, 2.0], atol=0.02)

    def test_delta_shape(self):
        """Test one row of Delta-hat per series and one column per basis vector."""
        assert self.result.delta_hat.shape == (150, 2)

    def test_constant_common_regressor_nests_basic(self):
        """Test D = 1_T without phi matches the basic fit."""
        data, _ = generate_dgp(DgpConfig(design="dgp1", n=30, t=40, seed=6))
        nested = fit_phi_and_common(replace(data, d_observed=np.ones((40, 1))), 1)
        assert_allclose(nested.beta_hat, fit_mle(data, 1).beta_hat, atol=1e-6)


class TestRestrictedSpec:
    """Test cases for the restricted model description."""

    def test_zero_variant(self):
        """Test the zero-restrictions spec maps to a zero-pinned variant."""
        variant = RestrictedSpec("zero_restrictions", r1=1, r2=2).to_variant()
        assert variant.r2 == 2 and variant.phi is None

    def test_phi_variant(self):
        """Test a phi spec takes r2 from phi."""
        variant = RestrictedSpec("observed_phi", r1=1, phi=np.ones(5)).to_variant()
        assert variant.r2 == 1 and variant.free_m_ff

    def test_observed_phi_requires_phi(self):
        """Test an observed-phi spec without phi is rejected."""
        with pytest.raises(IdentificationError):
            RestrictedSpec("observed_phi", r1=1).to_variant()

    def test_fit_dispatch(self):
        """Test fit routes to the matching estimator."""
        data, _ = generate_dgp(DgpConfig(design="dgp3", n=20, t=30, seed=7))
        result = RestrictedSpec("observed_phi", r1=1).fit(data)
        assert result.variant.name == "observed_phi"


if __name__ == "__main__":
    pytest.main([__file__])
