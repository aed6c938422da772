"""
Tests for the within-group and iterated principal components estimators.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from interfx.baselines import iterated_pc, principal_components, sign_columns, within_group
from interfx.config import DgpConfig
from interfx.exceptions import ConvergenceWarning, PanelDataError
from interfx.panel import PanelDataset
from interfx.simulation import generate_dgp


class TestPrincipalComponents:
    """Test cases for principal components extraction."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(30)
        self.w = self.rng.normal(size=(6, 10))

    def test_normalization(self):
        """Test F'F/T = I and Lambda = W F / T."""
        f, lam = principal_components(self.w, 2)
        assert_allclose(f.T @ f / 10, np.eye(2), atol=1e-12)
        assert_allclose(lam, self.w @ f / 10, atol=1e-12)

    def test_sign_convention(self):
        """Test the largest-magnitude entry of each factor is positive."""
        f, _ = principal_components(self.w, 3)
        assert np.all(sign_columns(f) == 1.0)

    def test_zero_factors(self):
        """Test r = 0 returns empty arrays."""
        f, lam = principal_components(self.w, 0)
        assert f.shape == (10, 0) and lam.shape == (6, 0)


class TestWithinGroup:
    """Test cases for the within-group estimator."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(31)

    def test_matches_pooled_least_squares(self):
        """Test WG equals least squares on demeaned data."""
        data = PanelDataset(y=self.rng.normal(size=(5, 12)), x=self.rng.normal(size=(5, 12, 2)))
        y = data.y - data.y.mean(axis=1, keepdims=True)
        x = data.x - data.x.mean(axis=1, keepdims=True)
        expected = np.linalg.lstsq(x.reshape(-1, 2), y.reshape(-1), rcond=None)[0]
        assert_allclose(within_group(data).beta_hat, expected, rtol=1e-10)

    def test_requires_regressors(self):
        """Test K = 0 is rejected."""
        with pytest.raises(PanelDataError):
            within_group(PanelDataset(y=self.rng.normal(size=(3, 5)), x=None))


class TestIteratedPc:
    """Test cases for iterated principal components."""

    @classmethod
    def setup_class(cls):
        """Draw one design-1 panel for the class."""
        cls.data, _ = generate_dgp(DgpConfig(design="dgp1", n=100, t=125, seed=8))

    def test_no_factors_equals_within_group(self):
        """Test r = 0 reproduces the within-group estimate."""
        pc = iterated_pc(self.data, 0)
        assert pc.converged
        assert_allclose(pc.beta_hat, within_group(self.data).beta_hat, rtol=1e-12)

    def test_removes_factor_bias(self):
        """Test WG is biased by the factor while iterated PC is not."""
        wg = within_group(self.data).beta_hat
        pc = iterated_pc(self.data, 1)
        assert pc.converged
        assert abs(wg[0] - 1.0) > 0.05
        assert abs(pc.beta_hat[0] - 1.0) < 0.08

    def test_factor_normalization(self):
        """Test the returned factors satisfy F'F/T = I."""
        pc = iterated_pc(self.data, 1)
        assert_allclose(pc.pc_factors.T @ pc.pc_factors / 125, np.eye(1), atol=1e-10)
        assert pc.pc_loadings.shape == (100, 1)

    def test_iteration_cap_warns(self):
        """Test a single iteration reports non-convergence."""
        with pytest.warns(ConvergenceWarning):
            pc = iterated_pc(self.data, 1, max_iters=1)
        assert not pc.converged

    def test_factor_count_out_of_range(self):
        """Test r >= min(N, T) is rejected."""
        with pytest.raises(ValueError):
            iterated_pc(self.data, 100)


if __name__ == "__main__":
    pytest.main([__file__])
