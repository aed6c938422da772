"""
Tests for the information criteria and the two-step (r1, r2) selection.
"""

from unittest.mock import patch

import numpy as np
import pytest

from interfx.config import DgpConfig
from interfx.em import fit_mle
from interfx.exceptions import EstimationError, SingularMatrixError
from interfx.panel import demean_panel
from interfx.selection import (
    bai_ng,
    ic_penalty,
    ic_value,
    information_criteria,
    select_r,
    select_r1_r2,
    y_residual,
)
from interfx.simulation import generate_dgp


class TestPenalties:
    """Test cases for the criterion building blocks."""

    def test_penalty_increasing(self):
        """Test the penalty grows strictly with m."""
        values = [ic_penalty(m, 150, 75) for m in range(5)]
        assert values[0] == 0.0
        assert np.all(np.diff(values) > 0)

    def test_no_factor_value(self):
        """Test IC(0) is the log-determinant of the fitted block covariance over NK."""
        data, _ = generate_dgp(DgpConfig(design="dgp1", n=20, t=30, seed=1))
        fit = fit_mle(data, 0)
        blocks = demean_panel(data).sandwich_blocks(fit.beta_hat)
        sigma_e = blocks[:, 0, 0]
        _, logdet_x = np.linalg.slogdet(blocks[:, 1:, 1:])
        expected = (np.sum(np.log(sigma_e)) + np.sum(logdet_x)) / 60
        assert ic_value(data, 0) == pytest.approx(expected, rel=1e-6)


class TestBaiNg:
    """Test cases for the IC_p2 factor count."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(50)

    def test_pure_noise(self):
        """Test white noise has no factors."""
        assert bai_ng(self.rng.normal(size=(50, 60)), 4) == 0

    def test_one_factor(self):
        """Test a strong rank-one signal gives one factor."""
        w = np.outer(self.rng.normal(size=50), self.rng.normal(size=60)) + self.rng.normal(size=(50, 60))
        assert bai_ng(w, 4) == 1

    def test_r_max_zero(self):
        """Test r_max = 0 returns 0."""
        assert bai_ng(self.rng.normal(size=(5, 6)), 0) == 0


class TestInformationCriteria:
    """Test cases for IC(m) selection."""

    @classmethod
    def setup_class(cls):
        """Draw design-1 and design-2 panels for the class."""
        cls.dgp1, _ = generate_dgp(DgpConfig(design="dgp1", n=50, t=75, seed=51))
        cls.dgp2, _ = generate_dgp(DgpConfig(design="dgp2", n=100, t=125, seed=52))

    def test_selects_one_factor(self):
        """Test design 1 selects r = 1."""
        path = information_criteria(self.dgp1, 4)
        assert path.r_hat == 1
        frame = path.to_frame()
        assert list(frame.index) == [0, 1, 2, 3, 4]
        assert list(frame.columns) == ["ic", "loglik", "converged"]

    def test_r_max_zero(self):
        """Test r_max = 0 selects no factors."""
        assert select_r(self.dgp1, 0) == 0

    def test_r_max_out_of_range(self):
        """Test r_max >= min(N, T) is rejected."""
        with pytest.raises(ValueError):
            information_criteria(self.dgp1, 50)

    def test_two_step_design_one(self):
        """Test design 1 gives (r1, r2) = (1, 0)."""
        assert select_r1_r2(self.dgp1) == (1, 0)

    def test_two_step_design_two(self):
        """Test design 2 gives (r1, r2) = (1, 1)."""
        assert select_r1_r2(self.dgp2) == (1, 1)

    def test_likelihood_criterion_on_residual(self):
        """Test the likelihood criterion also finds one y factor in design 1."""
        assert select_r1_r2(self.dgp1, criterion="ic") == (1, 0)

    def test_unknown_criterion(self):
        """Test an unknown criterion is rejected."""
        with pytest.raises(ValueError):
            select_r1_r2(self.dgp1, criterion="aic")

    def test_failed_fit_names_m(self):
        """Test a failing fit is reported with its factor count."""
        with patch("interfx.selection.fit_mle", side_effect=SingularMatrixError("boom")):
            with pytest.raises(EstimationError, match="m=0"):
                information_criteria(self.dgp1, 2)

    def test_residual(self):
        """Test the y residual is demeaned."""
        resid = y_residual(self.dgp1, np.array([1.0, 2.0]))
        assert resid.shape == (50, 75)
        np.testing.assert_allclose(resid.mean(axis=1), 0.0, atol=1e-10)


if __name__ == "__main__":
    pytest.main([__file__])
