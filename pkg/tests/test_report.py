"""
Tests for the plain-text report writer.
"""

import numpy as np
import pandas as pd
import pytest

from interfx.config import DgpConfig
from interfx.em import fit_mle
from interfx.report import ReportWriter, format_value
from interfx.simulation import generate_dgp, run_monte_carlo


class TestFormatValue:
    """Test cases for value formatting."""

    def test_values(self):
        """Test floats, booleans and None."""
        assert format_value(0.1) == "0.1"
        assert format_value(np.float64(1 / 3)) == repr(1 / 3)
        assert format_value(True) == "true"
        assert format_value(np.int64(4)) == "4"
        assert format_value(None) == "none"


class TestReportWriter:
    """Test cases for the report writer."""

    def setup_method(self):
        """Setup test fixtures."""
        self.writer = ReportWriter()

    def test_render_layout(self):
        """Test header lines come first, then named tables."""
        frame = pd.DataFrame({"a": [1.5, 2.0]}, index=pd.Index([0, 1], name="m"))
        text = self.writer.render({"model": "basic", "converged": False}, {"ic": frame})
        assert text == "model: basic\nconverged: false\n\n[ic]\nm,a\n0,1.5\n1,2.0\n"

    def test_estimation_report(self, tmp_path):
        """Test an estimation report holds the coefficients and is reproducible."""
        data, _ = generate_dgp(DgpConfig(design="dgp1", n=20, t=30, seed=1))
        fit = fit_mle(data, 1)
        text = self.writer.estimation_report(fit, {"model": "basic"})
        assert "[beta]" in text and "[loglik_trace]" in text
        assert f"beta1,{float(fit.beta_hat[0])!r}" in text
        assert text == self.writer.estimation_report(fit_mle(data, 1), {"model": "basic"})
        path = self.writer.write(text, tmp_path / "out" / "fit.txt")
        assert path.read_text() == text

    def test_simulation_report(self):
        """Test a simulation report holds the results table."""
        report = run_monte_carlo(DgpConfig(design="dgp1", n=15, t=20, seed=2), 1, estimators=("wg",), threads=1)
        text = self.writer.simulation_report(report, {"seed": 2})
        assert "design: dgp1" in text
        assert "[results]" in text
        assert "beta1_bias" in text


if __name__ == "__main__":
    pytest.main([__file__])
