"""
Tests for reading and writing panel CSV files.
"""

import numpy as np
import pytest

from interfx.config import DgpConfig
from interfx.exceptions import PanelDataError
from interfx.loader import PanelLoader, export_panel, load_panel
from interfx.panel import PanelDataset
from interfx.simulation import generate_dgp


class TestPanelLoader:
    """Test cases for the CSV loader."""

    def setup_method(self):
        """Setup test fixtures."""
        self.loader = PanelLoader()

    def _write(self, tmp_path, name, text):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_round_trip(self, tmp_path):
        """Test exported panels reload to identical arrays."""
        data, _ = generate_dgp(DgpConfig(design="dgp4", n=6, t=9, seed=1))
        written = export_panel(data, tmp_path)
        loaded = load_panel(written["panel"], written["phi"], written["common"])
        assert np.array_equal(loaded.y, data.y)
        assert np.array_equal(loaded.x, data.x)
        assert np.array_equal(loaded.phi_observed, data.phi_observed)
        assert np.array_equal(loaded.d_observed, data.d_observed)

    def test_round_trip_full_precision(self, tmp_path):
        """Test values needing all 17 significant digits reload exactly."""
        rng = np.random.default_rng(2)
        y = rng.normal(size=(4, 7)) * 1e3 + 0.1
        x = rng.normal(size=(4, 7, 2)) / 3.0
        written = export_panel(PanelDataset(y=y, x=x), tmp_path)
        loaded = load_panel(written["panel"])
        assert np.array_equal(loaded.y, y)
        assert np.array_equal(loaded.x, x)

    def test_rows_in_any_order(self, tmp_path):
        """Test rows are arranged by sorted unit and time labels."""
        path = self._write(tmp_path, "p.csv", "unit,time,y,x1\nb,2,4,40\na,2,2,20\nb,1,3,30\na,1,1,10\n")
        data = self.loader.load(path)
        assert data.y.tolist() == [[1.0, 2.0], [3.0, 4.0]]
        assert data.x[:, :, 0].tolist() == [[10.0, 20.0], [30.0, 40.0]]
        assert list(self.loader.units) == ["a", "b"]

    def test_non_numeric_entry_line(self, tmp_path):
        """Test a malformed value is reported with its line number."""
        path = self._write(tmp_path, "p.csv", "unit,time,y,x1\n1,1,0.5,1\n1,2,abc,2\n2,1,1,3\n2,2,1,4\n")
        with pytest.raises(PanelDataError, match="line 3") as info:
            self.loader.load(path)
        assert info.value.index == 3

    def test_missing_value(self, tmp_path):
        """Test an empty field is rejected."""
        path = self._write(tmp_path, "p.csv", "unit,time,y,x1\n1,1,0.5,1\n1,2,0.1,\n2,1,1,3\n2,2,1,4\n")
        with pytest.raises(PanelDataError, match="x1"):
            self.loader.load(path)

    def test_unbalanced(self, tmp_path):
        """Test a missing (unit, time) pair is rejected."""
        path = self._write(tmp_path, "p.csv", "unit,time,y\n1,1,0.5\n1,2,0.1\n2,1,1\n")
        with pytest.raises(PanelDataError, match="unbalanced"):
            self.loader.load(path)

    def test_duplicate_pair(self, tmp_path):
        """Test a repeated (unit, time) pair is rejected."""
        path = self._write(tmp_path, "p.csv", "unit,time,y\n1,1,0.5\n1,1,0.1\n2,1,1\n2,2,1\n")
        with pytest.raises(PanelDataError, match="duplicate"):
            self.loader.load(path)

    def test_missing_column(self, tmp_path):
        """Test a panel without y is rejected."""
        path = self._write(tmp_path, "p.csv", "unit,time,x1\n1,1,0.5\n")
        with pytest.raises(PanelDataError, match="missing column"):
            self.loader.load(path)

    def test_side_file_alignment(self, tmp_path):
        """Test phi rows are matched to units by label."""
        panel = self._write(tmp_path, "p.csv", "unit,time,y\n1,1,0\n1,2,1\n2,1,2\n2,2,4\n")
        phi = self._write(tmp_path, "phi.csv", "unit,phi1\n2,5.0\n1,-1.0\n")
        data = self.loader.load(panel, phi_path=phi)
        assert data.phi_observed[:, 0].tolist() == [-1.0, 5.0]

    def test_side_file_missing_unit(self, tmp_path):
        """Test a phi file without a row for some unit is rejected."""
        panel = self._write(tmp_path, "p.csv", "unit,time,y\n1,1,0\n1,2,1\n2,1,2\n2,2,4\n")
        phi = self._write(tmp_path, "phi.csv", "unit,phi1\n1,-1.0\n")
        with pytest.raises(PanelDataError, match="no row"):
            self.loader.load(panel, phi_path=phi)

    def test_missing_file(self, tmp_path):
        """Test a missing file raises an OS error."""
        with pytest.raises(OSError):
            self.loader.load(tmp_path / "absent.csv")


if __name__ == "__main__":
    pytest.main([__file__])
