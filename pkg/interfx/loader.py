"""
Panel input and export.

Panels are long-format CSV files with one row per (unit, time) and columns
``unit,time,y,x1,...,xK``.  Observed loadings come in a side file with one row per
unit (``unit,phi1,...``) and observed common regressors in one with one row per
period (``time,d1,...``).
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .exceptions import PanelDataError
from .panel import PanelDataset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# data rows start on line 2, after the header
FIRST_DATA_LINE = 2


def _numbered_columns(columns: List[str], prefix: str) -> List[str]:
    pattern = re.compile(rf"^{prefix}(\d+)$")
    found = [(int(m.group(1)), col) for col in columns for m in [pattern.match(col)] if m]
    return [col for _, col in sorted(found)]


class PanelLoader:
    """
    Reads panel CSV files into a :class:`~interfx.panel.PanelDataset`.

    Every malformed entry is reported with its file and line number.  Units and
    periods are ordered by their sorted labels.
    """

    def __init__(self):
        self.units: Optional[pd.Index] = None
        self.times: Optional[pd.Index] = None

    def load(
        self,
        panel_path: PathLike,
        phi_path: Optional[PathLike] = None,
        common_path: Optional[PathLike] = None,
    ) -> PanelDataset:
        """
        Load a panel and its optional side files.

        Args:
            panel_path: Long-format panel CSV
            phi_path: Observed loadings, one row per unit
            common_path: Observed common regressors, one row per period

        Returns:
            PanelDataset
        """
        y, x = self.read_panel(panel_path)
        phi = self.read_side_file(phi_path, "unit", "phi", self.units) if phi_path else None
        d = self.read_side_file(common_path, "time", "d", self.times) if common_path else None
        data = PanelDataset(y=y, x=x, phi_observed=phi, d_observed=d)
        logger.info(
            "loaded %s: N=%d T=%d K=%d", panel_path, data.n_units, data.n_periods, data.n_regressors
        )
        return data

    def _read_csv(self, path: PathLike, required: List[str]) -> pd.DataFrame:
        try:
            frame = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise PanelDataError(f"{path}: malformed CSV: {exc}") from exc

        frame.columns = [str(col).strip() for col in frame.columns]
        missing = [col for col in required if col not in frame.columns]
        if missing:
            raise PanelDataError(f"{path}: missing column(s) {', '.join(missing)}", index=1)
        return frame

    def _numeric(self, path: PathLike, frame: pd.DataFrame, columns: List[str]) -> pd.DataFrame:
        values = frame[columns].apply(pd.to_numeric, errors="coerce")
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float))
        if bad.to_numpy().any():
            row, col = np.argwhere(bad.to_numpy())[0]
            line = int(row) + FIRST_DATA_LINE
            raise PanelDataError(
                f"{path}, line {line}: column '{columns[col]}' is not a finite number "
                f"({frame.iloc[row][columns[col]]!r})",
                index=line,
            )
        return values

    def read_panel(self, path: PathLike) -> Tuple[NDArray, NDArray]:
        """Read a long-format panel; returns y (N x T) and x (N x T x K)."""
        frame = self._read_csv(path, ["unit", "time", "y"])
        x_cols = _numbered_columns(list(frame.columns), "x")
        values = self._numeric(path, frame, ["y"] + x_cols)

        keys = frame[["unit", "time"]].astype(str).apply(lambda col: col.str.strip())
        dup = keys.duplicated()
        if dup.any():
            line = int(np.flatnonzero(dup.to_numpy())[0]) + FIRST_DATA_LINE
            raise PanelDataError(f"{path}, line {line}: duplicate (unit, time) pair", index=line)

        units = self._sorted_labels(frame["unit"])
        times = self._sorted_labels(frame["time"])
        n, t = len(units), len(times)
        if len(frame) != n * t:
            grid = pd.MultiIndex.from_product([units.astype(str), times.astype(str)])
            present = pd.MultiIndex.from_frame(keys)
            unit, time = grid.difference(present)[0]
            raise PanelDataError(
                f"{path}: unbalanced panel, {len(frame)} rows for {n} units x {t} periods; "
                f"first missing pair is unit {unit}, time {time}"
            )

        values.index = pd.MultiIndex.from_arrays([frame["unit"], frame["time"]])
        values = values.sort_index()
        y = values["y"].to_numpy().reshape(n, t)
        x = values[x_cols].to_numpy().reshape(n, t, len(x_cols))
        self.units, self.times = units, times
        return y, x

    @staticmethod
    def _sorted_labels(col: pd.Series) -> pd.Index:
        return pd.Index(col.unique()).sort_values()

    def read_side_file(self, path: PathLike, key: str, prefix: str, labels: Optional[pd.Index]) -> NDArray:
        """Read a side file keyed by unit or time and align it with the panel's labels."""
        frame = self._read_csv(path, [key])
        cols = _numbered_columns(list(frame.columns), prefix)
        if not cols:
            raise PanelDataError(f"{path}: no {prefix}1, {prefix}2, ... columns", index=1)
        values = self._numeric(path, frame, cols)
        values.index = frame[key]
        if values.index.duplicated().any():
            line = int(np.flatnonzero(values.index.duplicated())[0]) + FIRST_DATA_LINE
            raise PanelDataError(f"{path}, line {line}: duplicate {key} {values.index[line - 2]!r}", index=line)
        if labels is not None:
            missing = labels.difference(values.index)
            if len(missing):
                raise PanelDataError(f"{path}: no row for {key} {missing[0]!r}")
            values = values.loc[labels]
        return values.to_numpy()


def load_panel(
    panel_path: PathLike,
    phi_path: Optional[PathLike] = None,
    common_path: Optional[PathLike] = None,
) -> PanelDataset:
    return PanelLoader().load(panel_path, phi_path, common_path)


def panel_frame(data: PanelDataset) -> pd.DataFrame:
    """Long-format frame with columns unit, time, y, x1..xK."""
    n, t, k = data.n_units, data.n_periods, data.n_regressors
    units, times = np.meshgrid(np.arange(n), np.arange(t), indexing="ij")
    frame = pd.DataFrame({"unit": units.ravel(), "time": times.ravel(), "y": data.y.ravel()})
    for j in range(k):
        frame[f"x{j + 1}"] = data.x[:, :, j].ravel()
    return frame


def export_panel(data: PanelDataset, directory: PathLike) -> Dict[str, Path]:
    """
    Write ``panel.csv`` plus ``phi.csv``/``common.csv`` when the panel carries them.

    Floats are written at full precision so a reload reproduces the arrays exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = {"panel": directory / "panel.csv"}
    panel_frame(data).to_csv(written["panel"], index=False, float_format="%.17g")

    if data.phi_observed is not None:
        phi = pd.DataFrame(data.phi_observed, columns=[f"phi{j + 1}" for j in range(data.phi_observed.shape[1])])
        phi.insert(0, "unit", np.arange(data.n_units))
        written["phi"] = directory / "phi.csv"
        phi.to_csv(written["phi"], index=False, float_format="%.17g")
    if data.d_observed is not None:
        d = pd.DataFrame(data.d_observed, columns=[f"d{j + 1}" for j in range(data.d_observed.shape[1])])
        d.insert(0, "time", np.arange(data.n_periods))
        written["common"] = directory / "common.csv"
        d.to_csv(written["common"], index=False, float_format="%.17g")

    for path in written.values():
        logger.info("wrote %s", path)
    return written
