"""
Plain-text reports.

A report is a block of ``key: value`` lines, a blank line, then comma-separated
tables each introduced by a ``[name]`` line.  Floats are written with ``repr`` so
that identical runs give identical files.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .em import FitResult
from .simulation import McReport

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "none"
    return str(value)


class ReportWriter:
    """Renders estimation and simulation results into report files."""

    def render(self, header: Dict[str, Any], tables: Dict[str, pd.DataFrame]) -> str:
        lines = [f"{key}: {format_value(value)}" for key, value in header.items()]
        for name, frame in tables.items():
            lines.append("")
            lines.append(f"[{name}]")
            lines.extend(self._table_lines(frame))
        return "\n".join(lines) + "\n"

    def _table_lines(self, frame: pd.DataFrame) -> List[str]:
        frame = frame.reset_index() if frame.index.name is not None else frame
        rows = [",".join(str(col) for col in frame.columns)]
        for record in frame.itertuples(index=False):
            rows.append(",".join(format_value(v) for v in record))
        return rows

    def estimation_report(
        self,
        fit: FitResult,
        meta: Dict[str, Any],
        selection: Optional[pd.DataFrame] = None,
    ) -> str:
        """
        Report for one fit.

        Args:
            fit: Fitted model
            meta: Extra header entries (model, se_method, data dimensions, ...)
            selection: Information criteria per factor count, when r was selected
        """
        header = dict(meta)
        header.update(
            r=fit.variant.n_factors,
            r1=fit.r1,
            r2=fit.r2,
            loglik=fit.loglik,
            iterations=fit.n_iters,
            converged=fit.converged,
            foc_residual=fit.foc_residual,
            warnings=len(fit.warnings),
        )
        k = fit.beta_hat.size
        tables = {
            "beta": pd.DataFrame(
                {
                    "name": [f"beta{j + 1}" for j in range(k)],
                    "estimate": fit.beta_hat,
                    "se": fit.se_beta,
                }
            ),
            "loglik_trace": pd.DataFrame(
                {"iteration": np.arange(fit.loglik_trace.size), "loglik": fit.loglik_trace}
            ),
        }
        if selection is not None:
            tables["selection"] = selection
        if fit.delta_hat is not None:
            tables["delta"] = pd.DataFrame(
                fit.delta_hat, columns=[f"d{j + 1}" for j in range(fit.delta_hat.shape[1])]
            ).rename_axis("series")
        if fit.warnings:
            tables["warnings"] = pd.DataFrame({"message": [w.replace(",", ";") for w in fit.warnings]})
        return self.render(header, tables)

    def simulation_report(self, report: McReport, meta: Dict[str, Any]) -> str:
        """Bias/RMSE table per estimator plus selection and failure counts."""
        header = dict(meta)
        header.update(
            design=report.design,
            n=report.n,
            t=report.t,
            reps=report.n_reps,
            pct_r_correct=report.pct_r_correct,
            mle_not_converged=report.n_not_converged,
            failures=len(report.failures),
        )
        tables = {"results": report.to_frame()}
        if report.failures:
            tables["failures"] = pd.DataFrame({"message": [f.replace(",", ";") for f in report.failures]})
        return self.render(header, tables)

    def write(self, content: str, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path.parent:
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
        logger.info("report written to %s", path)
        return path
