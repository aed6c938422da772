"""
Command-line interface for interactive-effects estimation and simulation.
"""

import argparse
import logging
import sys
from typing import List, Optional, Tuple

import numpy as np

from .config import THREADS_ENV_VAR, DgpConfig, EmConfig, resolve_threads
from .estimation import EstimationConfig, PanelEstimator
from .exceptions import InterfxError
from .loader import export_panel
from .report import ReportWriter
from .simulation import ESTIMATORS, generate_dgp, run_monte_carlo

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2

DESIGNS = {"1": "dgp1", "2": "dgp2", "3": "dgp3", "4": "dgp4"}


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with 1; 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _factor_count(value: str):
    if value == "auto":
        return value
    try:
        count = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer or 'auto', got {value!r}")
    if count < 0:
        raise argparse.ArgumentTypeError(f"factor count must be non-negative, got {count}")
    return count


def parse_dist(value: str) -> Tuple[str, float]:
    """chisq | normal | t:<df> -> (error_dist, df)."""
    if value == "chisq":
        return "chisq2_normalized", 5.0
    if value == "normal":
        return "normal", 5.0
    if value.startswith("t:"):
        try:
            df = float(value[2:])
        except ValueError:
            raise ValueError(f"invalid degrees of freedom in --dist {value!r}")
        return "student_t", df
    raise ValueError(f"unknown --dist {value!r}; use chisq, normal or t:<df>")


def parse_design(value: str) -> str:
    design = DESIGNS.get(value.lower().replace("dgp", ""))
    if design is None:
        raise ValueError(f"invalid design {value!r}; choose 1, 2, 3 or 4")
    return design


def _add_dgp_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--design", required=True, help="Design 1-4")
    parser.add_argument("--n", type=int, default=50, help="Number of units (default: 50)")
    parser.add_argument("--t", type=int, default=75, help="Number of periods (default: 75)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parser.add_argument("--dist", default="chisq", help="Error distribution: chisq, normal or t:<df> (default: chisq)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="interfx",
        description="Maximum likelihood estimation of panel models with interactive effects",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  # Basic model with the number of factors chosen by the information criterion
  interfx estimate --panel panel.csv --model basic --r auto --out fit.txt

  # Zero-restrictions model with one factor in y and one more in x
  interfx estimate --panel panel.csv --model zero --r1 1 --r2 1 --out fit.txt

  # Observed loadings and common regressors
  interfx estimate --panel panel.csv --model phi-common --phi phi.csv --common common.csv --r1 1

  # Monte Carlo for design 1 on 4 processes (or set {THREADS_ENV_VAR})
  interfx simulate --design 1 --n 50 --t 75 --reps 200 --seed 7 --threads 4 --out table.txt

  # Write one draw of design 4 to CSV files
  interfx generate --design 4 --n 100 --t 125 --out-dir ./dgp4
        """,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    est = sub.add_parser("estimate", help="Estimate a model from CSV files")
    est.add_argument("--panel", required=True, help="Long-format panel CSV (unit,time,y,x1,...)")
    est.add_argument("--model", default="basic", choices=["basic", "zero", "phi", "phi-common"])
    est.add_argument("--r", type=_factor_count, default="auto", help="Number of factors, basic model")
    est.add_argument("--r1", type=_factor_count, default="auto", help="Number of unrestricted factors")
    est.add_argument("--r2", type=_factor_count, default="auto", help="Number of factors absent from y (zero model)")
    est.add_argument("--phi", help="Observed loadings CSV (unit,phi1,...)")
    est.add_argument("--common", help="Observed common regressors CSV (time,d1,...)")
    est.add_argument("--se", default="trace", choices=["trace", "moment"], help="Standard-error form")
    est.add_argument("--out", help="Report path")
    est.add_argument("--tol", type=float, default=1e-8, help="Parameter-change tolerance (default: 1e-8)")
    est.add_argument("--max-iters", type=int, default=3000, help="Maximum ECM sweeps (default: 3000)")
    est.add_argument("--seed", type=int, default=0, help="Seed for random starts (default: 0)")
    est.add_argument("--r-max", type=int, default=4, help="Largest factor count for 'auto' (default: 4)")

    sim = sub.add_parser("simulate", help="Run a Monte Carlo experiment")
    _add_dgp_arguments(sim)
    sim.add_argument("--reps", type=int, default=200, help="Replications (default: 200)")
    sim.add_argument("--estimators", default=",".join(ESTIMATORS), help="Comma-separated subset of wg,pc,mle")
    sim.add_argument("--select-r", default="off", choices=["on", "off"], help="Estimate factor numbers per replication")
    sim.add_argument("--r-max", type=int, default=4, help="Largest factor count when selecting (default: 4)")
    sim.add_argument("--tol", type=float, default=1e-8, help="Parameter-change tolerance (default: 1e-8)")
    sim.add_argument("--max-iters", type=int, default=3000, help="Maximum ECM sweeps (default: 3000)")
    sim.add_argument("--threads", type=int, help=f"Worker processes (default: ${THREADS_ENV_VAR} or all cores)")
    sim.add_argument("--out", help="Report path")

    gen = sub.add_parser("generate", help="Write one simulated panel to CSV files")
    _add_dgp_arguments(gen)
    gen.add_argument("--out-dir", required=True, help="Directory for panel.csv, phi.csv, common.csv")
    return parser


def _dgp_config(args) -> DgpConfig:
    dist, df = parse_dist(args.dist)
    return DgpConfig(design=parse_design(args.design), n=args.n, t=args.t, error_dist=dist, df=df, seed=args.seed)


def cmd_estimate(args) -> int:
    config = EstimationConfig(
        panel_path=args.panel,
        model=args.model,
        r=args.r,
        r1=args.r1,
        r2=args.r2,
        phi_path=args.phi,
        common_path=args.common,
        se_method=args.se,
        out_path=args.out,
        tol=args.tol,
        max_iters=args.max_iters,
        seed=args.seed,
        r_max=args.r_max,
    )
    result = PanelEstimator(config).run()
    fit = result["fit"]

    print(fit.summary())
    if result["selection"] is not None:
        print("\nInformation criteria:")
        print(result["selection"].to_string())
    if result["report_path"]:
        print(f"\n📄 Report: {result['report_path']}")
    if not fit.converged:
        print(f"⚠️  Not converged after {fit.n_iters} iterations (FOC residual {fit.foc_residual:.3e})")
        return EXIT_NOT_CONVERGED
    print("✅ Estimation converged")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _dgp_config(args)
    estimators = [name.strip() for name in args.estimators.split(",") if name.strip()]
    em_cfg = EmConfig(max_iters=args.max_iters, tol_param=args.tol)
    threads = resolve_threads(args.threads)
    report = run_monte_carlo(
        cfg,
        args.reps,
        estimators=estimators,
        selection=args.select_r == "on",
        em_cfg=em_cfg,
        threads=threads,
        r_max=args.r_max,
        progress=True,
    )

    print(report.to_frame().to_string(float_format=lambda v: f"{v:.4f}"))
    if report.pct_r_correct is not None:
        print(f"\n% r_hat = r: {report.pct_r_correct:.1f}")
    if report.failures:
        print(f"⚠️  {len(report.failures)} failed fit(s) excluded")
    if args.out:
        writer = ReportWriter()
        meta = {"seed": cfg.seed, "error_dist": cfg.error_dist, "df": cfg.df, "estimators": ",".join(estimators)}
        path = writer.write(writer.simulation_report(report, meta), args.out)
        print(f"📄 Report: {path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    data, _ = generate_dgp(_dgp_config(args))
    written = export_panel(data, args.out_dir)
    print(f"✅ Generated {args.design}: N={data.n_units} T={data.n_periods} K={data.n_regressors}")
    for path in written.values():
        print(f"  - {path}")
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "generate": cmd_generate}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (InterfxError, OSError, ValueError, np.linalg.LinAlgError) as e:
        print(f"❌ {args.command} failed: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
