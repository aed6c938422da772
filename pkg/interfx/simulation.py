"""
Data generating processes and the Monte Carlo harness.

Four designs share one construction: unit intercepts, loadings and factors are drawn,
the structural errors get cross-sectional heteroscedasticity proportional to each
series' loading norm, and z_t solves (I kron B) z_t = mu + L s_t + eps_t.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats
from numpy.typing import NDArray
from tqdm import tqdm
from typing_extensions import TypedDict

from .baselines import iterated_pc, within_group
from .config import DesignName, DgpConfig, EmConfig, ErrorDist, resolve_threads
from .em import FitResult, fit_mle
from .exceptions import ConvergenceWarning, IdentificationWarning, InterfxError
from .panel import PanelDataset
from .restricted import fit_observed_phi, fit_phi_and_common, fit_zero_restrictions
from .selection import DEFAULT_R_MAX, select_r, select_r1_r2

logger = logging.getLogger(__name__)

ESTIMATORS = ("wg", "pc", "mle")

# (r1, r2, r3): free factors, factors with restricted y-loadings, observed common regressors
TRUE_FACTOR_COUNTS: Dict[str, Tuple[int, int, int]] = {
    "dgp1": (1, 0, 0),
    "dgp2": (1, 1, 0),
    "dgp3": (1, 1, 0),
    "dgp4": (1, 1, 1),
}


class GroundTruth(TypedDict):
    beta: NDArray
    loadings: NDArray
    factors: NDArray
    intercepts: NDArray
    xi: NDArray
    upsilon: NDArray
    r1: int
    r2: int
    r3: int


def _orthonormal_blocks(n: int, k: int, rng: np.random.Generator) -> NDArray:
    """Orthogonal polar factors M (M'M)^{-1/2} of n standard normal K x K draws."""
    m = rng.standard_normal((n, k, k))
    while True:
        mtm = np.einsum("iba,ibc->iac", m, m)
        w, v = np.linalg.eigh(mtm)
        bad = w[:, 0] <= 1e-12 * np.maximum(1.0, w[:, -1])
        if not np.any(bad):
            break
        m[bad] = rng.standard_normal((int(np.sum(bad)), k, k))
    inv_root = np.einsum("iab,ib,icb->iac", v, 1.0 / np.sqrt(w), v)
    return np.einsum("iab,ibc->iac", m, inv_root)


def gen_heteroscedasticity(
    loadings: NDArray, u: float = 0.1, seed=None
) -> Tuple[NDArray, NDArray]:
    """
    Heteroscedasticity multipliers and error mixing blocks.

    Args:
        loadings: N x (K+1) x r loadings L
        u: Shares eta are drawn from U[u, 1 - u]
        seed: Seed or numpy Generator

    Returns:
        xi: N x (K+1), eta/(1 - eta) times the squared norm of each loading row
        upsilon: N x (K+1) x (K+1) blocks diag(1, U_i) with U_i orthonormal
    """
    rng = np.random.default_rng(seed)
    loadings = np.asarray(loadings, dtype=float)
    n, p, _ = loadings.shape
    eta = rng.uniform(u, 1.0 - u, size=(n, p))
    xi = eta / (1.0 - eta) * np.einsum("iar,iar->ia", loadings, loadings)
    upsilon = np.zeros((n, p, p))
    upsilon[:, 0, 0] = 1.0
    if p > 1:
        upsilon[:, 1:, 1:] = _orthonormal_blocks(n, p - 1, rng)
    return xi, upsilon


def standard_draws(
    dist: ErrorDist, size: Tuple[int, ...], rng: np.random.Generator, df: float = 5.0
) -> NDArray:
    """I.i.d. draws with mean zero and unit variance."""
    if dist == "chisq2_normalized":
        return (rng.chisquare(2.0, size=size) - 2.0) / 2.0
    if dist == "normal":
        return rng.standard_normal(size)
    if dist == "student_t":
        return rng.standard_t(df, size=size) / np.sqrt(df / (df - 2.0))
    raise ValueError(f"unknown error distribution '{dist}'")


def draw_errors(
    xi: NDArray,
    upsilon: NDArray,
    t: int,
    dist: ErrorDist,
    rng: np.random.Generator,
    df: float = 5.0,
) -> NDArray:
    """eps_t = sqrt(diag(xi)) Upsilon e_t for t = 1..T, returned as N x (K+1) x T."""
    n, p = xi.shape
    draws = standard_draws(dist, (n, p, t), rng, df)
    return np.sqrt(xi)[:, :, None] * np.einsum("iab,ibt->iat", upsilon, draws)


def generate_dgp(cfg: DgpConfig) -> Tuple[PanelDataset, GroundTruth]:
    """
    Draw one panel from the configured design.

    All loadings, factors and intercepts are standard normal; x-loadings on g (and on
    h, d where they carry an observed counterpart) are the y-loading plus fresh noise,
    and d_t = 1 + N(0, 1).  Observed phi (dgp3, dgp4) and d (dgp4) are attached to
    the returned panel.
    """
    rng = np.random.default_rng(cfg.seed)
    n, t, k = cfg.n, cfg.t, cfg.n_regressors
    beta = np.asarray(cfg.beta_true)
    r1, r2, r3 = TRUE_FACTOR_COUNTS[cfg.design]

    intercepts = rng.standard_normal((n, k + 1))
    psi = rng.standard_normal((n, 1))
    g = rng.standard_normal((t, 1))
    y_cols = [psi]
    x_cols = [psi[:, None, :] + rng.standard_normal((n, k, 1))]
    factors = [g]
    phi = d = None

    if r2:
        h = rng.standard_normal((t, 1))
        if cfg.design == "dgp2":
            y_cols.append(np.zeros((n, 1)))
            x_cols.append(rng.standard_normal((n, k, 1)))
        else:
            phi = rng.standard_normal((n, 1))
            y_cols.append(phi)
            x_cols.append(phi[:, None, :] + rng.standard_normal((n, k, 1)))
        factors.append(h)
    if r3:
        kappa = rng.standard_normal((n, 1))
        d = 1.0 + rng.standard_normal((t, 1))
        y_cols.append(kappa)
        x_cols.append(kappa[:, None, :] + rng.standard_normal((n, k, 1)))
        factors.append(d)

    loadings = np.concatenate(
        [np.hstack(y_cols)[:, None, :], np.concatenate(x_cols, axis=2)], axis=1
    )
    common = np.hstack(factors)

    xi, upsilon = gen_heteroscedasticity(loadings, cfg.u, rng)
    eps = cfg.noise_scale * draw_errors(xi, upsilon, t, cfg.error_dist, rng, cfg.df)

    # B z = w with B unit upper-triangular: x = w_x, y = w_y + x'beta
    w = intercepts[:, :, None] + np.einsum("iar,tr->iat", loadings, common) + eps
    x = np.moveaxis(w[:, 1:, :], 1, 2)
    y = w[:, 0, :] + np.einsum("itk,k->it", x, beta)

    data = PanelDataset(y=y, x=x, phi_observed=phi, d_observed=d)
    truth = GroundTruth(
        beta=beta,
        loadings=loadings,
        factors=common,
        intercepts=intercepts,
        xi=xi,
        upsilon=upsilon,
        r1=r1,
        r2=r2,
        r3=r3,
    )
    return data, truth


def fit_for_design(
    data: PanelDataset, design: DesignName, r1: int, r2: int, cfg: Optional[EmConfig] = None
) -> FitResult:
    """Likelihood fit of the model matching the design."""
    if design in ("dgp1", "dgp2"):
        if r2 == 0:
            return fit_mle(data, r1, cfg)
        return fit_zero_restrictions(data, r1, r2, cfg)
    if design == "dgp3":
        return fit_observed_phi(data, r1, cfg)
    return fit_phi_and_common(data, r1, cfg)


def _y_factor_count(design: DesignName, r1: int, r2: int) -> int:
    """Factors entering the y equation, observed ones treated as unknown."""
    _, _, r3 = TRUE_FACTOR_COUNTS[design]
    if design in ("dgp1", "dgp2"):
        return r1
    return r1 + r2 + r3


def select_for_design(
    data: PanelDataset, design: DesignName, r_max: int, cfg: Optional[EmConfig] = None
) -> Tuple[int, int, bool]:
    """
    Estimated (r1, r2) for a design and whether the selection matched the truth.

    Designs with observed phi and d count them among the total factors and take r1
    as the remainder.
    """
    true_r1, true_r2, r3 = TRUE_FACTOR_COUNTS[design]
    if design in ("dgp1", "dgp2"):
        r1, r2 = select_r1_r2(data, cfg, r_max)
        return r1, r2, (r1, r2) == (true_r1, true_r2)
    r_hat = select_r(data, r_max, cfg)
    return max(r_hat - true_r2 - r3, 0), true_r2, r_hat == true_r1 + true_r2 + r3


class _RepTask(NamedTuple):
    index: int
    dgp: DgpConfig
    em: EmConfig
    estimators: Tuple[str, ...]
    selection: bool
    r_max: int


@dataclass
class _RepRecord:
    index: int
    estimates: Dict[str, NDArray] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)
    r_correct: Optional[bool] = None
    mle_converged: Optional[bool] = None
    mle_se: Optional[NDArray] = None


_FIT_ERRORS = (InterfxError, np.linalg.LinAlgError, ValueError)


def _replicate(task: _RepTask) -> _RepRecord:
    record = _RepRecord(index=task.index)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        warnings.simplefilter("ignore", IdentificationWarning)
        data, truth = generate_dgp(task.dgp)
        design = task.dgp.design
        r1, r2 = truth["r1"], truth["r2"]

        if task.selection:
            try:
                r1, r2, record.r_correct = select_for_design(data, design, task.r_max, task.em)
            except _FIT_ERRORS as exc:
                record.failures["selection"] = str(exc)
                r1, r2 = truth["r1"], truth["r2"]

        for name in task.estimators:
            try:
                if name == "wg":
                    record.estimates[name] = within_group(data).beta_hat
                elif name == "pc":
                    pc = iterated_pc(data, _y_factor_count(design, r1, r2), task.em.pc_max_iters, task.em.pc_tol)
                    record.estimates[name] = pc.beta_hat
                else:
                    fit = fit_for_design(data, design, r1, r2, task.em)
                    record.estimates[name] = fit.beta_hat
                    record.mle_converged = fit.converged
                    record.mle_se = fit.se_beta
            except _FIT_ERRORS as exc:
                record.failures[name] = str(exc)
    return record


@dataclass
class McReport:
    """
    Monte Carlo summary.

    Attributes:
        design: Simulated design
        n: Units
        t: Periods
        n_reps: Replications run
        table: Bias and RMSE per estimator (rows) and coefficient, plus success and
            failure counts
        pct_r_correct: Share of replications (in %) whose selected factor numbers were right
        n_not_converged: MLE fits that stopped before convergence (kept in the table)
        mle_se_mean: Mean trace-form standard error per coefficient
        mle_coverage: Share of nominal 95% intervals covering the true coefficient
        failures: One line per failed fit, "rep <j> <estimator>: <message>"
    """

    design: str
    n: int
    t: int
    n_reps: int
    table: pd.DataFrame
    pct_r_correct: Optional[float] = None
    n_not_converged: int = 0
    mle_se_mean: Optional[NDArray] = None
    mle_coverage: Optional[NDArray] = None
    failures: List[str] = field(default_factory=list)

    def bias(self, estimator: str, k: int) -> float:
        return float(self.table.loc[estimator, f"beta{k}_bias"])

    def rmse(self, estimator: str, k: int) -> float:
        return float(self.table.loc[estimator, f"beta{k}_rmse"])

    def to_frame(self) -> pd.DataFrame:
        """The results table with selection and MLE inference columns appended."""
        frame = self.table.copy()
        frame.insert(0, "pct_r_correct", self.pct_r_correct if self.pct_r_correct is not None else np.nan)
        if self.mle_se_mean is not None and "mle" in frame.index:
            for k, (se, cover) in enumerate(zip(self.mle_se_mean, self.mle_coverage), start=1):
                frame[f"beta{k}_se"] = np.nan
                frame[f"beta{k}_coverage"] = np.nan
                frame.loc["mle", f"beta{k}_se"] = se
                frame.loc["mle", f"beta{k}_coverage"] = cover
        return frame


def _summarize(
    cfg: DgpConfig, records: Sequence[_RepRecord], estimators: Sequence[str], selection: bool
) -> McReport:
    beta = np.asarray(cfg.beta_true)
    k = beta.size
    rows = {}
    for name in estimators:
        ok = [rec.estimates[name] for rec in records if name in rec.estimates]
        row: Dict[str, float] = {}
        if ok:
            err = np.vstack(ok) - beta
            bias = np.sum(err, axis=0) / len(ok)
            rmse = np.sqrt(np.sum(err ** 2, axis=0) / len(ok))
        else:
            bias = rmse = np.full(k, np.nan)
        for j in range(k):
            row[f"beta{j + 1}_bias"] = float(bias[j])
            row[f"beta{j + 1}_rmse"] = float(rmse[j])
        row["n_ok"] = len(ok)
        row["n_failed"] = len(records) - len(ok)
        rows[name] = row
    table = pd.DataFrame.from_dict(rows, orient="index").rename_axis("estimator")

    pct = None
    if selection:
        checked = [rec.r_correct for rec in records if rec.r_correct is not None]
        pct = 100.0 * float(np.sum(checked)) / len(checked) if checked else float("nan")

    se_mean = coverage = None
    with_se = [rec for rec in records if rec.mle_se is not None and "mle" in rec.estimates]
    if with_se:
        se = np.vstack([rec.mle_se for rec in with_se])
        err = np.vstack([rec.estimates["mle"] for rec in with_se]) - beta
        z = scipy.stats.norm.ppf(0.975)
        finite = np.isfinite(se)
        se_mean = np.array([np.mean(se[finite[:, j], j]) if finite[:, j].any() else np.nan for j in range(k)])
        covered = (np.abs(err) <= z * se) & finite
        coverage = np.sum(covered, axis=0) / np.maximum(np.sum(finite, axis=0), 1)

    failures = [
        f"rep {rec.index} {name}: {message}" for rec in records for name, message in rec.failures.items()
    ]
    return McReport(
        design=cfg.design,
        n=cfg.n,
        t=cfg.t,
        n_reps=len(records),
        table=table,
        pct_r_correct=pct,
        n_not_converged=sum(1 for rec in records if rec.mle_converged is False),
        mle_se_mean=se_mean,
        mle_coverage=coverage,
        failures=failures,
    )


def run_monte_carlo(
    cfg: DgpConfig,
    n_reps: int,
    estimators: Sequence[str] = ESTIMATORS,
    selection: bool = False,
    em_cfg: Optional[EmConfig] = None,
    threads: Optional[int] = None,
    r_max: int = DEFAULT_R_MAX,
    progress: bool = False,
) -> McReport:
    """
    Repeat generate-and-fit ``n_reps`` times and summarize bias and RMSE.

    Replication j draws from the j-th child of ``SeedSequence(cfg.seed)``, so the
    report does not depend on the number of worker processes.

    Args:
        cfg: Design
        n_reps: Number of replications
        estimators: Subset of ("wg", "pc", "mle")
        selection: Estimate the factor numbers in every replication
        em_cfg: ECM settings for the likelihood fits
        threads: Worker processes (``INTERFX_THREADS`` or all cores by default)
        r_max: Largest total factor count considered when selecting
        progress: Show a progress bar

    Returns:
        McReport
    """
    if n_reps < 1:
        raise ValueError(f"n_reps must be at least 1, got {n_reps}")
    unknown = set(estimators) - set(ESTIMATORS)
    if unknown:
        raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
    em_cfg = em_cfg or EmConfig()
    workers = min(resolve_threads(threads), n_reps)

    children = np.random.SeedSequence(cfg.seed).spawn(n_reps)
    tasks = []
    for j, child in enumerate(children):
        seed = int(child.generate_state(1)[0])
        tasks.append(
            _RepTask(
                index=j,
                dgp=replace(cfg, seed=seed),
                em=replace(em_cfg, seed=seed),
                estimators=tuple(estimators),
                selection=selection,
                r_max=r_max,
            )
        )

    logger.info(
        "Monte Carlo %s N=%d T=%d: %d replications on %d worker(s)", cfg.design, cfg.n, cfg.t, n_reps, workers
    )
    bar = dict(total=n_reps, desc=f"{cfg.design} N={cfg.n} T={cfg.t}", disable=not progress)
    if workers == 1:
        records = [_replicate(task) for task in tqdm(tasks, **bar)]
    else:
        with Pool(processes=workers) as pool:
            records = list(tqdm(pool.imap_unordered(_replicate, tasks), **bar))
    records.sort(key=lambda rec: rec.index)

    report = _summarize(cfg, records, estimators, selection)
    for line in report.failures:
        logger.warning(line)
    return report
