"""Replication harness with deterministic seeding and figure-ready CSV output.

Each replication derives its dataset seed from (base_seed, replication
index), so tables are byte-identical across worker counts and scheduling.
Degenerate cells (for example the adjusted estimator at lambda -> 0 with
gamma > 1) are recorded as flagged missing values, never silent numbers.

Summary CSVs carry one ``theory_value`` column per (method, lambda) cell
computed from the limit formulas, so downstream plotting never redoes
math.  The Monte Carlo statistics columns refer to the figure family's
quantity of interest: the estimate beta_hat for the bias, variance, and
density families, and the adjusted signal x'S x/n for the signal family.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import estimators, theory
from .dgp import Dataset, ModelParams, SigmaSpec, generate, split_seed
from .errors import DegenerateSignalError, GammaBoundaryError
from .spectral import SpectralMeasure, ridgeless_transforms, solve_silverstein

__all__ = [
    "ExperimentConfig",
    "RepRow",
    "SummaryRow",
    "ReplicationTable",
    "run",
    "summarize",
    "density",
    "figure_configs",
    "figure_family",
    "write_figure_csvs",
    "DEFAULT_CV_GRID",
    "MC_METHODS",
]

MC_METHODS = (
    "ols",
    "tsls_ridge",
    "ridgeless_tsls",
    "ba_tsls_ridge",
    "nagar",
    "liml",
    "ba_tsls_ridge_cv",
)

#: methods evaluated once per replication rather than per grid point
LAMBDA_FREE = ("ols", "ridgeless_tsls", "nagar", "liml", "ba_tsls_ridge_cv")

DEFAULT_CV_GRID = tuple(np.geomspace(1e-3, 10.0, 40))

SUMMARY_COLUMNS = (
    "figure_tag", "gamma", "sigma_kind", "F", "method", "lambda",
    "mc_mean", "mc_bias", "mc_sd", "mc_se", "mean_var_hat",
    "theory_value", "n_flagged",
)

REPLICATION_COLUMNS = (
    "replication", "method", "lambda", "beta_hat", "variance_hat",
    "signal", "flags",
)


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    lambda_grid: tuple[float, ...]
    methods: tuple[str, ...]
    replications: int
    base_seed: int
    figure_tag: str = ""
    cv_grid: tuple[float, ...] = DEFAULT_CV_GRID

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        grid = tuple(float(l) for l in self.lambda_grid)
        if not grid or any(l < 0 for l in grid):
            raise ValueError("lambda grid must be nonempty and nonnegative")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly ascending")
        object.__setattr__(self, "lambda_grid", grid)
        unknown = set(self.methods) - set(MC_METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "cv_grid", tuple(float(l) for l in self.cv_grid))


@dataclass(frozen=True)
class RepRow:
    replication: int
    method: str
    lam: float
    beta_hat: float
    variance_hat: float
    signal: float
    flags: str


@dataclass(frozen=True)
class ReplicationTable:
    rows: tuple[RepRow, ...]
    config: ExperimentConfig


@dataclass(frozen=True)
class SummaryRow:
    method: str
    lam: float
    n_ok: int
    mc_mean: float
    mc_bias: float
    mc_sd: float
    mc_var: float
    mc_se: float
    mean_variance_hat: float
    mean_signal: float
    sd_signal: float
    n_flagged: int


def _estimate_cell(data: Dataset, method: str, lam: float, cv_grid) -> RepRow:
    beta = var = signal = math.nan
    flags = []
    try:
        if method == "ols":
            res = estimators.ols(data)
        elif method == "tsls_ridge" or method == "ridgeless_tsls":
            res = estimators.tsls_ridge(data, lam)
        elif method == "nagar":
            res = estimators.nagar(data)
        elif method == "liml":
            res = estimators.liml(data)
        elif method == "ba_tsls_ridge_cv":
            lam_star, _ = estimators.cv_select(data, cv_grid)
            res = estimators.ba_tsls_ridge(data, lam_star)
        elif method == "ba_tsls_ridge":
            if lam == 0:
                if data.gamma_n >= 1:
                    raise DegenerateSignalError(
                        "adjusted ridgeless signal vanishes for gamma >= 1"
                    )
                res = estimators.nagar(data)
            else:
                res = estimators.ba_tsls_ridge(data, lam)
        else:
            raise ValueError(f"unknown method {method!r}")
        beta = res.beta_hat
        var = math.nan if res.variance_hat is None else res.variance_hat
        signal = res.signal
        lam = res.lam
        if res.diagnostics.get("variance_raw", 0.0) < 0.0:
            flags.append("variance_floored")
    except DegenerateSignalError:
        flags.append("degenerate_signal")
    except GammaBoundaryError:
        flags.append("unsupported_gamma")
    except (ValueError, np.linalg.LinAlgError) as exc:
        flags.append(f"error:{type(exc).__name__}")
    return RepRow(-1, method, float(lam), beta, var, signal, ";".join(flags))


def _run_replication(config: ExperimentConfig, rep: int) -> list[RepRow]:
    params = replace(config.params, seed=split_seed(config.base_seed, rep))
    data = generate(params)
    rows = []
    for method in config.methods:
        lams = (0.0,) if method in LAMBDA_FREE else config.lambda_grid
        for lam in lams:
            cell = _estimate_cell(data, method, lam, config.cv_grid)
            rows.append(replace(cell, replication=rep))
    return rows


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = min(4, os.cpu_count() or 1)
    cap = os.environ.get("RMT_IV_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def run(config: ExperimentConfig, workers: int | None = None) -> ReplicationTable:
    """Execute all replications; output is invariant to the worker count."""
    workers = _resolve_workers(workers)
    reps = range(config.replications)
    if workers == 1 or config.replications == 1:
        per_rep = [_run_replication(config, r) for r in reps]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_run_replication, [config] * config.replications, reps, chunksize=8))
    rows = [row for rep_rows in per_rep for row in rep_rows]
    return ReplicationTable(rows=tuple(rows), config=config)


def _nan_stats(values: np.ndarray) -> tuple[float, float, float]:
    ok = values[np.isfinite(values)]
    if ok.size == 0:
        return math.nan, math.nan, math.nan
    mean = float(ok.mean())
    if ok.size < 2:
        return mean, math.nan, math.nan
    sd = float(ok.std(ddof=1))
    return mean, sd, sd / math.sqrt(ok.size)


def summarize(table: ReplicationTable) -> list[SummaryRow]:
    """Per-(method, lambda) aggregates across replications."""
    if not table.rows:
        raise ValueError("cannot summarize an empty table")
    beta_true = table.config.params.beta
    cells: dict[tuple[str, float | None], list[RepRow]] = {}
    order: list[tuple[str, float | None]] = []
    for row in table.rows:
        # cv rows carry their per-replication lambda*, aggregate them as one cell
        lam_key = None if row.method == "ba_tsls_ridge_cv" else row.lam
        key = (row.method, lam_key)
        if key not in cells:
            cells[key] = []
            order.append(key)
        cells[key].append(row)
    out = []
    for method, lam_key in order:
        rows = cells[(method, lam_key)]
        lam = math.nan if lam_key is None else lam_key
        betas = np.array([r.beta_hat for r in rows])
        mean, sd, se = _nan_stats(betas)
        sig_mean, sig_sd, _ = _nan_stats(np.array([r.signal for r in rows]))
        var_mean, _, _ = _nan_stats(np.array([r.variance_hat for r in rows]))
        n_flagged = sum(1 for r in rows if r.flags)
        out.append(SummaryRow(
            method=method,
            lam=lam,
            n_ok=int(np.isfinite(betas).sum()),
            mc_mean=mean,
            mc_bias=mean - beta_true if math.isfinite(mean) else math.nan,
            mc_sd=sd,
            mc_var=sd * sd if math.isfinite(sd) else math.nan,
            mc_se=se,
            mean_variance_hat=var_mean,
            mean_signal=sig_mean,
            sd_signal=sig_sd,
            n_flagged=n_flagged,
        ))
    return out


def density(
    table: ReplicationTable,
    method: str,
    lambda_policy: float | str = "cv",
    grid_size: int = 512,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-kernel density (Silverman bandwidth) of one method's estimates.

    ``lambda_policy`` is "cv" for the per-replication cv-selected estimate
    or a fixed grid lambda.
    """
    if lambda_policy == "cv":
        rows = [r for r in table.rows if r.method == method]
    else:
        lam = float(lambda_policy)
        rows = [r for r in table.rows if r.method == method and r.lam == lam]
    values = np.array([r.beta_hat for r in rows])
    values = values[np.isfinite(values)]
    if values.size < 50:
        raise ValueError(f"need >= 50 estimates for a density, got {values.size}")
    sd = float(values.std(ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    h = 0.9 * spread * values.size ** (-0.2)
    scale = float(np.abs(values).max())
    if h <= 1e-12 * max(1.0, scale):
        # all estimates (numerically) identical: render a resolvable spike
        h = max(1e-9, 1e-9 * scale)
    grid = np.linspace(values.min() - 5 * h, values.max() + 5 * h, grid_size)
    z = (grid[:, None] - values[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * h * math.sqrt(2 * math.pi))
    return grid, dens


# ---------------------------------------------------------------------------
# built-in experiment configurations behind the five figure families
# ---------------------------------------------------------------------------

_N = 200
_LIN10 = tuple(np.round(np.linspace(0.0, 2.0, 10), 12))
_LIN10_POS = tuple(np.round(np.linspace(0.2, 2.0, 10), 12))
_GAMMA_K = {0.5: 100, 0.6: 120, 0.75: 150, 1.25: 250}


def _params(k: int, sigma: SigmaSpec, f_stat: float = 5.0) -> ModelParams:
    return ModelParams(beta=0.0, rho=0.6, n=_N, k=k, f_stat=f_stat, sigma=sigma)


def figure_configs() -> list[ExperimentConfig]:
    """The built-in experiment grid: one config per (figure family, gamma)."""
    ar1 = SigmaSpec("ar1", 0.5)
    iso = SigmaSpec("isotropic")
    configs: list[ExperimentConfig] = []

    def grid_for(gamma: float) -> tuple[float, ...]:
        # the adjusted/ridgeless point exists only below the interpolation
        # boundary; above it the grid starts strictly positive
        return _LIN10 if gamma < 1 else _LIN10_POS

    for i, gamma in enumerate((0.75, 1.25)):
        k = _GAMMA_K[gamma]
        configs.append(ExperimentConfig(
            params=_params(k, ar1), lambda_grid=grid_for(gamma),
            methods=("tsls_ridge", "ols"), replications=500,
            base_seed=1101 + i, figure_tag="fig1",
        ))
    for i, gamma in enumerate((0.75, 1.25)):
        k = _GAMMA_K[gamma]
        configs.append(ExperimentConfig(
            params=_params(k, ar1), lambda_grid=grid_for(gamma),
            methods=("ba_tsls_ridge", "ols"), replications=500,
            base_seed=1201 + i, figure_tag="fig2",
        ))
    for tag, sigma, seed0 in (("fig3", iso, 1301), ("fig3_ar1", ar1, 1311)):
        for i, gamma in enumerate((0.5, 0.6, 0.75, 1.25)):
            configs.append(ExperimentConfig(
                params=_params(_GAMMA_K[gamma], sigma), lambda_grid=_LIN10,
                methods=("ba_tsls_ridge",), replications=500,
                base_seed=seed0 + i, figure_tag=tag,
            ))
    # the variance figure plots the lambda > 0 curve; the ridgeless variance
    # appears as a horizontal reference, so its grid starts strictly positive
    for tag, sigma, seed0 in (("fig4", iso, 1401), ("fig4_ar1", ar1, 1411)):
        for i, gamma in enumerate((0.75, 1.25)):
            configs.append(ExperimentConfig(
                params=_params(_GAMMA_K[gamma], sigma), lambda_grid=_LIN10_POS,
                methods=("ba_tsls_ridge",), replications=500,
                base_seed=seed0 + i, figure_tag=tag,
            ))
    for j, f in enumerate((1.0, 2.0, 5.0)):
        for i, gamma in enumerate((0.75, 1.25)):
            configs.append(ExperimentConfig(
                params=_params(_GAMMA_K[gamma], ar1, f_stat=f), lambda_grid=(0.0,),
                methods=("ridgeless_tsls", "nagar", "liml", "ba_tsls_ridge_cv"),
                replications=1000,
                base_seed=1501 + 2 * j + i, figure_tag=f"fig5_F{f:g}",
            ))
    return configs


def figure_family(figure_tag: str) -> str:
    """Which quantity the figure family summarizes: bias, signal, variance, density."""
    if figure_tag.startswith("fig3"):
        return "signal"
    if figure_tag.startswith("fig4"):
        return "variance"
    if figure_tag.startswith("fig5"):
        return "density"
    return "bias"


def _theory_value(
    config: ExperimentConfig, H: SpectralMeasure, method: str, lam: float, family: str
) -> float:
    params = config.params.structural()
    gamma = params.gamma

    def transforms(l: float):
        return ridgeless_transforms(gamma) if l == 0 else solve_silverstein(H, gamma, l)

    try:
        if family == "signal":
            return params.alpha2 * theory.signal_f(transforms(lam))
        if family == "variance":
            return theory.asy_variance_ba_ridge(params, transforms(lam))
        offset = config.params.beta if family == "density" else 0.0
        if method == "ols":
            return offset + theory.bias_ols(params)
        if method in ("tsls_ridge", "ridgeless_tsls"):
            use_lam = 0.0 if method == "ridgeless_tsls" else lam
            return offset + theory.bias_tsls_ridge_limit(params, transforms(use_lam))
        # adjusted estimators are consistent: zero bias / location beta
        return offset
    except (DegenerateSignalError, GammaBoundaryError):
        return math.nan


def _fmt(value: float | int | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        return ""
    return repr(float(value))


def write_figure_csvs(table: ReplicationTable, out_dir) -> list[Path]:
    """Write the replication table, summary (with theory overlay), and, for
    the density family, per-method kernel densities.  Returns written paths."""
    config = table.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gamma = config.params.gamma
    tag = config.figure_tag or "experiment"
    stem = f"{tag}_{gamma:g}"
    family = figure_family(tag)
    H = config.params.sigma.limit_psd()
    f_pop = config.params.f_stat
    written = []

    rep_path = out / f"{stem}_replications.csv"
    with open(rep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATION_COLUMNS)
        for r in table.rows:
            writer.writerow([
                r.replication, r.method, _fmt(r.lam), _fmt(r.beta_hat),
                _fmt(r.variance_hat), _fmt(r.signal), r.flags,
            ])
    written.append(rep_path)

    summary_path = out / f"{stem}.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in summarize(table):
            if family == "signal":
                mean = row.mean_signal
                theory_val = _theory_value(config, H, row.method, row.lam, family)
                bias = mean - theory_val if math.isfinite(mean) and math.isfinite(theory_val) else math.nan
                sd, se = row.sd_signal, math.nan
                if math.isfinite(row.sd_signal) and row.n_ok > 1:
                    se = row.sd_signal / math.sqrt(row.n_ok)
            else:
                mean, bias = row.mc_mean, row.mc_bias
                sd, se = row.mc_sd, row.mc_se
                theory_val = _theory_value(config, H, row.method, row.lam, family)
            writer.writerow([
                tag, _fmt(gamma), config.params.sigma.kind, _fmt(f_pop),
                row.method, _fmt(row.lam), _fmt(mean), _fmt(bias), _fmt(sd),
                _fmt(se), _fmt(row.mean_variance_hat), _fmt(theory_val),
                row.n_flagged,
            ])
    written.append(summary_path)

    if family == "density":
        dens_path = out / f"{stem}_density.csv"
        with open(dens_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "beta", "density"])
            for method in config.methods:
                policy = "cv" if method == "ba_tsls_ridge_cv" else 0.0
                try:
                    grid, dens = density(table, method, policy)
                except ValueError:
                    continue  # methods flagged everywhere (liml at gamma > 1)
                for b, d in zip(grid, dens):
                    writer.writerow([method, _fmt(float(b)), _fmt(float(d))])
        written.append(dens_path)
    return written
