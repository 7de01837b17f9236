"""Command-line entry point: simulate, theory, estimate.

Exit codes: 0 success, 2 for configuration/usage/schema problems, 1 for
runtime failures.  Experiment configs are JSON documents mirroring
``ExperimentConfig``/``ModelParams`` in snake_case; unknown keys are
rejected before any computation starts.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimators, theory
from .dgp import ModelParams, SigmaSpec, load_dataset_csv
from .errors import DegenerateSignalError, GammaBoundaryError
from .montecarlo import (
    DEFAULT_CV_GRID,
    MC_METHODS,
    ExperimentConfig,
    figure_configs,
    run,
    write_figure_csvs,
)

__all__ = ["main", "entry_point", "config_from_json"]


class ConfigError(ValueError):
    """Invalid configuration document or flag combination (exit code 2)."""


_THEORY_KINDS = {
    "bias": "bias_tsls_ridge",
    "bias_tsls_ridge": "bias_tsls_ridge",
    "signal_f": "signal_f",
    "amplifier": "amplifier_a",
    "amplifier_a": "amplifier_a",
    "variance": "asy_variance",
    "asy_variance": "asy_variance",
}

_ESTIMATE_METHODS = {
    "ols": "ols",
    "tsls": "tsls_ridge",
    "ba-tsls": "ba_tsls_ridge",
    "nagar": "nagar",
    "liml": "liml",
}


def _require_keys(doc: dict, allowed: dict[str, type | tuple], where: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    for key, value in doc.items():
        expected = allowed[key]
        if not isinstance(value, expected):
            raise ConfigError(f"{where}.{key}: expected {expected}, got {type(value).__name__}")


def _sigma_from_json(doc: dict) -> SigmaSpec:
    _require_keys(doc, {"kind": str, "rho_z": (int, float)}, "params.sigma")
    try:
        return SigmaSpec(kind=doc.get("kind", "isotropic"), rho_z=float(doc.get("rho_z", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"params.sigma: {exc}") from None


def _params_from_json(doc: dict) -> ModelParams:
    allowed = {
        "beta": (int, float), "rho": (int, float), "n": int, "k": int,
        "f_stat": (int, float), "sigma": dict, "seed": int,
    }
    _require_keys(doc, allowed, "params")
    missing = {"beta", "rho", "n", "k", "f_stat"} - set(doc)
    if missing:
        raise ConfigError(f"params: missing keys {sorted(missing)}")
    try:
        return ModelParams(
            beta=float(doc["beta"]), rho=float(doc["rho"]),
            n=doc["n"], k=doc["k"], f_stat=float(doc["f_stat"]),
            sigma=_sigma_from_json(doc.get("sigma", {})),
            seed=doc.get("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def config_from_json(doc: dict) -> ExperimentConfig:
    allowed = {
        "params": dict, "lambda_grid": list, "methods": list,
        "replications": int, "base_seed": int, "figure_tag": str,
        "cv_grid": list,
    }
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _require_keys(doc, allowed, "config")
    missing = {"params", "lambda_grid", "methods", "replications", "base_seed"} - set(doc)
    if missing:
        raise ConfigError(f"config: missing keys {sorted(missing)}")
    bad = [m for m in doc["methods"] if m not in MC_METHODS]
    if bad:
        raise ConfigError(f"config.methods: unknown methods {bad}; known: {list(MC_METHODS)}")
    try:
        return ExperimentConfig(
            params=_params_from_json(doc["params"]),
            lambda_grid=tuple(float(l) for l in doc["lambda_grid"]),
            methods=tuple(doc["methods"]),
            replications=doc["replications"],
            base_seed=doc["base_seed"],
            figure_tag=doc.get("figure_tag", "experiment"),
            cv_grid=tuple(float(l) for l in doc.get("cv_grid", DEFAULT_CV_GRID)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from None


def _select_figure_configs(tag: str) -> list[ExperimentConfig]:
    known = figure_configs()
    wanted = [c for c in known if c.figure_tag == tag]
    if not wanted and tag == "fig5":
        wanted = [c for c in known if c.figure_tag.startswith("fig5_F")]
    if not wanted:
        tags = sorted({c.figure_tag for c in known} | {"fig5"})
        raise ConfigError(f"unknown figure tag {tag!r}; known: {tags}")
    return wanted


def _parse_grid(spec: str, *, log: bool) -> tuple[float, ...]:
    try:
        lo_s, hi_s, pts_s = spec.split(":")
        lo, hi, pts = float(lo_s), float(hi_s), int(pts_s)
    except ValueError:
        raise ConfigError(f"grid must be lo:hi:points, got {spec!r}") from None
    if pts < 1 or hi < lo:
        raise ConfigError(f"grid must satisfy lo <= hi and points >= 1, got {spec!r}")
    if log:
        if lo <= 0:
            raise ConfigError("log grid requires lo > 0")
        return tuple(np.geomspace(lo, hi, pts))
    return tuple(np.linspace(lo, hi, pts))


def _parse_sigma_flag(value: str) -> SigmaSpec:
    kind, _, rho = value.partition(":")
    try:
        return SigmaSpec(kind=kind, rho_z=float(rho) if rho else 0.0)
    except ValueError as exc:
        raise ConfigError(f"--sigma: {exc}") from None


def _cmd_simulate(args: argparse.Namespace) -> int:
    if (args.config is None) == (args.figure is None):
        raise ConfigError("provide exactly one of a config file or --figure")
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{args.config}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        configs = [config_from_json(doc)]
    else:
        configs = _select_figure_configs(args.figure)
    if args.reps is not None:
        if args.reps < 1:
            raise ConfigError("--reps must be >= 1")
        configs = [
            ExperimentConfig(
                params=c.params, lambda_grid=c.lambda_grid, methods=c.methods,
                replications=args.reps, base_seed=c.base_seed,
                figure_tag=c.figure_tag, cv_grid=c.cv_grid,
            )
            for c in configs
        ]
        print(
            f"note: replication count overridden to {args.reps}; "
            "published tolerances assume the built-in counts",
            file=sys.stderr,
        )
    for config in configs:
        table = run(config, workers=args.workers)
        for path in write_figure_csvs(table, args.out):
            print(path)
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    kind = _THEORY_KINDS[args.kind]
    sigma = _parse_sigma_flag(args.sigma)
    grid = _parse_grid(args.grid, log=False)
    gamma = args.gamma
    params = theory.StructuralParams(
        sigma_eps2=1.0, sigma_nu2=1.0, sigma_eps_nu=args.rho,
        alpha2=gamma * args.f_stat, gamma=gamma, n=args.n,
    )
    curve = theory.curve(kind, params, sigma.limit_psd(), grid)
    lines = ["kind,gamma,sigma,lambda,value"]
    for lam, value in zip(curve.lambdas, curve.values):
        lines.append(f"{kind},{gamma!r},{args.sigma},{lam!r},{value!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    method = _ESTIMATE_METHODS[args.method]
    data = load_dataset_csv(args.data)
    lam_flag = args.lam.strip().lower()
    lam_star: float
    if lam_flag == "cv":
        if method != "ba_tsls_ridge":
            raise ConfigError("--lambda cv is only available for --method ba-tsls")
        grid = _parse_grid(args.grid, log=True) if args.grid else DEFAULT_CV_GRID
        lam_star, _ = estimators.cv_select(data, grid)
    else:
        try:
            lam_star = float(lam_flag)
        except ValueError:
            raise ConfigError(f"--lambda must be a number or 'cv', got {args.lam!r}") from None
        if lam_star < 0:
            raise ConfigError("--lambda must be nonnegative")
    if method == "ols":
        res = estimators.ols(data)
    elif method == "tsls_ridge":
        res = estimators.tsls_ridge(data, lam_star)
    elif method == "nagar":
        res = estimators.nagar(data)
    elif method == "liml":
        res = estimators.liml(data)
    else:
        res = estimators.ba_tsls_ridge(data, lam_star) if lam_star > 0 else estimators.nagar(data)

    def fmt(v: float | None) -> str:
        return "" if v is None or not math.isfinite(v) else repr(float(v))

    se = None if res.variance_hat is None else math.sqrt(res.variance_hat)
    row = [
        res.method, fmt(res.lam), fmt(res.beta_hat), fmt(se), fmt(res.signal),
        fmt(res.diagnostics.get("v_hat", math.nan)),
        fmt(res.diagnostics.get("f_hat_stat", math.nan)),
    ]
    text = "method,lambda,beta_hat,se_hat,signal,v_hat,f_hat_stat\n" + ",".join(row) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgeiv",
        description="Ridge-regularized 2SLS with many instruments: simulation, theory curves, estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a replication experiment and write CSVs")
    sim.add_argument("config", nargs="?", default=None, help="experiment config JSON")
    sim.add_argument("--figure", default=None, help="built-in figure tag (fig1..fig5)")
    sim.add_argument("--reps", type=int, default=None, help="override replication count")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=None,
                     help="worker processes (RMT_IV_THREADS caps this)")
    sim.set_defaults(func=_cmd_simulate)

    theo = sub.add_parser("theory", help="evaluate a limit curve on a lambda grid")
    theo.add_argument("--kind", required=True, choices=sorted(_THEORY_KINDS))
    theo.add_argument("--gamma", type=float, required=True)
    theo.add_argument("--sigma", default="isotropic",
                      help="isotropic | ar1:RHO | equicorrelated:RHO")
    theo.add_argument("--grid", default="0:2:50", help="lo:hi:points (linear)")
    theo.add_argument("--rho", type=float, default=0.6, help="error covariance")
    theo.add_argument("--f-stat", type=float, default=5.0, dest="f_stat")
    theo.add_argument("--n", type=int, default=200)
    theo.add_argument("--out", default=None, help="output CSV (default stdout)")
    theo.set_defaults(func=_cmd_theory)

    est = sub.add_parser("estimate", help="estimate the causal effect from a dataset CSV")
    est.add_argument("data", help="CSV with columns y,x,z1..zk")
    est.add_argument("--method", required=True, choices=sorted(_ESTIMATE_METHODS))
    est.add_argument("--lambda", dest="lam", default="0", help="ridge penalty or 'cv'")
    est.add_argument("--grid", default=None, help="cv grid lo:hi:points (log spaced)")
    est.add_argument("--out", default=None, help="output CSV (default stdout)")
    est.set_defaults(func=_cmd_estimate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateSignalError, GammaBoundaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    raise SystemExit(main())
