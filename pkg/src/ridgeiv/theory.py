"""Closed-form limiting bias, signal, amplifier, and variance formulas.

Everything here is a deterministic function of structural parameters and
solved transform values; no data enters.  All formulas are written in the
product parameterization (lambda*m, lambda*v), so the exact ridgeless
limits can be evaluated without tiny-lambda substitution.

Derivative convention inside the asymptotic variance: p' denotes the
lambda-derivative of p(-lambda) = 1 - lambda*m(-lambda), i.e.
p' = lambda*m'(-lambda) - m(-lambda) with m' the second-moment transform.
That sign makes the variance formula reduce to the classic
many-instrument (Bekker) variance as lambda -> 0 and, at lambda > 0,
match both Monte Carlo variation and the limit of the sample quadratic
form x'S S x/n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, GammaBoundaryError, SilversteinSolverError
from .spectral import (
    RidgelessTransforms,
    SpectralMeasure,
    TransformValues,
    ridgeless_transforms,
    solve_silverstein,
)

__all__ = [
    "StructuralParams",
    "TheoryCurve",
    "CURVE_KINDS",
    "bias_tsls_ridge_limit",
    "bias_ols",
    "amplifier_a",
    "signal_f",
    "asy_variance_ba_ridge",
    "bekker_asy_variance",
    "mean_inverse_esd",
    "curve",
]

TransformLike = TransformValues | RidgelessTransforms

CURVE_KINDS = ("bias_tsls_ridge", "signal_f", "amplifier_a", "asy_variance")

_TINY = 1e-12


@dataclass(frozen=True)
class StructuralParams:
    """Structural parameters of the simultaneous-equations model.

    The implied reduced-form covariance [[sigma_eps2, sigma_eps_nu],
    [sigma_eps_nu, sigma_nu2]] must be positive definite and the
    first-stage signal alpha2 strictly positive.
    """

    sigma_eps2: float
    sigma_nu2: float
    sigma_eps_nu: float
    alpha2: float
    gamma: float
    n: int

    def __post_init__(self) -> None:
        if self.sigma_eps2 <= 0 or self.sigma_nu2 <= 0:
            raise ValueError("error variances must be positive")
        if self.sigma_eps_nu**2 >= self.sigma_eps2 * self.sigma_nu2:
            raise ValueError("error covariance matrix must be positive definite")
        if self.alpha2 <= 0:
            raise ValueError("alpha2 must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def mu2(self) -> float:
        """Concentration parameter n * alpha2 / sigma_nu2."""
        return self.n * self.alpha2 / self.sigma_nu2

    @property
    def f_stat(self) -> float:
        """Population first-stage F statistic mu2 / k."""
        return self.mu2 / (self.gamma * self.n)


@dataclass(frozen=True)
class TheoryCurve:
    lambdas: tuple[float, ...]
    values: tuple[float, ...]
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if len(self.lambdas) != len(self.values):
            raise ValueError("lambdas and values must have equal length")
        if np.any(np.diff(self.lambdas) <= 0):
            raise ValueError("lambdas must be strictly increasing")


def bias_tsls_ridge_limit(params: StructuralParams, tv: TransformLike) -> float:
    """Almost-sure limit of the ridge first-stage 2SLS bias.

    sigma_eps_nu*(1 - lambda*v) / [alpha2*(1 - lambda*p) + sigma_nu2*(1 - lambda*v)]
    with p = 1 - lambda*m; valid at lambda = 0 through the stored products.
    """
    lam_p = tv.lam * tv.p
    num = params.sigma_eps_nu * (1.0 - tv.lam_v)
    den = params.alpha2 * (1.0 - lam_p) + params.sigma_nu2 * (1.0 - tv.lam_v)
    if abs(den) < _TINY:
        raise DegenerateSignalError("limiting first-stage signal vanished")
    return num / den


def bias_ols(params: StructuralParams) -> float:
    """OLS bias sigma_eps_nu / (alpha2 + sigma_nu2), the gamma-free benchmark."""
    return params.sigma_eps_nu / (params.alpha2 + params.sigma_nu2)


def amplifier_a(tv: TransformLike) -> float:
    """Ridge amplifier of the first-stage F: a(-lambda) = 1/p - lambda.

    Equals gamma*(1 - lambda*p)/(1 - lambda*v) by the companion identity,
    and 1 at the ridgeless limit for gamma < 1.
    """
    if abs(1.0 - tv.lam_v) < _TINY:
        raise ValueError("amplifier undefined where lambda*v = 1")
    return 1.0 / tv.p - tv.lam


def signal_f(tv: TransformLike) -> float:
    """Limiting normalized adjusted signal f(-lambda) = 1 - (lambda + gamma)*p."""
    return 1.0 - (tv.lam + tv.gamma) * tv.p


def bekker_asy_variance(params: StructuralParams) -> float:
    """Classic many-instrument variance of bias-adjusted 2SLS (gamma < 1)."""
    if params.gamma >= 1:
        raise DegenerateSignalError(
            "ridgeless adjusted signal vanishes for gamma >= 1"
        )
    g = params.gamma
    second = (g / (1.0 - g)) * (
        params.sigma_eps2 * params.sigma_nu2 + params.sigma_eps_nu**2
    ) / params.alpha2**2
    return (params.sigma_eps2 / params.alpha2 + second) / params.n


def asy_variance_ba_ridge(params: StructuralParams, tv: TransformLike) -> float:
    """Asymptotic variance of the bias-adjusted ridge 2SLS estimator.

    (1/n) [ (sigma_eps2/alpha2) * ((1-gamma*p)f - lambda*p(1-gamma*p) - lambda^2 p') / f^2
          + ((sigma_eps2*sigma_nu2 + sigma_eps_nu^2)/alpha2^2) * (lambda^2 v' - (lambda v)^2) / f^2 ]
    with p' = lambda*m' - m.  At lambda = 0 this is the Bekker variance.
    """
    if isinstance(tv, RidgelessTransforms):
        return bekker_asy_variance(params)
    f = signal_f(tv)
    if abs(f) < _TINY:
        raise DegenerateSignalError("limiting adjusted signal f(-lambda) = 0")
    lam, g, p = tv.lam, tv.gamma, tv.p
    p_deriv = lam * tv.m_prime - tv.m
    n1 = (1.0 - g * p) * f - lam * p * (1.0 - g * p) - lam**2 * p_deriv
    n2 = lam**2 * tv.v_prime - tv.lam_v**2
    noise = params.sigma_eps2 * params.sigma_nu2 + params.sigma_eps_nu**2
    return (
        params.sigma_eps2 / params.alpha2 * n1 + noise / params.alpha2**2 * n2
    ) / (f * f * params.n)


def mean_inverse_esd(H: SpectralMeasure, gamma: float, lam: float = 1e-8) -> float:
    """Numerical E[Y^-1] over the limiting sample spectral law, gamma < 1.

    Diagnostic for the slope conditions on the amplifier (E[Y^-1] >= 1) and
    the adjusted signal (gamma*E[Y^-1] >= 1): m(-lambda) at a small penalty.
    For isotropic instruments this equals 1/(1 - gamma).
    """
    if gamma >= 1:
        raise GammaBoundaryError("E[Y^-1] diverges for gamma >= 1")
    return solve_silverstein(H, gamma, lam).m


def _transforms_at(H: SpectralMeasure, gamma: float, lam: float) -> TransformLike:
    if lam == 0:
        return ridgeless_transforms(gamma)
    return solve_silverstein(H, gamma, lam)


def curve(
    kind: str,
    params: StructuralParams,
    H: SpectralMeasure,
    lambda_grid,
) -> TheoryCurve:
    """Evaluate one limit formula over a lambda grid (Silverstein solve per point)."""
    grid = [float(l) for l in lambda_grid]
    if not grid:
        raise ValueError("lambda grid must be nonempty")
    if any(l < 0 for l in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be nonnegative and strictly increasing")
    if kind not in CURVE_KINDS:
        raise ValueError(f"unknown curve kind {kind!r}")
    values = []
    for lam in grid:
        try:
            tv = _transforms_at(H, params.gamma, lam)
        except SilversteinSolverError as exc:
            raise SilversteinSolverError(
                f"transform solve failed at lambda={lam}", exc.residual
            ) from exc
        if kind == "bias_tsls_ridge":
            values.append(bias_tsls_ridge_limit(params, tv))
        elif kind == "signal_f":
            values.append(signal_f(tv))
        elif kind == "amplifier_a":
            values.append(amplifier_a(tv))
        else:
            values.append(asy_variance_ba_ridge(params, tv))
    return TheoryCurve(lambdas=tuple(grid), values=tuple(values), kind=kind)
