"""Sample estimators: ridge / min-norm first stage, bias adjustment, variance, CV.

All smoother algebra runs through the cached n x n gram eigenbasis of
ZZ'/n (one O(n^3) decomposition per dataset), so each penalty value costs
O(n) and the overparameterized case k > n needs no separate code path.
The ridge smoother acts on eigenvalue mu as mu/(mu + lambda) and its
complement as lambda/(mu + lambda); the trace-zero adjusted smoother is

    S_lambda = lambda*v_hat * P_lambda - (1 - lambda*v_hat) * M_lambda,

whose trace vanishes identically because tr(P_lambda)/n = 1 - lambda*v_hat.
At lambda = 0 the same structure holds with the orthogonal projector onto
col(Z): the zero-eigenvalue mass w0 = 1 - rank/n replaces lambda*v_hat,
which reproduces the classic bias-adjusted smoother P0 - (k/n) I for full
column rank and the identity-smoother (interpolation) regime for k >= n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
import scipy.linalg

from .dgp import Dataset
from .errors import DegenerateSignalError, GammaBoundaryError

__all__ = [
    "SmootherQuadratics",
    "EstimateResult",
    "smoother_quadratics",
    "minnorm_quadratics",
    "tsls_ridge",
    "ba_tsls_ridge",
    "nagar",
    "ols",
    "liml",
    "bekker_variance",
    "cv_select",
]

METHODS = ("ols", "tsls_ridge", "ba_tsls_ridge", "nagar", "liml", "ridgeless_tsls")

#: relative threshold below which a signal denominator counts as degenerate
SIGNAL_RTOL = 1e-8


@dataclass(frozen=True)
class SmootherQuadratics:
    """Normalized quadratic forms of one dataset under one smoother pair.

    Every field is divided by n (xPx = x'P x / n and so on).  ``s_p`` and
    ``s_m`` are the coefficients of the trace-zero combination
    S = s_p P - s_m M; the composite S-forms below are derived from the
    P-moments, so they inherit the eigenbasis exactness.
    """

    lam: float
    gamma_n: float
    xx: float
    yy: float
    xy: float
    xPx: float
    xPy: float
    xPPx: float
    xPPy: float
    s_p: float
    s_m: float
    v_hat: float
    v_hat_prime: float
    m_hat: float
    m_hat_prime: float
    trace_P_over_n: float
    rank_fraction: float

    # -- complement and composite forms (P + M = I exactly) --

    @property
    def xMx(self) -> float:
        return self.xx - self.xPx

    @property
    def xMy(self) -> float:
        return self.xy - self.xPy

    @property
    def xMMx(self) -> float:
        return self.xx - 2.0 * self.xPx + self.xPPx

    @property
    def xPMx(self) -> float:
        return self.xPx - self.xPPx

    @property
    def xSx(self) -> float:
        return self.s_p * self.xPx - self.s_m * self.xMx

    @property
    def xSy(self) -> float:
        return self.s_p * self.xPy - self.s_m * self.xMy

    @property
    def xSSx(self) -> float:
        return (
            self.s_p**2 * self.xPPx
            + self.s_m**2 * self.xMMx
            - 2.0 * self.s_p * self.s_m * self.xPMx
        )

    @property
    def xSSy(self) -> float:
        xmmy = self.xy - 2.0 * self.xPy + self.xPPy
        xpmy = self.xPy - self.xPPy
        return (
            self.s_p**2 * self.xPPy
            + self.s_m**2 * xmmy
            - 2.0 * self.s_p * self.s_m * xpmy
        )

    @property
    def trace_S_over_n(self) -> float:
        return self.s_p * self.trace_P_over_n - self.s_m * (1.0 - self.trace_P_over_n)

    def signal_degenerate(self) -> bool:
        return abs(self.xSx) < SIGNAL_RTOL * self.xx


@dataclass(frozen=True)
class EstimateResult:
    beta_hat: float
    variance_hat: float | None
    lam: float
    method: str
    signal: float
    diagnostics: Mapping[str, float]

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.variance_hat is not None and self.variance_hat < 0:
            raise ValueError("variance_hat must be nonnegative")
        object.__setattr__(self, "diagnostics", MappingProxyType(dict(self.diagnostics)))


def _forms(data: Dataset, weights: np.ndarray) -> tuple[float, ...]:
    xr, yr, n = data.x_rot, data.y_rot, data.n
    xx = float(xr @ xr) / n
    yy = float(yr @ yr) / n
    xy = float(xr @ yr) / n
    wx = weights * xr
    xpx = float(wx @ xr) / n
    xpy = float(wx @ yr) / n
    xppx = float(wx @ wx) / n
    xppy = float((weights * wx) @ yr) / n
    return xx, yy, xy, xpx, xpy, xppx, xppy


def smoother_quadratics(data: Dataset, lam: float) -> SmootherQuadratics:
    """Quadratic forms under the ridge smoother pair, lambda > 0."""
    if lam <= 0:
        raise ValueError("lambda must be positive; use minnorm_quadratics at 0")
    mu = data.gram_eigen[0]
    n, k = data.n, data.k
    weights = mu / (mu + lam)
    v_hat = float(np.mean(1.0 / (mu + lam)))
    v_hat_prime = float(np.mean(1.0 / (mu + lam) ** 2))
    # companion rearrangement: the two spectra differ by |n-k| zeros
    m_hat = (n * v_hat - (n - k) / lam) / k
    m_hat_prime = (n * v_hat_prime - (n - k) / lam**2) / k
    xx, yy, xy, xpx, xpy, xppx, xppy = _forms(data, weights)
    return SmootherQuadratics(
        lam=float(lam),
        gamma_n=data.gamma_n,
        xx=xx, yy=yy, xy=xy,
        xPx=xpx, xPy=xpy, xPPx=xppx, xPPy=xppy,
        s_p=lam * v_hat,
        s_m=1.0 - lam * v_hat,
        v_hat=v_hat,
        v_hat_prime=v_hat_prime,
        m_hat=m_hat,
        m_hat_prime=m_hat_prime,
        trace_P_over_n=1.0 - lam * v_hat,
        rank_fraction=float(np.count_nonzero(mu > _rank_tol(data)) / n),
    )


def _rank_tol(data: Dataset) -> float:
    mu = data.gram_eigen[0]
    return data.n * np.finfo(float).eps * float(mu[-1]) if mu[-1] > 0 else 0.0


def minnorm_quadratics(data: Dataset) -> SmootherQuadratics:
    """Exact lambda = 0 quadratic forms via the rank-revealing projector.

    P0 projects onto col(Z) (rank r counted above the spectral tolerance);
    the trace-zero coefficients become (1 - r/n, r/n), the zero-eigenvalue
    analogue of (lambda*v_hat, 1 - lambda*v_hat).
    """
    mu = data.gram_eigen[0]
    n = data.n
    weights = (mu > _rank_tol(data)).astype(float)
    r = float(weights.sum())
    w0 = 1.0 - r / n
    xx, yy, xy, xpx, xpy, xppx, xppy = _forms(data, weights)
    return SmootherQuadratics(
        lam=0.0,
        gamma_n=data.gamma_n,
        xx=xx, yy=yy, xy=xy,
        xPx=xpx, xPy=xpy, xPPx=xppx, xPPy=xppy,
        s_p=w0,
        s_m=1.0 - w0,
        v_hat=math.nan,
        v_hat_prime=math.nan,
        m_hat=math.nan,
        m_hat_prime=math.nan,
        trace_P_over_n=r / n,
        rank_fraction=r / n,
    )


def quadratics(data: Dataset, lam: float) -> SmootherQuadratics:
    return minnorm_quadratics(data) if lam == 0 else smoother_quadratics(data, lam)


def _first_stage_f(data: Dataset) -> float:
    if data.k >= data.n:
        return math.nan
    q0 = minnorm_quadratics(data)
    denom = q0.xMx * data.n / (data.n - data.k)
    if denom <= 0:
        return math.nan
    return (q0.xPx * data.n / data.k) / denom


def _base_diagnostics(q: SmootherQuadratics) -> dict[str, float]:
    return {
        "v_hat": q.v_hat,
        "m_hat": q.m_hat,
        "trace_S_over_n": q.trace_S_over_n,
        "trace_P_over_n": q.trace_P_over_n,
    }


def tsls_ridge(data: Dataset, lam: float) -> EstimateResult:
    """Two-stage least squares with a ridge (or min-norm) first stage."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    q = quadratics(data, lam)
    if abs(q.xPx) < SIGNAL_RTOL * q.xx:
        raise DegenerateSignalError("x'P x/n is numerically zero")
    diag = _base_diagnostics(q)
    diag["f_hat_stat"] = _first_stage_f(data)
    return EstimateResult(
        beta_hat=q.xPy / q.xPx,
        variance_hat=None,
        lam=float(lam),
        method="ridgeless_tsls" if lam == 0 else "tsls_ridge",
        signal=q.xPx,
        diagnostics=diag,
    )


def _bekker_from_quadratics(
    q: SmootherQuadratics, n: int, beta_hat: float
) -> tuple[float, float]:
    """(raw variance, x'S S x_tilde / n) for the given residual plug-in."""
    xe = q.xy - beta_hat * q.xx
    ee = q.yy - 2.0 * beta_hat * q.xy + beta_hat**2 * q.xx
    if ee <= 0:
        raise DegenerateSignalError("residual variance is zero")
    xsse = q.xSSy - beta_hat * q.xSSx
    xssxt = q.xSSx + xsse * xe / ee
    if abs(q.xSx) < SIGNAL_RTOL * q.xx:
        raise DegenerateSignalError("x'S x/n is numerically zero")
    return ee * xssxt / (n * q.xSx**2), xssxt


def bekker_variance(data: Dataset, lam: float, beta_hat: float) -> float:
    """Many-instrument variance estimate for the adjusted estimator.

    sigma_hat^2 * x'S S x_tilde / (x'S x)^2 with
    x_tilde = x + eps_hat (eps_hat'x)/(eps_hat'eps_hat), evaluated through
    exact eigenbasis quadratic forms.  The x_tilde correction can turn the
    numerator negative in small samples; the estimate is floored at zero
    (callers can flag via the raw diagnostics on the estimate result).
    """
    raw, _ = _bekker_from_quadratics(quadratics(data, lam), data.n, beta_hat)
    return max(raw, 0.0)


def ba_tsls_ridge(data: Dataset, lam: float) -> EstimateResult:
    """Bias-adjusted ridge 2SLS through the trace-zero smoother, lambda > 0."""
    if lam <= 0:
        raise ValueError("lambda must be positive; the ridgeless case is nagar")
    q = smoother_quadratics(data, lam)
    return _adjusted_estimate(data, q, method="ba_tsls_ridge")


def nagar(data: Dataset) -> EstimateResult:
    """Standard bias-adjusted (ridgeless) 2SLS, requires k < n."""
    if data.gamma_n >= 1:
        raise GammaBoundaryError("unsupported: gamma >= 1")
    q = minnorm_quadratics(data)
    return _adjusted_estimate(data, q, method="nagar")


def _adjusted_estimate(
    data: Dataset, q: SmootherQuadratics, method: str
) -> EstimateResult:
    if q.signal_degenerate():
        raise DegenerateSignalError(
            f"adjusted signal x'S x/n = {q.xSx:.3e} is degenerate "
            f"(threshold {SIGNAL_RTOL:g} * x'x/n)"
        )
    beta = q.xSy / q.xSx
    raw_var, _ = _bekker_from_quadratics(q, data.n, beta)
    diag = _base_diagnostics(q)
    diag["variance_raw"] = raw_var
    diag["f_hat_stat"] = _first_stage_f(data)
    return EstimateResult(
        beta_hat=beta,
        variance_hat=max(raw_var, 0.0),
        lam=q.lam,
        method=method,
        signal=q.xSx,
        diagnostics=diag,
    )


def nagar_representations(data: Dataset) -> tuple[float, float, float]:
    """The three algebraically equal forms of the adjusted ridgeless estimator."""
    if data.gamma_n >= 1:
        raise GammaBoundaryError("unsupported: gamma >= 1")
    q = minnorm_quadratics(data)
    g = data.gamma_n
    r1 = (q.xPy - g / (1 - g) * q.xMy) / (q.xPx - g / (1 - g) * q.xMx)
    r2 = ((1 - g) * q.xPy - g * q.xMy) / ((1 - g) * q.xPx - g * q.xMx)
    r3 = (q.xPy - g * q.xy) / (q.xPx - g * q.xx)
    return r1, r2, r3


def ols(data: Dataset) -> EstimateResult:
    q_xx = float(data.x @ data.x) / data.n
    if q_xx <= 0:
        raise DegenerateSignalError("x'x is zero")
    q_xy = float(data.x @ data.y) / data.n
    return EstimateResult(
        beta_hat=q_xy / q_xx,
        variance_hat=None,
        lam=0.0,
        method="ols",
        signal=q_xx,
        diagnostics={},
    )


def liml(data: Dataset) -> EstimateResult:
    """Limited-information ML benchmark (smallest-root k-class), k < n only."""
    if data.gamma_n >= 1:
        raise GammaBoundaryError("unsupported: gamma >= 1")
    mu = data.gram_eigen[0]
    keep = mu > _rank_tol(data)
    xr, yr = data.x_rot, data.y_rot
    n = data.n
    wp = np.stack([yr * keep, xr * keep])  # rotated P0 [y x]
    wm = np.stack([yr, xr]) - wp
    a2 = wp @ np.stack([yr, xr]).T / n
    b2 = wm @ np.stack([yr, xr]).T / n
    a2 = (a2 + a2.T) / 2.0
    b2 = (b2 + b2.T) / 2.0
    try:
        kappa = float(scipy.linalg.eigh(a2, b2, eigvals_only=True)[0])
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateSignalError(f"liml eigenproblem singular: {exc}") from None
    kappa = max(kappa, 0.0)
    kt = kappa / (1.0 + kappa)
    q0 = minnorm_quadratics(data)
    den = q0.xPx - kt * q0.xx
    if abs(den) < SIGNAL_RTOL * q0.xx:
        raise DegenerateSignalError("liml denominator is degenerate")
    return EstimateResult(
        beta_hat=(q0.xPy - kt * q0.xy) / den,
        variance_hat=None,
        lam=0.0,
        method="liml",
        signal=den,
        diagnostics={"kappa": kappa, "f_hat_stat": _first_stage_f(data)},
    )


def cv_select(
    data: Dataset,
    grid,
    *,
    plugin: str = "per-lambda",
) -> tuple[float, list[float]]:
    """Grid argmin of CV(lambda) = ln(x'S S x_tilde) - 2 ln(x'S x).

    ``plugin`` controls the residual entering x_tilde: "per-lambda"
    recomputes eps_hat from that lambda's adjusted estimate (matching the
    variance estimator's own structure); "fixed" reuses the residual from
    the smallest grid point.  Cells whose signal degenerates or whose CV
    argument is nonpositive are skipped and reported as nan.  Ties break
    toward the smaller lambda.
    """
    lams = sorted(float(l) for l in grid)
    if not lams:
        raise ValueError("grid must be nonempty")
    if lams[0] <= 0:
        raise ValueError("grid entries must be positive")
    if plugin not in ("per-lambda", "fixed"):
        raise ValueError(f"unknown plugin {plugin!r}")

    fixed_beta: float | None = None
    if plugin == "fixed":
        fixed_beta = ba_tsls_ridge(data, lams[0]).beta_hat

    values: list[float] = []
    best: tuple[float, float] | None = None
    for lam in lams:
        q = smoother_quadratics(data, lam)
        if q.signal_degenerate() or q.xSx <= 0:
            values.append(math.nan)
            continue
        beta = fixed_beta if fixed_beta is not None else q.xSy / q.xSx
        try:
            _, xssxt = _bekker_from_quadratics(q, data.n, beta)
        except DegenerateSignalError:
            values.append(math.nan)
            continue
        if xssxt <= 0:
            values.append(math.nan)
            continue
        cv = math.log(xssxt) - 2.0 * math.log(q.xSx)
        values.append(cv)
        if best is None or cv < best[1]:
            best = (lam, cv)
    if best is None:
        raise DegenerateSignalError("every grid point is degenerate")
    return best[0], values
