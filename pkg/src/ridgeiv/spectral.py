"""Stieltjes-transform machinery for high-dimensional gram matrices.

Population side: discrete spectral measures, the Silverstein fixed point
linking the population spectral distribution H to the limiting empirical
spectral distribution, closed forms for isotropic instruments, and exact
ridgeless (lambda -> 0) limits.  Sample side: trace-based transform
estimates built from gram eigenvalues.

All transforms are evaluated at real argument -lambda with lambda >= 0,
the only regime the downstream estimators need.  Derivatives follow the
second-moment convention

    m'(-lambda) = E[(Y + lambda)^-2],   v'(-lambda) = E[(Y_ + lambda)^-2],

where Y and Y_ are distributed by the spectral laws of the k x k and
n x n gram matrices respectively.  With that convention m' >= m^2 and
v' >= v^2 by Jensen.  Because v diverges like (1 - gamma)/lambda when
gamma < 1, every formula downstream is written in terms of the products
lambda*m and lambda*v, which stay finite; ``RidgelessTransforms`` carries
those products for the exact lambda = 0 case so no caller ever divides
by zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import toeplitz

from .errors import GammaBoundaryError, SilversteinSolverError

__all__ = [
    "SpectralMeasure",
    "TransformValues",
    "RidgelessTransforms",
    "psd_point_mass",
    "psd_ar1",
    "stieltjes_m",
    "empirical_transforms",
    "companion_from_m",
    "solve_silverstein",
    "isotropic_lambda_v",
    "ridgeless_limits",
    "ridgeless_transforms",
]

SOLVER_TOL = 1e-10
SOLVER_MAX_ITER = 10_000
AR1_GRID_SIZE = 2000


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Discrete probability measure over nonnegative eigenvalue locations.

    Canonical form: ``points`` sorted ascending, ``weights`` summing to one.
    Represents both a population spectral distribution H and any discrete
    spectral law needed in tests.
    """

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        points = np.atleast_1d(np.asarray(self.points, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if points.shape != weights.shape or points.ndim != 1 or points.size == 0:
            raise ValueError("points and weights must be equal-length 1-d arrays")
        if np.any(points < 0):
            raise ValueError("spectral measure points must be nonnegative")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        order = np.argsort(points, kind="stable")
        object.__setattr__(self, "points", points[order])
        object.__setattr__(self, "weights", weights[order])

    def mean(self) -> float:
        return float(self.weights @ self.points)


@dataclass(frozen=True)
class TransformValues:
    """Stieltjes transform m, companion v, and derivatives at -lambda.

    Valid only for lambda > 0; the lambda = 0 products live in
    ``RidgelessTransforms``.  ``gamma`` is the aspect ratio k/n.
    """

    lam: float
    gamma: float
    m: float
    v: float
    m_prime: float
    v_prime: float

    @property
    def lam_m(self) -> float:
        return self.lam * self.m

    @property
    def lam_v(self) -> float:
        return self.lam * self.v

    @property
    def p(self) -> float:
        """p(-lambda) = 1 - lambda*m(-lambda), the per-unit signal price."""
        return 1.0 - self.lam * self.m

    def companion_residual(self) -> float:
        """lambda*v - [1 - gamma*(1 - lambda*m)]; zero when consistent."""
        return self.lam_v - (1.0 - self.gamma * (1.0 - self.lam_m))


@dataclass(frozen=True)
class RidgelessTransforms:
    """Exact lambda -> 0 limit products, for gamma != 1.

    Stores lim lambda*v and lim lambda*m so ridgeless formulas never divide
    by lambda.  The price p remains well defined: 1 for gamma < 1 and
    1/gamma for gamma > 1.
    """

    gamma: float
    lam: float = field(default=0.0, init=False)

    def __post_init__(self) -> None:
        ridgeless_limits(self.gamma)  # validates gamma > 0, gamma != 1

    @property
    def lam_v(self) -> float:
        return ridgeless_limits(self.gamma)[0]

    @property
    def lam_m(self) -> float:
        return ridgeless_limits(self.gamma)[1]

    @property
    def p(self) -> float:
        return 1.0 - self.lam_m


def psd_point_mass(t: float) -> SpectralMeasure:
    """Single-atom population spectral distribution at ``t`` > 0.

    Covers isotropic instruments (t = 1) and the equicorrelated limit
    (t = 1 - rho_z, the bulk eigenvalue; the single large eigenvalue has
    vanishing weight in the limit).
    """
    if not t > 0:
        raise ValueError(f"point mass location must be positive, got {t}")
    return SpectralMeasure(np.array([float(t)]), np.array([1.0]))


@lru_cache(maxsize=8)
def _ar1_eigenvalues(rho_z: float, grid_size: int) -> NDArray[np.float64]:
    sigma = toeplitz(rho_z ** np.arange(grid_size))
    return np.maximum(np.linalg.eigvalsh(sigma), 0.0)


def psd_ar1(rho_z: float, grid_size: int = AR1_GRID_SIZE) -> SpectralMeasure:
    """Limit population spectral distribution of the AR-1 covariance.

    Approximated by the equally weighted eigenvalues of the
    ``grid_size`` x ``grid_size`` Toeplitz matrix with entries
    rho_z**|i-j|; the spectral law of that family converges to the limit
    distribution as the size grows.
    """
    if not 0.0 <= rho_z < 1.0:
        raise ValueError(f"rho_z must lie in [0, 1), got {rho_z}")
    if grid_size < 64:
        raise ValueError(f"grid_size must be >= 64, got {grid_size}")
    if rho_z == 0.0:
        return psd_point_mass(1.0)
    eig = _ar1_eigenvalues(float(rho_z), int(grid_size))
    return SpectralMeasure(eig, np.full(grid_size, 1.0 / grid_size))


def stieltjes_m(measure: SpectralMeasure, lam: float) -> float:
    """E[1/(Y + lambda)] for Y distributed by ``measure``.

    lambda = 0 is allowed only when the measure has no atom at zero.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0 and np.any((measure.points == 0) & (measure.weights > 0)):
        raise ZeroDivisionError("measure has an atom at 0; m(0) diverges")
    return float(measure.weights @ (1.0 / (measure.points + lam)))


def empirical_transforms(
    gram_eigenvalues: NDArray[np.float64], n: int, k: int, lam: float
) -> TransformValues:
    """Trace-based transform estimates from the k eigenvalues of Z'Z/n.

    The n x n companion matrix ZZ'/n shares the nonzero spectrum and
    differs by |n - k| zero eigenvalues, so the companion estimate is
    obtained by exact zero padding; the finite-sample companion identity
    lambda*v_hat = 1 - (k/n)(1 - lambda*m_hat) then holds to rounding.
    """
    mu = np.asarray(gram_eigenvalues, dtype=float).ravel()
    if mu.size != k:
        raise ValueError(f"expected {k} gram eigenvalues, got {mu.size}")
    if lam <= 0:
        raise ValueError("lambda must be positive for empirical transforms")
    m_hat = float(np.mean(1.0 / (mu + lam)))
    m_prime_hat = float(np.mean(1.0 / (mu + lam) ** 2))
    v_hat = (k * m_hat + (n - k) / lam) / n
    v_prime_hat = (k * m_prime_hat + (n - k) / lam**2) / n
    return TransformValues(
        lam=float(lam), gamma=k / n, m=m_hat, v=v_hat,
        m_prime=m_prime_hat, v_prime=v_prime_hat,
    )


def companion_from_m(m_value: float, gamma: float, lam: float) -> float:
    """Companion transform from m via lambda*v = 1 - gamma*(1 - lambda*m).

    For lam > 0, ``m_value`` is m(-lambda) and the return value is
    v(-lambda).  For lam = 0, ``m_value`` must be the limit product
    lambda*m and the return value is the limit product lambda*v; the
    division by lambda is undefined there.
    """
    if lam > 0:
        return (1.0 - gamma * (1.0 - lam * m_value)) / lam
    if lam == 0:
        return 1.0 - gamma * (1.0 - m_value)
    raise ValueError("lambda must be nonnegative")


def isotropic_lambda_v(gamma: float, lam: float) -> float:
    """Closed-form product lambda*v(-lambda) for the point mass at 1."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    d = 1.0 - gamma - lam
    return (d + np.sqrt(d * d + 4.0 * lam)) / 2.0


def ridgeless_limits(gamma: float) -> tuple[float, float]:
    """Exact lambda -> 0 products (lim lambda*v, lim lambda*m).

    (1 - gamma, 0) for gamma < 1 and (0, 1 - 1/gamma) for gamma > 1.
    The boundary gamma = 1 is rejected: both products collapse to zero
    there and the downstream limit formulas are not defined.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if gamma == 1:
        raise GammaBoundaryError("ridgeless limits are undefined at gamma = 1")
    if gamma < 1:
        return 1.0 - gamma, 0.0
    return 0.0, 1.0 - 1.0 / gamma


def ridgeless_transforms(gamma: float) -> RidgelessTransforms:
    return RidgelessTransforms(gamma=gamma)


def _silverstein_integral(t: NDArray, w: NDArray, v: float) -> float:
    return float(np.sum(w * t / (1.0 + t * v)))


def _bisect_increasing(t: NDArray, w: NDArray, gamma: float, lam: float) -> float:
    # R(v) = lam*v + gamma * int t v/(1+t v) dH - 1 is strictly increasing
    # from -1 at v=0, so bisection on (0, (1+eps)/lam] is guaranteed.
    def excess(v: float) -> float:
        return lam * v + gamma * v * _silverstein_integral(t, w, v) - 1.0

    lo, hi = 0.0, (1.0 + 1e-9) / lam
    if excess(hi) < 0:  # measure concentrated at 0; root at v = 1/lam
        return 1.0 / lam
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_silverstein(
    H: SpectralMeasure,
    gamma: float,
    lam: float,
    *,
    tol: float = SOLVER_TOL,
    max_iter: int = SOLVER_MAX_ITER,
) -> TransformValues:
    """Solve 1/v = lambda + gamma * int t/(1 + t v) dH(t) for v(-lambda).

    Damped fixed-point iteration (damping 0.5, started from
    1/(lambda + gamma*mean(H))) with a bisection fallback on the
    equivalent monotone form, then a short Newton polish.  The returned
    values satisfy the defining equation to ``tol`` and the companion
    identity by construction: lambda*m is evaluated through the solved
    fixed point as int dH/(1 + t v).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive; use ridgeless_transforms at 0")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    t, w = H.points, H.weights

    def residual(v: float) -> float:
        return 1.0 / v - lam - gamma * _silverstein_integral(t, w, v)

    v = 1.0 / (lam + gamma * H.mean())
    converged = False
    prev_step = 0.0
    for it in range(max_iter):
        target = 1.0 / (lam + gamma * _silverstein_integral(t, w, v))
        step = target - v
        v = v + 0.5 * step
        if abs(residual(v)) <= tol:
            converged = True
            break
        if prev_step != 0.0 and step * prev_step < 0 and abs(step) >= abs(prev_step):
            break  # oscillating; the monotone bisection is guaranteed
        prev_step = step
    if not converged:
        v = _bisect_increasing(t, w, gamma, lam)
    # Newton polish on the increasing form, well conditioned for tiny lambda
    for _ in range(4):
        r = lam * v + gamma * v * _silverstein_integral(t, w, v) - 1.0
        slope = lam + gamma * float(np.sum(w * t / (1.0 + t * v) ** 2))
        v = v - r / slope
    res = residual(v)
    if not np.isfinite(v) or v <= 0 or abs(res) > tol:
        raise SilversteinSolverError(
            f"Silverstein solve failed at gamma={gamma}, lambda={lam}", float(res)
        )

    one_plus_tv = 1.0 + t * v
    lam_m = float(np.sum(w / one_plus_tv))  # equals lambda*m at the fixed point
    m = lam_m / lam
    j1 = float(np.sum(w * t / one_plus_tv**2))
    j2 = float(np.sum(w * t**2 / one_plus_tv**2))
    v_prime = v * v / (1.0 - gamma * v * v * j2)
    m_prime = (m - v_prime * j1) / lam
    return TransformValues(
        lam=float(lam), gamma=float(gamma), m=m, v=float(v),
        m_prime=m_prime, v_prime=v_prime,
    )
