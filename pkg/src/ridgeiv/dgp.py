"""Seeded generation of (y, x, Z) from the simultaneous-equations design.

Model: y = beta*x + eps, x = Z@pi + nu, with Z = W @ Sigma^{1/2} for i.i.d.
standard-normal W, dense random first-stage coefficients
pi ~ N(0, (alpha2/k) I), nu ~ N(0, 1), and eps = rho*nu + sqrt(1-rho^2)*w.
The target population first-stage F statistic pins alpha2 = (k/n)*F.

Reproducibility contract: all draws come from numpy's PCG64 generator
seeded through ``numpy.random.SeedSequence``, in the fixed order
W, pi, nu, w.  Replication streams are split with ``split_seed``, which
derives child seeds from (base_seed, replication_index) via SeedSequence
spawn keys, so parallel Monte Carlo runs are bit-reproducible regardless
of scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cholesky, toeplitz

from .spectral import AR1_GRID_SIZE, SpectralMeasure, psd_ar1, psd_point_mass
from .theory import StructuralParams

__all__ = [
    "SigmaSpec",
    "ModelParams",
    "Dataset",
    "generate",
    "concentration",
    "split_seed",
    "save_dataset_csv",
    "load_dataset_csv",
]

SIGMA_KINDS = ("isotropic", "ar1", "equicorrelated")


@dataclass(frozen=True)
class SigmaSpec:
    """Instrument covariance family: isotropic, AR-1, or equicorrelated."""

    kind: str = "isotropic"
    rho_z: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in SIGMA_KINDS:
            raise ValueError(f"sigma kind must be one of {SIGMA_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.rho_z < 1.0:
            raise ValueError(f"rho_z must lie in [0, 1), got {self.rho_z}")

    def matrix(self, k: int) -> NDArray[np.float64]:
        if self.kind == "isotropic":
            return np.eye(k)
        if self.kind == "ar1":
            return toeplitz(self.rho_z ** np.arange(k))
        return (1.0 - self.rho_z) * np.eye(k) + self.rho_z * np.ones((k, k))

    def sqrt_matrix(self, k: int) -> NDArray[np.float64]:
        """Lower Cholesky factor L with L @ L.T = Sigma."""
        if self.kind == "isotropic":
            return np.eye(k)
        return cholesky(self.matrix(k), lower=True)

    def limit_psd(self, grid_size: int = AR1_GRID_SIZE) -> SpectralMeasure:
        """Limit population spectral distribution of this family.

        The equicorrelated family contributes k-1 eigenvalues at 1 - rho_z
        and one diverging eigenvalue of vanishing weight, so its limit is
        the point mass at 1 - rho_z.
        """
        if self.kind == "ar1":
            return psd_ar1(self.rho_z, grid_size)
        if self.kind == "equicorrelated":
            return psd_point_mass(1.0 - self.rho_z)
        return psd_point_mass(1.0)


@dataclass(frozen=True)
class ModelParams:
    """Simulation design: causal effect, endogeneity, dimensions, signal, seed."""

    beta: float
    rho: float
    n: int
    k: int
    f_stat: float
    sigma: SigmaSpec = field(default_factory=SigmaSpec)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2 or self.k < 2:
            raise ValueError("n and k must both be at least 2")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.f_stat <= 0:
            raise ValueError("f_stat must be positive (alpha2 = gamma*F != 0)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def gamma(self) -> float:
        return self.k / self.n

    @property
    def alpha2(self) -> float:
        """First-stage signal alpha2 = gamma * F."""
        return self.gamma * self.f_stat

    @property
    def sigma_pi2(self) -> float:
        return self.alpha2 / self.k

    def structural(self) -> StructuralParams:
        """Implied structural parameters (unit error variances, cov rho)."""
        return StructuralParams(
            sigma_eps2=1.0,
            sigma_nu2=1.0,
            sigma_eps_nu=self.rho,
            alpha2=self.alpha2,
            gamma=self.gamma,
            n=self.n,
        )


@dataclass(eq=False)
class Dataset:
    """One realized sample plus lazily cached spectral decompositions.

    The n x n gram matrix ZZ'/n is eigendecomposed once; every ridge
    penalty reuses the cached basis, making per-lambda work O(n).
    """

    y: NDArray[np.float64]
    x: NDArray[np.float64]
    Z: NDArray[np.float64]
    params: ModelParams | None = None
    pi: NDArray[np.float64] | None = None
    nu: NDArray[np.float64] | None = None
    eps: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.Z = np.asarray(self.Z, dtype=float)
        n = self.Z.shape[0]
        if self.Z.ndim != 2 or self.y.shape != (n,) or self.x.shape != (n,):
            raise ValueError("y, x must be n-vectors matching Z's row count")

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    @property
    def gamma_n(self) -> float:
        return self.k / self.n

    @cached_property
    def gram_eigen(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Eigenvalues (ascending, clipped at 0) and eigenvectors of ZZ'/n."""
        mu, q = np.linalg.eigh(self.Z @ self.Z.T / self.n)
        return np.maximum(mu, 0.0), q

    @cached_property
    def x_rot(self) -> NDArray[np.float64]:
        return self.gram_eigen[1].T @ self.x

    @cached_property
    def y_rot(self) -> NDArray[np.float64]:
        return self.gram_eigen[1].T @ self.y

    def gram_eigenvalues_k(self) -> NDArray[np.float64]:
        """The k eigenvalues of Z'Z/n, from the shared nonzero spectrum.

        For k > n the companion list is padded with exact zeros; for k < n
        the n - k smallest (numerically zero) gram eigenvalues are dropped.
        """
        mu = self.gram_eigen[0]
        if self.k >= self.n:
            return np.concatenate([np.zeros(self.k - self.n), mu])
        return mu[self.n - self.k:]


def generate(params: ModelParams, *, keep_latent: bool = False) -> Dataset:
    """Draw one dataset; bit-identical for identical ``params``."""
    rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    n, k = params.n, params.k
    w_mat = rng.standard_normal((n, k))
    pi = rng.standard_normal(k) * np.sqrt(params.sigma_pi2)
    nu = rng.standard_normal(n)
    w = rng.standard_normal(n)
    if params.sigma.kind == "isotropic":
        z = w_mat
    else:
        z = w_mat @ params.sigma.sqrt_matrix(k).T
    eps = params.rho * nu + np.sqrt(1.0 - params.rho**2) * w
    x = z @ pi + nu
    y = params.beta * x + eps
    latent = {"pi": pi, "nu": nu, "eps": eps} if keep_latent else {}
    return Dataset(y=y, x=x, Z=z, params=params, **latent)


def concentration(params: ModelParams) -> tuple[float, float]:
    """Concentration parameter mu2 = n*alpha2 and population F = mu2/k."""
    mu2 = params.n * params.alpha2
    return mu2, mu2 / params.k


def split_seed(base_seed: int, replication: int) -> int:
    """Derive the replication's dataset seed from the experiment base seed."""
    child = np.random.SeedSequence(entropy=base_seed, spawn_key=(replication,))
    return int(child.generate_state(1, np.uint64)[0])


def save_dataset_csv(data: Dataset, path) -> None:
    """Write columns y, x, z1..zk with a header row."""
    header = ["y", "x"] + [f"z{j + 1}" for j in range(data.k)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.y[i])), repr(float(data.x[i]))]
                + [repr(float(v)) for v in data.Z[i]]
            )


def load_dataset_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset_csv` (or matching it)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        expected = ["y", "x"] + [f"z{j + 1}" for j in range(len(header) - 2)]
        if [h.strip() for h in header] != expected or len(header) < 3:
            raise ValueError(f"{path}: header must be y,x,z1,...,zk")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(y=arr[:, 0], x=arr[:, 1], Z=arr[:, 2:])
