"""Ridge-regularized two-stage least squares under many instruments.

Random-matrix limit formulas for the bias of a ridge first stage, a
trace-zero bias adjustment that remains valid with more instruments than
observations, many-instrument standard errors, cross-validated penalty
selection, and a seeded Monte Carlo harness that reproduces the
theoretical curves at desk scale.
"""

from .dgp import Dataset, ModelParams, SigmaSpec, concentration, generate, split_seed
from .errors import DegenerateSignalError, GammaBoundaryError, SilversteinSolverError
from .estimators import (
    EstimateResult,
    SmootherQuadratics,
    ba_tsls_ridge,
    bekker_variance,
    cv_select,
    liml,
    minnorm_quadratics,
    nagar,
    ols,
    smoother_quadratics,
    tsls_ridge,
)
from .montecarlo import (
    ExperimentConfig,
    ReplicationTable,
    density,
    figure_configs,
    run,
    summarize,
    write_figure_csvs,
)
from .spectral import (
    RidgelessTransforms,
    SpectralMeasure,
    TransformValues,
    companion_from_m,
    empirical_transforms,
    isotropic_lambda_v,
    psd_ar1,
    psd_point_mass,
    ridgeless_limits,
    ridgeless_transforms,
    solve_silverstein,
    stieltjes_m,
)
from .theory import (
    StructuralParams,
    TheoryCurve,
    amplifier_a,
    asy_variance_ba_ridge,
    bekker_asy_variance,
    bias_ols,
    bias_tsls_ridge_limit,
    curve,
    mean_inverse_esd,
    signal_f,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # spectral
    "SpectralMeasure", "TransformValues", "RidgelessTransforms",
    "psd_point_mass", "psd_ar1", "stieltjes_m", "empirical_transforms",
    "companion_from_m", "solve_silverstein", "isotropic_lambda_v",
    "ridgeless_limits", "ridgeless_transforms",
    # theory
    "StructuralParams", "TheoryCurve", "bias_tsls_ridge_limit", "bias_ols",
    "amplifier_a", "signal_f", "asy_variance_ba_ridge", "bekker_asy_variance",
    "mean_inverse_esd", "curve",
    # dgp
    "SigmaSpec", "ModelParams", "Dataset", "generate", "concentration",
    "split_seed",
    # estimators
    "SmootherQuadratics", "EstimateResult", "smoother_quadratics",
    "minnorm_quadratics", "tsls_ridge", "ba_tsls_ridge", "nagar", "ols",
    "liml", "bekker_variance", "cv_select",
    # montecarlo
    "ExperimentConfig", "ReplicationTable", "run", "summarize", "density",
    "figure_configs", "write_figure_csvs",
    # errors
    "DegenerateSignalError", "GammaBoundaryError", "SilversteinSolverError",
]
