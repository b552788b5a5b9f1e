"""Multi-environment linear regression with invariance-guided regularization,
and an exact-arithmetic lab for invariant-set search and its 3-CNF reduction."""

from .dataset import MultiEnvDataset, load_dataset_dir, read_environment_csv
from .estimator import IgrRegressor
from .exactalg import SingularMatrixError
from .moments import (
    EnvMomentSet,
    RestrictedCoef,
    is_invariant_set,
    moments_from_samples,
    pooled_risk,
    restricted_ls,
)
from .pipeline import FitReport, GridConfig, RateTable, igr_fit, mse, rate_experiment, worst_case_r2
from .scm import LinearScm, ScmOracle, make_example, population_moments, random_scm, sample
from .solver import (
    IgrFit,
    IndefiniteMatrixError,
    SolutionPath,
    kkt_residual,
    objective,
    solution_path,
    solve,
    uncertainty_membership,
)
from .weights import (
    WeightTable,
    gamma_star,
    prediction_variation,
    prediction_variation_residual,
    weight_table,
)
from . import lab

__version__ = "0.1.0"

__all__ = [
    "EnvMomentSet",
    "FitReport",
    "GridConfig",
    "IgrFit",
    "IgrRegressor",
    "IndefiniteMatrixError",
    "LinearScm",
    "MultiEnvDataset",
    "RateTable",
    "RestrictedCoef",
    "ScmOracle",
    "SingularMatrixError",
    "SolutionPath",
    "WeightTable",
    "gamma_star",
    "igr_fit",
    "is_invariant_set",
    "kkt_residual",
    "lab",
    "load_dataset_dir",
    "make_example",
    "moments_from_samples",
    "mse",
    "objective",
    "pooled_risk",
    "population_moments",
    "prediction_variation",
    "prediction_variation_residual",
    "random_scm",
    "rate_experiment",
    "read_environment_csv",
    "restricted_ls",
    "sample",
    "solution_path",
    "solve",
    "uncertainty_membership",
    "weight_table",
    "worst_case_r2",
]
