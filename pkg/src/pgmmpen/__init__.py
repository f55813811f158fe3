"""High-dimensional model-based clustering with penalized mixtures of factor analyzers."""

__version__ = "0.1.0"

from .aecm import (
    FitConfig,
    FitResult,
    aitken_converged,
    initialize_responsibilities,
    run_aecm,
    run_pilot_penalized,
)
from .core import (
    DataMatrix,
    MixtureParams,
    log_component_density,
    mixture_loglik,
    penalized_loglik,
    responsibilities,
    validate_params,
)
from .covariance import ComponentScatter, update_covariance, weighted_scatter
from .criteria import CriterionReport, aic, alpbic, bic, caic, lpbic
from .estimator import ParsimoniousGaussianMixture
from .exceptions import (
    EmptyComponentError,
    FitError,
    InitializationError,
    NumericalError,
    PgmmError,
    SearchError,
)
from .metrics import adjusted_rand_index, contingency_table, map_labels
from .penalty import (
    PenaltySpec,
    compute_weights,
    lambda_schedule,
    soft_threshold_means,
    unit_information_inverse_diag,
)
from .search import SearchGrid, SearchReport, replicate_study, run_search
from .simulate import (
    ScenarioSpec,
    ar1_covariance,
    generate_paper_mixture,
    generate_sparse_mixture,
)
from .structures import CovarianceStructure, ParamCount, param_count, structure

__all__ = [
    "CovarianceStructure",
    "ComponentScatter",
    "CriterionReport",
    "DataMatrix",
    "EmptyComponentError",
    "FitConfig",
    "FitError",
    "FitResult",
    "InitializationError",
    "MixtureParams",
    "NumericalError",
    "ParamCount",
    "ParsimoniousGaussianMixture",
    "PenaltySpec",
    "PgmmError",
    "ScenarioSpec",
    "SearchError",
    "SearchGrid",
    "SearchReport",
    "adjusted_rand_index",
    "aic",
    "aitken_converged",
    "alpbic",
    "ar1_covariance",
    "bic",
    "caic",
    "compute_weights",
    "contingency_table",
    "generate_paper_mixture",
    "generate_sparse_mixture",
    "initialize_responsibilities",
    "lambda_schedule",
    "log_component_density",
    "lpbic",
    "map_labels",
    "mixture_loglik",
    "param_count",
    "penalized_loglik",
    "replicate_study",
    "responsibilities",
    "run_aecm",
    "run_pilot_penalized",
    "run_search",
    "soft_threshold_means",
    "structure",
    "unit_information_inverse_diag",
    "validate_params",
    "weighted_scatter",
]
