"""Complete-case estimation for regression with a right-censored covariate."""

from completecase.dagcheck import Dag, MechanismQuery, check_mechanism, d_separated, enumerate_paths
from completecase.datagen import Mechanism, SimSetting, generate, mechanism_diagnostics
from completecase.dataset import Dataset, read_dataset_csv, write_dataset_csv
from completecase.errors import (
    ArgumentError,
    DataFormatError,
    GraphError,
    SingularityError,
    SummaryError,
    UnderIdentifiedError,
)
from completecase.estimator import (
    FitResult,
    SolverOptions,
    closed_form_linear,
    fit_complete_case,
    fit_oracle,
    sandwich_covariance,
    wald_ci,
)
from completecase.model import Family, MeanModelSpec, mean_gradient, mean_value, model_from_key
from completecase.simharness import SimSummary, coverage, emit_table, percent_bias, run_replications

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "Dag",
    "DataFormatError",
    "Dataset",
    "Family",
    "FitResult",
    "GraphError",
    "MeanModelSpec",
    "Mechanism",
    "MechanismQuery",
    "SimSetting",
    "SimSummary",
    "SingularityError",
    "SolverOptions",
    "SummaryError",
    "UnderIdentifiedError",
    "check_mechanism",
    "closed_form_linear",
    "coverage",
    "d_separated",
    "emit_table",
    "enumerate_paths",
    "fit_complete_case",
    "fit_oracle",
    "generate",
    "mean_gradient",
    "mean_value",
    "mechanism_diagnostics",
    "model_from_key",
    "percent_bias",
    "read_dataset_csv",
    "run_replications",
    "sandwich_covariance",
    "wald_ci",
    "write_dataset_csv",
]
