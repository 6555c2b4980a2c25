"""Domain adaptation when one label/background cell is missing from the labeled source."""
from .adapt import (
    NuisanceBundle,
    TargetPredictor,
    classify,
    eta,
    eta0,
    eta1,
    fit_nuisance,
    naive_xi1,
    oracle_predictor,
)
from .classify import ProbModel, fit_logistic, loss_and_gradient, predict_proba
from .core import CellCounts, Dataset, Sample, cell_counts, load_csv, subset, validate, write_csv
from .errors import (
    ConfigError,
    DataError,
    EstimationError,
    FitError,
    IdentifiabilityError,
    NumericError,
    ParseError,
    StructuredMissingnessError,
    UDAError,
)
from .experiment import ExperimentConfig, fit_pipeline, metric_accuracy, metric_f1, run_experiment
from .proportions import (
    SourceProportions,
    TargetProportions,
    estimate_beta01_anchor,
    estimate_beta_kl,
    estimate_beta_moment,
    estimate_rho_b1,
    estimate_source_proportions,
    kl_objective,
)
from .reweight import (
    LabelWeights,
    Loss,
    label_weights,
    reweighted_erm,
    risk_a1,
    risk_overall,
    weighted_risk,
)
from .synthgen import PartitionSpec, SyntheticSpec, generate, oracle_spec, partition_pool

__all__ = [
    "CellCounts",
    "ConfigError",
    "DataError",
    "Dataset",
    "EstimationError",
    "ExperimentConfig",
    "FitError",
    "IdentifiabilityError",
    "LabelWeights",
    "Loss",
    "NuisanceBundle",
    "NumericError",
    "ParseError",
    "PartitionSpec",
    "ProbModel",
    "Sample",
    "SourceProportions",
    "StructuredMissingnessError",
    "SyntheticSpec",
    "TargetPredictor",
    "TargetProportions",
    "UDAError",
    "cell_counts",
    "classify",
    "estimate_beta01_anchor",
    "estimate_beta_kl",
    "estimate_beta_moment",
    "estimate_rho_b1",
    "estimate_source_proportions",
    "eta",
    "eta0",
    "eta1",
    "fit_logistic",
    "fit_nuisance",
    "fit_pipeline",
    "generate",
    "kl_objective",
    "label_weights",
    "load_csv",
    "loss_and_gradient",
    "metric_accuracy",
    "metric_f1",
    "naive_xi1",
    "oracle_predictor",
    "oracle_spec",
    "partition_pool",
    "predict_proba",
    "reweighted_erm",
    "risk_a1",
    "risk_overall",
    "run_experiment",
    "subset",
    "validate",
    "weighted_risk",
    "write_csv",
]

__version__ = "0.1.0"
