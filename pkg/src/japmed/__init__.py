"""Joint adaptive penalized estimation for multi-mediator linear SEMs."""

from japmed._kernel import KERNEL
from japmed.data import (Coefficients, DataError, Dataset, MediationReport,
                         abundance_filter, clr_transform, load_csv,
                         prevalence_filter, validate_dataset, write_csv)
from japmed.estimator import (FittedModel, active_set, baseline_fit, jap_fit,
                              mediation_effects, model_to_dict, model_to_json)
from japmed.initialization import (DEFAULT_C_TR, InitEstimates, Method,
                                   WeightExponents, Weights, compute_weights,
                                   init_estimates, truncate, weight_ratio)
from japmed.projection import (OlsSummary, Projector, SingularDesignError,
                               ols_summary, residualize)
from japmed.simulate import (MethodConfig, SimConfig, exact_recovery,
                             fit_with_config, make_coefficients,
                             run_monte_carlo, simulate_dataset,
                             true_active_set, write_recovery_csv)
from japmed.solver import (FitResult, PenaltySpec, SolverOptions, fit_mediator,
                           fit_outcome, joint_vs_projected_check, kkt_check,
                           soft_threshold)
from japmed.tuning import (TuningGrid, TuningResult, kfold_split, mse_full,
                           selection_kappa, tune_model, vss,
                           write_tuning_table)

__version__ = "0.1.0"

__all__ = [
    "KERNEL", "Coefficients", "DataError", "Dataset", "MediationReport",
    "abundance_filter", "clr_transform", "load_csv", "prevalence_filter",
    "validate_dataset", "write_csv", "FittedModel", "active_set",
    "baseline_fit", "jap_fit", "mediation_effects", "model_to_dict",
    "model_to_json", "DEFAULT_C_TR", "InitEstimates", "Method",
    "WeightExponents", "Weights", "compute_weights", "init_estimates",
    "truncate", "weight_ratio", "OlsSummary", "Projector",
    "SingularDesignError", "ols_summary", "residualize", "MethodConfig",
    "SimConfig", "exact_recovery", "fit_with_config", "make_coefficients",
    "run_monte_carlo", "simulate_dataset", "true_active_set",
    "write_recovery_csv", "FitResult", "PenaltySpec", "SolverOptions",
    "fit_mediator", "fit_outcome", "joint_vs_projected_check", "kkt_check",
    "soft_threshold", "TuningGrid", "TuningResult", "kfold_split", "mse_full",
    "selection_kappa", "tune_model", "vss", "write_tuning_table",
    "__version__",
]
