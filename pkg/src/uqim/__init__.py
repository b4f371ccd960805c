"""Uncertainty quantification with imperfect simulation models.

Estimate input laws from small measurement campaigns, replace expensive
simulators by penalized least-squares surrogates (optionally corrected on
experimental data), and attach finite-sample uncertainty statements to the
resulting output quantities: quantiles, densities, validation metrics and
model-error bounds.
"""

__version__ = "0.1.0"

from .avm import AvmResult, EmpiricalCdf, avm
from .bootstrap import BootstrapErrorReport, bootstrap_error_quantile
from .confidence import (
    DensityBand,
    EpsGamma,
    FeasibilityReport,
    QuantileCi,
    ci_feasibility,
    density_band,
    gamma_term,
    minimal_feasible_delta,
    minimal_feasible_n,
    minimize_eps_gamma,
    quantile_ci,
    sup_interval_mismatch,
    surrogate_error_bound,
)
from .data import (
    InputSample,
    PairedDataset,
    RunConfig,
    parse_dataset,
    parse_inputs,
    write_dataset,
    write_inputs,
)
from .density import (
    KdeModel,
    QuantileEstimate,
    kde_cdf,
    kde_evaluate,
    mc_quantile,
    select_bandwidth,
    surrogate_density,
)
from .errors import (
    ConditioningError,
    DataError,
    DomainError,
    InfeasibleError,
    InsufficientDataError,
    InvalidCovarianceError,
    RankDeficiencyError,
    UqError,
    ValidationError,
    ZeroSpreadError,
)
from .gp import (
    DiscrepancyData,
    ErrorQuantileResult,
    GpDiscrepancyParams,
    GpFitResult,
    GpHyperParams,
    gp_beta_closed_form,
    gp_beta_empirical,
    gp_cov_matrix,
    gp_covariance,
    gp_error_quantile,
    gp_fit_map,
    gp_log_posterior,
    gp_loglikelihood,
    gp_loglikelihood_grad,
)
from .randgen import (
    MvnParams,
    estimate_mvn,
    latin_hypercube,
    make_rng,
    sample_mvn,
    spawn_seeds,
)
from .surrogate import (
    FunctionFamily,
    ImprovedSurrogate,
    SurrogateModel,
    WeightSelection,
    compute_residuals,
    fit_penalized_ls,
    fit_residual_model,
    fit_residual_model_weighted,
    fit_with_gcv,
    improved_surrogate,
    load_model,
    save_model,
    select_weight_and_penalty,
)
from .synthetic import (
    SyntheticSystem,
    field_measurements,
    make_hidim_like,
    make_mafds_like,
    mc_truth_quantile,
)

__all__ = [name for name in dir() if not name.startswith("_")]
