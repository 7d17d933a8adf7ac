"""Supervised prediction on linearly-generated data with missing values.

The package provides exact optimal predictors and risks under Gaussian
pattern-mixture assumptions, five trainable estimators behind a common
sklearn-style fit/predict surface, data generators for MCAR / mixture / MNAR
mechanisms, and a reproducible experiment harness with a CLI front end.
"""

from .bayes import (
    BayesPredictor,
    ExpandedBayesCoefficients,
    FactorizedBayesCoefficients,
    bayes_risk,
    clip,
    compute_delta,
    compute_zeta,
    conditional_noise_cov,
    evaluate_factorized,
    expanded_param_count,
    predict_expanded,
    response_variance,
)
from .data import (
    GaussianComponent,
    LinearDGP,
    MaskedMatrix,
    Pattern,
    PatternMixtureModel,
    as_masked,
    conditional_gaussian,
)
from .errors import (
    DegenerateTarget,
    DimensionTooLarge,
    NonFiniteLoss,
    NotPositiveDefinite,
    SingularCovariance,
    UnboundedSupport,
    UnknownPattern,
)
from .estimators import (
    EMLR,
    ConstantImputedLR,
    ExpandedLR,
    IterImputeLR,
    MLPRegressor,
    construct_bayes_mlp,
    load_model,
    mlp_param_count,
    save_model,
)
from .experiments import (
    EstimatorSpec,
    ExperimentConfig,
    RunResult,
    bayes_r2,
    learning_curve,
    r2_score,
    run_cell,
    width_sweep,
)
from .simulate import (
    Scenario,
    ScenarioConfig,
    build_scenario,
    calibrate_selfmask,
    gen_covariance,
    gen_response,
    sample_mixture1,
    sample_mixture3,
    sample_selfmasking,
)

__version__ = "0.1.0"

__all__ = [
    "BayesPredictor",
    "ExpandedBayesCoefficients",
    "FactorizedBayesCoefficients",
    "bayes_risk",
    "clip",
    "compute_delta",
    "compute_zeta",
    "conditional_noise_cov",
    "evaluate_factorized",
    "expanded_param_count",
    "predict_expanded",
    "response_variance",
    "GaussianComponent",
    "LinearDGP",
    "MaskedMatrix",
    "Pattern",
    "PatternMixtureModel",
    "as_masked",
    "conditional_gaussian",
    "DegenerateTarget",
    "DimensionTooLarge",
    "NonFiniteLoss",
    "NotPositiveDefinite",
    "SingularCovariance",
    "UnboundedSupport",
    "UnknownPattern",
    "EMLR",
    "ConstantImputedLR",
    "ExpandedLR",
    "IterImputeLR",
    "MLPRegressor",
    "construct_bayes_mlp",
    "load_model",
    "mlp_param_count",
    "save_model",
    "EstimatorSpec",
    "ExperimentConfig",
    "RunResult",
    "bayes_r2",
    "learning_curve",
    "r2_score",
    "run_cell",
    "width_sweep",
    "Scenario",
    "ScenarioConfig",
    "build_scenario",
    "calibrate_selfmask",
    "gen_covariance",
    "gen_response",
    "sample_mixture1",
    "sample_mixture3",
    "sample_selfmasking",
]
