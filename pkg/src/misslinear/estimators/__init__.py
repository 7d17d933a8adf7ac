"""Trainable predictors over masked rows, all sharing the sklearn-style
fit/predict surface plus describe()/num_params()."""

from .base import MaskedRegressor, Standardizer, validate_xy
from .constant import ConstantImputedLR
from .em import EMLR
from .expanded import ExpandedLR
from .io import load_model, model_from_dict, model_to_dict, save_model
from .iterative import IterImputeLR
from .mlp import MLPRegressor, construct_bayes_mlp, mlp_param_count

__all__ = [
    "MaskedRegressor",
    "Standardizer",
    "validate_xy",
    "ConstantImputedLR",
    "ExpandedLR",
    "EMLR",
    "IterImputeLR",
    "MLPRegressor",
    "construct_bayes_mlp",
    "mlp_param_count",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]
