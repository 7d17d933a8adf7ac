"""JSON (de)serialization of fitted predictors.

Floats are emitted with Python's shortest round-trip repr, so a load after a
save reproduces predictions bit-for-bit. Every document carries the estimator
kind tag used by :func:`model_from_dict` to dispatch.
"""

from __future__ import annotations

import json

import numpy as np

from .base import Standardizer
from .constant import ConstantImputedLR
from .em import EMLR
from .expanded import ExpandedLR
from .iterative import IterImputeLR
from .mlp import MLPRegressor


def _arr(x):
    return np.asarray(x, dtype=np.float64)


def model_to_dict(model) -> dict:
    kind = model.describe()
    if isinstance(model, ConstantImputedLR):
        return {
            "kind": "constant_imputed_lr",
            "n_features": model.n_features_in_,
            "intercept": model.intercept_,
            "coef": model.coef_.tolist(),
            "mask_coef": model.mask_coef_.tolist(),
        }
    if isinstance(model, ExpandedLR):
        return {
            "kind": "expanded_lr",
            "n_features": model.n_features_in_,
            "lambda_grid": list(model.lambda_grid),
            "folds": model.folds,
            "random_state": model.random_state,
            "lambda": model.lambda_,
            "intercept": model.intercept_,
            "table": {str(code): w.tolist() for code, w in sorted(model.table_.items())},
            "standardizer": {
                "mean": model.standardizer_.mean.tolist(),
                "std": model.standardizer_.std.tolist(),
            },
        }
    if isinstance(model, EMLR):
        return {
            "kind": "em_lr",
            "n_features": model.n_features_in_,
            "max_iter": model.max_iter,
            "tol": model.tol,
            "mean": model.mean_.tolist(),
            "cov": model.cov_.tolist(),
            "n_iter": model.n_iter_,
            "converged": model.converged_,
        }
    if isinstance(model, IterImputeLR):
        return {
            "kind": "iter_impute_lr",
            "n_features": model.n_features_in_,
            "sweeps": model.sweeps,
            "col_means": model.col_means_.tolist(),
            "chain": [
                [None if c is None else c.tolist() for c in sweep]
                for sweep in model.chain_
            ],
            "intercept": model.intercept_,
            "coef": model.coef_.tolist(),
        }
    if isinstance(model, MLPRegressor):
        return {
            "kind": "mlp",
            "n_features": model.n_features_in_,
            "hidden_width": model.hidden_width,
            "decay_grid": list(model.decay_grid),
            "epochs": model.epochs,
            "batch_size": model.batch_size,
            "learning_rate": model.learning_rate,
            "betas": list(model.betas),
            "val_fraction": model.val_fraction,
            "random_state": model.random_state,
            "weight_decay": model.weight_decay_,
            "input_weights": model.input_weights_.tolist(),
            "input_bias": model.input_bias_.tolist(),
            "output_weights": model.output_weights_.tolist(),
            "output_bias": model.output_bias_,
            "standardizer": {
                "mean": model.standardizer_.mean.tolist(),
                "std": model.standardizer_.std.tolist(),
            },
        }
    raise TypeError(f"cannot serialize predictor kind {kind!r}")


def model_from_dict(doc: dict):
    kind = doc["kind"]
    if kind == "constant_imputed_lr":
        est = ConstantImputedLR()
        est.n_features_in_ = int(doc["n_features"])
        est.intercept_ = float(doc["intercept"])
        est.coef_ = _arr(doc["coef"])
        est.mask_coef_ = _arr(doc["mask_coef"])
        return est
    if kind == "expanded_lr":
        est = ExpandedLR(
            lambda_grid=tuple(doc["lambda_grid"]),
            folds=int(doc["folds"]),
            random_state=doc["random_state"],
        )
        est.n_features_in_ = int(doc["n_features"])
        est.lambda_ = float(doc["lambda"])
        est.intercept_ = float(doc["intercept"])
        est.table_ = {int(code): _arr(w) for code, w in doc["table"].items()}
        est.standardizer_ = Standardizer(
            mean=_arr(doc["standardizer"]["mean"]),
            std=_arr(doc["standardizer"]["std"]),
        )
        est.cv_mse_ = None
        return est
    if kind == "em_lr":
        est = EMLR(max_iter=int(doc["max_iter"]), tol=float(doc["tol"]))
        est.n_features_in_ = int(doc["n_features"])
        est.mean_ = _arr(doc["mean"])
        est.cov_ = _arr(doc["cov"])
        est.n_iter_ = int(doc["n_iter"])
        est.converged_ = bool(doc["converged"])
        est.loglik_path_ = np.zeros(0)
        return est
    if kind == "iter_impute_lr":
        est = IterImputeLR(sweeps=int(doc["sweeps"]))
        est.n_features_in_ = int(doc["n_features"])
        est.col_means_ = _arr(doc["col_means"])
        est.chain_ = [
            [None if c is None else _arr(c) for c in sweep] for sweep in doc["chain"]
        ]
        est.intercept_ = float(doc["intercept"])
        est.coef_ = _arr(doc["coef"])
        return est
    if kind == "mlp":
        est = MLPRegressor.from_weights(
            input_weights=_arr(doc["input_weights"]),
            input_bias=_arr(doc["input_bias"]),
            output_weights=_arr(doc["output_weights"]),
            output_bias=float(doc["output_bias"]),
            standardizer=Standardizer(
                mean=_arr(doc["standardizer"]["mean"]),
                std=_arr(doc["standardizer"]["std"]),
            ),
            weight_decay=float(doc["weight_decay"]),
        )
        est.set_params(
            hidden_width=int(doc["hidden_width"]),
            decay_grid=tuple(doc.get("decay_grid", est.decay_grid)),
            epochs=int(doc.get("epochs", est.epochs)),
            batch_size=int(doc.get("batch_size", est.batch_size)),
            learning_rate=float(doc.get("learning_rate", est.learning_rate)),
            betas=tuple(doc.get("betas", est.betas)),
            val_fraction=float(doc.get("val_fraction", est.val_fraction)),
            random_state=doc.get("random_state", est.random_state),
        )
        return est
    raise ValueError(f"unknown predictor kind {kind!r}")


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
