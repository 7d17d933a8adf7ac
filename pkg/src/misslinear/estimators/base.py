"""Shared estimator machinery: the common fit/predict surface and the input
validation / standardization helpers used by every model.

All estimators follow the sklearn protocol (hyperparameters in ``__init__``,
``fit`` returns self, fitted state in trailing-underscore attributes,
``get_params``/``set_params`` inherited) so they compose with pipelines and
model selection utilities. Inputs may be either a
:class:`~misslinear.data.MaskedMatrix` or a plain 2-d array with NaN marking
the missing cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ..data import MaskedMatrix, as_masked


def validate_xy(z, y):
    """Coerce (Z, y) to (MaskedMatrix, float64 vector) and check shapes."""
    masked = as_masked(z)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != masked.n:
        raise ValueError(f"y has {y.size} entries for {masked.n} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains NaN/Inf")
    return masked, y


@dataclass(frozen=True)
class Standardizer:
    """Frozen per-feature affine transform fitted on training data.

    Statistics are computed over the *observed* entries of each feature, and
    standardized missing cells stay exactly zero, preserving the
    zero-imputation convention in standardized space. Mask columns are never
    standardized.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, masked: MaskedMatrix) -> "Standardizer":
        obs = ~masked.mask
        counts = obs.sum(axis=0)
        safe = np.maximum(counts, 1)
        mean = np.where(counts > 0, masked.values.sum(axis=0) / safe, 0.0)
        sq = (masked.values**2).sum(axis=0) / safe
        var = np.maximum(sq - mean**2, 0.0)
        std = np.sqrt(var)
        std = np.where(std > 0, std, 1.0)
        mean = np.where(counts > 0, mean, 0.0)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, d) -> "Standardizer":
        return cls(mean=np.zeros(d), std=np.ones(d))

    def transform(self, masked: MaskedMatrix) -> np.ndarray:
        """Standardized values with zeros at missing cells."""
        out = (masked.values - self.mean) / self.std
        out[masked.mask] = 0.0
        return out


class MaskedRegressor(BaseEstimator, RegressorMixin):
    """Base class for predictors over masked rows.

    Subclasses implement ``_fit(masked, y)`` and ``_predict(masked)``; this
    class handles coercion, the single-row convenience entry point, and the
    uniform describe/num_params surface the experiment harness relies on.
    """

    def fit(self, z, y):
        masked, y = validate_xy(z, y)
        self.n_features_in_ = masked.dim
        self._fit(masked, y)
        return self

    def predict(self, z):
        self._check_fitted()
        masked = as_masked(z)
        if masked.dim != self.n_features_in_:
            raise ValueError(
                f"got {masked.dim} features, fitted with {self.n_features_in_}"
            )
        return self._predict(masked)

    def predict_row(self, values_row, mask_row) -> float:
        masked = MaskedMatrix(
            values=np.asarray(values_row, dtype=np.float64).reshape(1, -1)
            * (1.0 - np.asarray(mask_row, dtype=np.float64).reshape(1, -1)),
            mask=np.asarray(mask_row, dtype=bool).reshape(1, -1),
        )
        return float(self.predict(masked)[0])

    def _check_fitted(self):
        if not hasattr(self, "n_features_in_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")

    def describe(self) -> str:
        raise NotImplementedError

    def num_params(self) -> int:
        raise NotImplementedError

    def _fit(self, masked, y):
        raise NotImplementedError

    def _predict(self, masked):
        raise NotImplementedError
