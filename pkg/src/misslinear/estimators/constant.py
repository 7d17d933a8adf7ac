"""Linear regression with optimally-imputed constants.

Jointly optimizing per-feature imputation constants and regression weights is
equivalent to ordinary least squares on the design [1, X0, M], where X0 is the
zero-imputed data and M the mask: the coefficient on the mask indicator of
feature j equals slope_j * c_j, so the optimal constant is recovered as the
ratio whenever the slope is nonzero.
"""

from __future__ import annotations

import numpy as np

from .. import linalg
from .base import MaskedRegressor


class ConstantImputedLR(MaskedRegressor):
    """OLS on zero-imputed features concatenated with the mask indicators."""

    def _fit(self, masked, y):
        design = np.hstack(
            [np.ones((masked.n, 1)), masked.values, masked.mask.astype(np.float64)]
        )
        coef = linalg.least_squares(design, y)
        d = masked.dim
        self.intercept_ = float(coef[0])
        self.coef_ = coef[1 : d + 1]
        self.mask_coef_ = coef[d + 1 :]

    def _predict(self, masked):
        return (
            self.intercept_
            + masked.values @ self.coef_
            + masked.mask.astype(np.float64) @ self.mask_coef_
        )

    def imputation_constants(self) -> np.ndarray:
        """Optimal per-feature constants; NaN where the slope is exactly zero."""
        self._check_fitted()
        out = np.full(self.coef_.shape, np.nan)
        nz = self.coef_ != 0
        out[nz] = self.mask_coef_[nz] / self.coef_[nz]
        return out

    def describe(self) -> str:
        return "constant_imputed_lr"

    def num_params(self) -> int:
        return 2 * self.n_features_in_ + 1
