"""Round-robin chained-equations imputation followed by linear regression.

Missing cells start at the observed column means; each sweep regresses every
feature in turn on all the others (using the current fill-ins) over the rows
where that feature is observed, then overwrites its missing cells with the
regression predictions. The learned per-feature regressions are frozen and
replayed, in the same order and for the same number of sweeps, to impute test
rows. The imputation is deterministic: no posterior draws, no pooling.
"""

from __future__ import annotations

import numpy as np

from .. import linalg
from .base import MaskedRegressor


class IterImputeLR(MaskedRegressor):
    """Deterministic chained-equations imputer with a final OLS response fit."""

    def __init__(self, sweeps=10):
        self.sweeps = sweeps

    def _fit(self, masked, y):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        d = masked.dim
        obs = ~masked.mask
        counts = obs.sum(axis=0)
        col_means = np.where(
            counts > 0, masked.values.sum(axis=0) / np.maximum(counts, 1), 0.0
        )
        x = masked.values.copy()
        x[masked.mask] = np.broadcast_to(col_means, x.shape)[masked.mask]

        chain = []
        for _ in range(self.sweeps):
            sweep_coefs = []
            for j in range(d):
                rows = obs[:, j]
                miss = masked.mask[:, j]
                others = np.delete(np.arange(d), j)
                if not rows.any():
                    sweep_coefs.append(None)
                    continue
                design = np.hstack([np.ones((rows.sum(), 1)), x[np.ix_(rows, others)]])
                coef = linalg.least_squares(design, x[rows, j])
                sweep_coefs.append(coef)
                if miss.any():
                    pred_design = np.hstack(
                        [np.ones((miss.sum(), 1)), x[np.ix_(miss, others)]]
                    )
                    x[miss, j] = pred_design @ coef
            chain.append(sweep_coefs)

        final_design = np.hstack([np.ones((masked.n, 1)), x])
        final = linalg.least_squares(final_design, y)
        self.col_means_ = col_means
        self.chain_ = chain
        self.intercept_ = float(final[0])
        self.coef_ = final[1:]

    def impute(self, masked) -> np.ndarray:
        """Replay the frozen imputation chain on new rows."""
        self._check_fitted()
        d = self.n_features_in_
        x = masked.values.copy()
        x[masked.mask] = np.broadcast_to(self.col_means_, x.shape)[masked.mask]
        for sweep_coefs in self.chain_:
            for j in range(d):
                coef = sweep_coefs[j]
                miss = masked.mask[:, j]
                if coef is None or not miss.any():
                    continue
                others = np.delete(np.arange(d), j)
                design = np.hstack([np.ones((miss.sum(), 1)), x[np.ix_(miss, others)]])
                x[miss, j] = design @ coef
        return x

    def _predict(self, masked):
        x = self.impute(masked)
        return self.intercept_ + x @ self.coef_

    def describe(self) -> str:
        return "iter_impute_lr"

    def num_params(self) -> int:
        d = self.n_features_in_
        return self.sweeps * d * d + d + 1
