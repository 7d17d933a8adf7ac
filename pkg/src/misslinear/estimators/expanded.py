"""Per-pattern linear model on the expanded block design.

Every missingness pattern owns an intercept offset and one slope per observed
feature, plus a single shared global intercept; ridge regularization (all
blocks penalized, global intercept free) keeps sparsely-populated patterns
under control and the penalty strength is selected by k-fold cross-validation.

The block design is never materialized: with the global intercept as the only
coupling column, the penalized normal equations have arrowhead structure and
are solved exactly from per-pattern sufficient statistics. This keeps fits at
n ~ 1e5, d ~ 10 (thousands of columns) cheap and memory-light.
"""

from __future__ import annotations

import numpy as np

from ..data import check_pattern_dim
from ..errors import DimensionTooLarge
from ..rng import derive_rng
from .base import MaskedRegressor, Standardizer

DEFAULT_LAMBDA_GRID = (1e-3, 1.0, 1e3)
MAX_EXPANDED_DIM = 14


def _pattern_obs(code, d):
    bits = (code >> np.arange(d)) & 1
    return np.flatnonzero(bits == 0)


class _BlockStats:
    """Sufficient statistics G = Phi' Phi and c = Phi' y for one pattern block.

    Phi is [1, x_obs]; its first column being constant means Phi'1 and the
    row count are already stored in G (column 0 and entry (0,0)).
    """

    def __init__(self, k):
        self.g = np.zeros((k + 1, k + 1))
        self.c = np.zeros(k + 1)

    def add(self, phi, y):
        self.g += phi.T @ phi
        self.c += phi.T @ y


def _solve_arrowhead(stats: dict, lam: float) -> tuple[float, dict]:
    """Exact ridge solution (shared intercept unpenalized, blocks penalized)."""
    total_n = sum(s.g[0, 0] for s in stats.values())
    total_y = sum(s.c[0] for s in stats.values())
    num = total_y
    den = total_n
    partial = {}
    for code, s in stats.items():
        h = s.g + lam * np.eye(s.g.shape[0])
        sol = np.linalg.solve(h, np.column_stack([s.c, s.g[:, 0]]))
        u, v = sol[:, 0], sol[:, 1]
        g_vec = s.g[:, 0]
        num -= g_vec @ u
        den -= g_vec @ v
        partial[code] = (u, v)
    if den <= 1e-12 * max(total_n, 1.0):
        raise np.linalg.LinAlgError("expanded design intercept system is singular")
    intercept = num / den
    table = {code: u - intercept * v for code, (u, v) in partial.items()}
    return float(intercept), table


class ExpandedLR(MaskedRegressor):
    """Ridge regression on the per-pattern expanded design.

    Parameters
    ----------
    lambda_grid : sequence of penalties searched by cross-validation.
    folds : number of CV folds.
    random_state : seed for the fold shuffle.
    """

    def __init__(self, lambda_grid=DEFAULT_LAMBDA_GRID, folds=5, random_state=0):
        self.lambda_grid = tuple(lambda_grid)
        self.folds = folds
        self.random_state = random_state

    def _block_stats(self, xs, masked, y, row_sel):
        """Per-pattern stats over the selected rows."""
        stats = {}
        sub = masked.rows(row_sel)
        for code, local_idx in sub.groups().items():
            obs = _pattern_obs(code, masked.dim)
            rows = row_sel[local_idx]
            phi = np.hstack([np.ones((rows.size, 1)), xs[np.ix_(rows, obs)]])
            st = _BlockStats(obs.size)
            st.add(phi, y[rows])
            stats[code] = st
        return stats

    def _merge(self, stats_list):
        merged = {}
        for stats in stats_list:
            for code, st in stats.items():
                if code in merged:
                    merged[code].g = merged[code].g + st.g
                    merged[code].c = merged[code].c + st.c
                else:
                    fresh = _BlockStats(st.g.shape[0] - 1)
                    fresh.g = st.g.copy()
                    fresh.c = st.c.copy()
                    merged[code] = fresh
        return merged

    def _predict_with(self, intercept, table, xs, masked, rows):
        out = np.full(rows.size, intercept)
        sub = masked.rows(rows)
        for code, local_idx in sub.groups().items():
            w = table.get(code)
            if w is None:
                continue  # unseen pattern: global intercept fallback
            obs = _pattern_obs(code, masked.dim)
            phi = np.hstack(
                [np.ones((local_idx.size, 1)), xs[np.ix_(rows[local_idx], obs)]]
            )
            out[local_idx] = intercept + phi @ w
        return out

    def _fit(self, masked, y):
        d = masked.dim
        if d > MAX_EXPANDED_DIM:
            raise DimensionTooLarge(
                f"expanded design not built beyond d={MAX_EXPANDED_DIM}, got {d}"
            )
        check_pattern_dim(d)
        if masked.n < self.folds:
            raise ValueError(f"need at least {self.folds} rows for {self.folds}-fold CV")
        self.standardizer_ = Standardizer.fit(masked)
        xs = self.standardizer_.transform(masked)

        grid = [float(l) for l in self.lambda_grid]
        if len(grid) > 1:
            rng = derive_rng(self.random_state, "expanded-cv")
            order = rng.permutation(masked.n)
            fold_rows = np.array_split(order, self.folds)
            fold_stats = [self._block_stats(xs, masked, y, rows) for rows in fold_rows]
            cv_sse = np.zeros(len(grid))
            for f, holdout in enumerate(fold_rows):
                train_stats = self._merge(
                    [fs for g, fs in enumerate(fold_stats) if g != f]
                )
                for li, lam in enumerate(grid):
                    intercept, table = _solve_arrowhead(train_stats, lam)
                    pred = self._predict_with(intercept, table, xs, masked, holdout)
                    cv_sse[li] += np.sum((y[holdout] - pred) ** 2)
            best = int(np.argmin(cv_sse))
            self.lambda_ = grid[best]
            self.cv_mse_ = cv_sse / masked.n
        else:
            self.lambda_ = grid[0]
            self.cv_mse_ = None

        full_stats = self._block_stats(xs, masked, y, np.arange(masked.n))
        lam_eff = self.lambda_
        if lam_eff == 0.0:
            # tiny jitter keeps the collinear intercept/indicator system solvable
            tr = sum(np.trace(s.g) for s in full_stats.values())
            sz = sum(s.g.shape[0] for s in full_stats.values())
            lam_eff = 1e-10 * tr / max(sz, 1)
        self.intercept_, self.table_ = _solve_arrowhead(full_stats, lam_eff)

    def _predict(self, masked):
        xs = self.standardizer_.transform(masked)
        return self._predict_with(
            self.intercept_, self.table_, xs, masked, np.arange(masked.n)
        )

    def pattern_coefficients(self) -> dict:
        """Fitted per-pattern (bias, slopes) mapped back to raw feature units."""
        self._check_fitted()
        out = {}
        d = self.n_features_in_
        for code, w in self.table_.items():
            obs = _pattern_obs(code, d)
            slopes_std = w[1:]
            slopes = slopes_std / self.standardizer_.std[obs]
            bias = (
                self.intercept_
                + w[0]
                - slopes_std @ (self.standardizer_.mean[obs] / self.standardizer_.std[obs])
            )
            out[code] = (float(bias), slopes)
        return out

    def describe(self) -> str:
        return "expanded_lr"

    def num_params(self) -> int:
        self._check_fitted()
        return 1 + sum(w.size for w in self.table_.values())
