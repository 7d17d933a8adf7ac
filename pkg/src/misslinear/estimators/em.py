"""Joint-Gaussian regression fitted by EM on incomplete rows.

A single multivariate normal is fitted over the (d+1)-vector (X, Y), with Y
always observed and X arbitrarily masked. The E-step fills per-row conditional
first and second moments of the missing block, the M-step updates the mean and
(1/n) covariance, and the observed-data log-likelihood is tracked for the
stopping rule. Prediction is the conditional-Gaussian formula

    E[Y | X_obs] = mu_Y + S_{Y,obs} S_{obs,obs}^{-1} (x_obs - mu_obs)

using the fitted joint parameters.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import SingularCovariance
from .base import MaskedRegressor

_LOG_2PI = math.log(2.0 * math.pi)


def _chol_or_regularize(cov):
    """Cholesky factor, adding a trace-scaled diagonal jitter once if needed."""
    try:
        return np.linalg.cholesky(cov), cov
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8 * np.trace(cov) / cov.shape[0]
    cov = cov + jitter * np.eye(cov.shape[0])
    try:
        return np.linalg.cholesky(cov), cov
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(
            "covariance stayed singular after diagonal regularization"
        ) from exc


class EMLR(MaskedRegressor):
    """EM-fitted multivariate normal over features and response."""

    def __init__(self, max_iter=500, tol=1e-6):
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, masked, y):
        d = masked.dim
        obs_counts = (~masked.mask).sum(axis=0)
        if np.any(obs_counts < 2):
            raise ValueError("every feature must be observed at least twice")
        p = d + 1
        n = masked.n
        w = np.hstack([masked.values, y[:, None]])
        w_mask = np.hstack([masked.mask, np.zeros((n, 1), dtype=bool)])

        mean = np.empty(p)
        var = np.empty(p)
        for j in range(p):
            col = w[~w_mask[:, j], j]
            mean[j] = col.mean()
            v = col.var()
            var[j] = v if v > 1e-12 else 1.0
        cov = np.diag(var)

        groups = masked.groups()
        group_obs = {}
        for code in groups:
            bits = (code >> np.arange(d)) & 1
            obs = np.flatnonzero(bits == 0)
            mis = np.flatnonzero(bits == 1)
            group_obs[code] = (np.append(obs, d), mis)  # y index is d

        loglik_path = []
        converged = False
        for _ in range(self.max_iter):
            s1 = np.zeros(p)
            s2 = np.zeros((p, p))
            ll = 0.0
            for code, idx in groups.items():
                o, u = group_obs[code]
                w_o = w[np.ix_(idx, o)]
                s_oo = cov[np.ix_(o, o)]
                chol, _ = _chol_or_regularize(s_oo)
                centered = w_o - mean[o]
                sol = np.linalg.solve(chol, centered.T)
                logdet = 2.0 * np.log(np.diag(chol)).sum()
                ll -= 0.5 * (
                    idx.size * (o.size * _LOG_2PI + logdet) + np.sum(sol**2)
                )
                w_hat = np.zeros((idx.size, p))
                w_hat[:, o] = w_o
                if u.size:
                    s_ou = cov[np.ix_(o, u)]
                    a = np.linalg.solve(chol.T, np.linalg.solve(chol, s_ou))
                    cond_mean = mean[u] + centered @ a
                    cond_cov = cov[np.ix_(u, u)] - s_ou.T @ a
                    w_hat[:, u] = cond_mean
                    r = np.zeros((p, p))
                    r[np.ix_(u, u)] = cond_cov
                    s2 += idx.size * r
                s1 += w_hat.sum(axis=0)
                s2 += w_hat.T @ w_hat
            loglik_path.append(ll)
            if len(loglik_path) > 1 and (ll - loglik_path[-2]) < self.tol:
                converged = True
                break
            mean = s1 / n
            cov = s2 / n - np.outer(mean, mean)
            cov = 0.5 * (cov + cov.T)
            _, cov = _chol_or_regularize(cov)

        self.mean_ = mean
        self.cov_ = cov
        self.loglik_path_ = np.array(loglik_path)
        self.n_iter_ = len(loglik_path)
        self.converged_ = converged

    @classmethod
    def from_joint(cls, mean, cov) -> "EMLR":
        """Predictor with the joint (X, Y) parameters injected directly."""
        mean = np.asarray(mean, dtype=np.float64)
        est = cls()
        est.n_features_in_ = mean.size - 1
        est.mean_ = mean
        est.cov_ = np.asarray(cov, dtype=np.float64)
        est.loglik_path_ = np.zeros(0)
        est.n_iter_ = 0
        est.converged_ = True
        return est

    def _predict(self, masked):
        d = self.n_features_in_
        mu_y = self.mean_[d]
        out = np.full(masked.n, mu_y)
        for code, idx in masked.groups().items():
            bits = (code >> np.arange(d)) & 1
            obs = np.flatnonzero(bits == 0)
            if obs.size == 0:
                continue
            s_oo = self.cov_[np.ix_(obs, obs)]
            s_oy = self.cov_[obs, d]
            chol, _ = _chol_or_regularize(s_oo)
            a = np.linalg.solve(chol.T, np.linalg.solve(chol, s_oy))
            centered = masked.values[np.ix_(idx, obs)] - self.mean_[obs]
            out[idx] = mu_y + centered @ a
        return out

    def describe(self) -> str:
        return "em_lr"

    def num_params(self) -> int:
        d = self.n_features_in_
        return d * (d + 5) // 2 + 1
