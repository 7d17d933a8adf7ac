"""Closed-form optimal prediction under the Gaussian pattern-mixture model.

Under that model the conditional mean of the response given the observed
values and the missingness pattern is linear *within* each pattern: a table
of per-pattern intercepts and slopes (``ExpandedBayesCoefficients``) fully
describes it. The same function can be rewritten as a multilinear polynomial
in the mask bits and the zero-imputed features; :func:`compute_zeta` produces
those coefficients by a Moebius transform over the subset lattice, and the
two forms agree exactly on every pattern.

The exact expected squared error of the optimal predictor
(:func:`bayes_risk`) is used throughout the experiments as the reference
performance level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .data import (
    LinearDGP,
    MaskedMatrix,
    PatternMixtureModel,
    as_masked,
    check_pattern_dim,
    pack_mask_row,
    submatrix,
)
from .errors import UnknownPattern

FACTORIZED_MAX_DIM = 10  # the factorized form materializes 2**d coefficients


@dataclass(frozen=True)
class ExpandedBayesCoefficients:
    """Per-pattern intercept and observed-feature slopes of the optimal predictor.

    ``table`` maps an integer pattern code to ``(delta0, delta)`` where
    ``delta`` is ordered along the pattern's observed indices. Only patterns
    with positive probability get an entry.
    """

    dim: int
    table: dict = field(repr=False)

    def patterns(self) -> list[int]:
        return sorted(self.table)


@dataclass(frozen=True)
class FactorizedBayesCoefficients:
    """Multilinear coefficients indexed by mask-bit subsets.

    ``bias[s]`` is the constant term attached to the mask monomial of subset
    ``s``; ``slopes[s, j]`` multiplies the zero-imputed feature j under the
    same monomial. Coefficients with j inside s are identically zero.
    """

    dim: int
    bias: np.ndarray
    slopes: np.ndarray


@dataclass(frozen=True)
class NoiseSpec:
    """Irreducible per-pattern conditional covariance plus the ambient noise."""

    dim: int
    sigma: float
    tables: dict = field(repr=False)  # pattern code -> SPD matrix over mis(m)


def _obs_mis(code, d):
    bits = (code >> np.arange(d)) & 1
    return np.flatnonzero(bits == 0), np.flatnonzero(bits == 1)


def compute_delta(model: PatternMixtureModel, dgp: LinearDGP) -> ExpandedBayesCoefficients:
    """Optimal per-pattern coefficients from the generative parameters.

    For pattern m with component (mu, S):

        delta0 = beta0 + beta_mis' (mu_mis - S_mo S_oo^{-1} mu_obs)
        delta  = beta_obs + S_oo^{-1} S_om beta_mis
    """
    d = model.dim
    if dgp.dim != d:
        raise ValueError("model and response dimensions disagree")
    beta = dgp.beta
    table = {}
    for code in model.positive_patterns():
        comp = model.component_for(code)
        obs, mis = _obs_mis(code, d)
        if mis.size == 0:
            table[code] = (float(dgp.beta0), beta.copy())
            continue
        if obs.size == 0:
            table[code] = (float(dgp.beta0 + beta @ comp.mean), np.zeros(0))
            continue
        s_oo = submatrix(comp.cov, obs, obs)
        s_om = submatrix(comp.cov, obs, mis)
        a = linalg.spd_solve(s_oo, s_om)  # S_oo^{-1} S_om
        beta_mis = beta[mis]
        delta0 = dgp.beta0 + beta_mis @ (comp.mean[mis] - a.T @ comp.mean[obs])
        delta = beta[obs] + a @ beta_mis
        table[code] = (float(delta0), delta)
    return ExpandedBayesCoefficients(dim=d, table=table)


def predict_expanded_row(coeffs: ExpandedBayesCoefficients, values_row, mask_row) -> float:
    """Evaluate the per-pattern linear form on one masked row."""
    code = pack_mask_row(np.asarray(mask_row).astype(np.int64))
    entry = coeffs.table.get(code)
    if entry is None:
        raise UnknownPattern(f"pattern code {code} has no coefficient entry")
    delta0, delta = entry
    obs, _ = _obs_mis(code, coeffs.dim)
    return float(delta0 + delta @ np.asarray(values_row, dtype=np.float64)[obs])


def predict_expanded(coeffs: ExpandedBayesCoefficients, z) -> np.ndarray:
    """Batch prediction over a MaskedMatrix (rows grouped by pattern)."""
    masked = as_masked(z)
    out = np.empty(masked.n)
    for code, idx in masked.groups().items():
        entry = coeffs.table.get(code)
        if entry is None:
            raise UnknownPattern(f"pattern code {code} has no coefficient entry")
        delta0, delta = entry
        obs, _ = _obs_mis(code, coeffs.dim)
        out[idx] = delta0 + masked.values[np.ix_(idx, obs)] @ delta
    return out


def _subset_moebius_inplace(f):
    """In-place Moebius inversion over the subset lattice along axis 0.

    Input f[m] = sum over S subset of m of g[S]; output g. O(d 2**d).
    """
    size = f.shape[0]
    d = size.bit_length() - 1
    masks = np.arange(size)
    for j in range(d):
        bit = 1 << j
        sel = masks[(masks & bit) != 0]
        f[sel] -= f[sel ^ bit]
    return f


def compute_zeta(coeffs: ExpandedBayesCoefficients) -> FactorizedBayesCoefficients:
    """Multilinear (mask-polynomial) coefficients equivalent to the table form.

    Patterns missing from the table (zero probability) are treated as all-zero
    before the transform. Evaluating the polynomial at any mask reproduces the
    table entry for that mask exactly.
    """
    d = coeffs.dim
    check_pattern_dim(d, FACTORIZED_MAX_DIM)
    size = 1 << d
    bias = np.zeros(size)
    slopes = np.zeros((size, d))
    for code, (delta0, delta) in coeffs.table.items():
        bias[code] = delta0
        obs, _ = _obs_mis(code, d)
        slopes[code, obs] = delta
    # For feature j the polynomial only constrains masks with bit j clear;
    # copying those values onto the bit-set masks makes the transform return
    # zero for every subset containing j.
    masks = np.arange(size)
    for j in range(d):
        bit = 1 << j
        sel = masks[(masks & bit) != 0]
        slopes[sel, j] = slopes[sel ^ bit, j]
    _subset_moebius_inplace(bias)
    _subset_moebius_inplace(slopes)
    return FactorizedBayesCoefficients(dim=d, bias=bias, slopes=slopes)


def _submasks(code):
    s = code
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & code


def evaluate_factorized_row(fcoeffs: FactorizedBayesCoefficients, values_row, mask_row) -> float:
    """Evaluate the mask polynomial on one masked row."""
    check_pattern_dim(fcoeffs.dim, FACTORIZED_MAX_DIM)
    code = pack_mask_row(np.asarray(mask_row).astype(np.int64))
    x0 = np.asarray(values_row, dtype=np.float64) * (
        1 - np.asarray(mask_row, dtype=np.float64)
    )
    total = 0.0
    for s in _submasks(code):
        total += fcoeffs.bias[s] + fcoeffs.slopes[s] @ x0
    return float(total)


def evaluate_factorized(fcoeffs: FactorizedBayesCoefficients, z) -> np.ndarray:
    masked = as_masked(z)
    out = np.empty(masked.n)
    for i in range(masked.n):
        out[i] = evaluate_factorized_row(fcoeffs, masked.values[i], masked.mask[i])
    return out


def conditional_noise_cov(model: PatternMixtureModel, dgp: LinearDGP, code: int) -> np.ndarray:
    """Schur complement Var(X_mis | X_obs, M=m) for one pattern."""
    comp = model.component_for(code)
    obs, mis = _obs_mis(code, model.dim)
    s_mm = submatrix(comp.cov, mis, mis)
    if mis.size == 0:
        return np.zeros((0, 0))
    if obs.size == 0:
        return s_mm
    s_om = submatrix(comp.cov, obs, mis)
    t = s_mm - s_om.T @ linalg.spd_solve(submatrix(comp.cov, obs, obs), s_om)
    return 0.5 * (t + t.T)


def compute_noise_spec(model: PatternMixtureModel, dgp: LinearDGP) -> NoiseSpec:
    tables = {
        code: conditional_noise_cov(model, dgp, code)
        for code in model.positive_patterns()
    }
    return NoiseSpec(dim=model.dim, sigma=dgp.noise_sigma, tables=tables)


def bayes_risk(model: PatternMixtureModel, dgp: LinearDGP) -> float:
    """Exact expected squared error of the optimal predictor.

    risk = sigma^2 + sum_m P(M=m) Lambda_m, with Lambda_m evaluated term by
    term as the quadratic expansion in (gamma0, gamma, beta_mis) so that the
    Monte-Carlo cross-check in the tests stays an independent oracle.
    """
    coeffs = compute_delta(model, dgp)
    beta = dgp.beta
    total = 0.0
    for code in model.positive_patterns():
        prob = model.pattern_probs[code]
        comp = model.component_for(code)
        obs, mis = _obs_mis(code, model.dim)
        delta0, delta = coeffs.table[code]
        gamma0 = delta0 - dgp.beta0
        gamma = delta - beta[obs]
        beta_mis = beta[mis]
        mu_obs = comp.mean[obs]
        mu_mis = comp.mean[mis]
        s_oo = submatrix(comp.cov, obs, obs)
        s_mm = submatrix(comp.cov, mis, mis)
        s_om = submatrix(comp.cov, obs, mis)
        lam = (
            gamma @ s_oo @ gamma
            + beta_mis @ s_mm @ beta_mis
            - 2.0 * gamma @ s_om @ beta_mis
            + gamma0**2
            + (gamma @ mu_obs) ** 2
            + (beta_mis @ mu_mis) ** 2
            + 2.0 * gamma0 * (gamma @ mu_obs)
            - 2.0 * gamma0 * (beta_mis @ mu_mis)
            - 2.0 * (gamma @ mu_obs) * (beta_mis @ mu_mis)
        )
        total += prob * lam
    return float(dgp.noise_sigma**2 + total)


def response_variance(model: PatternMixtureModel, dgp: LinearDGP) -> float:
    """Exact Var(Y) under the pattern mixture: noise + within/between components."""
    beta = dgp.beta
    within = 0.0
    first = 0.0
    second = 0.0
    for code in model.positive_patterns():
        prob = model.pattern_probs[code]
        comp = model.component_for(code)
        within += prob * (beta @ comp.cov @ beta)
        m = beta @ comp.mean
        first += prob * m
        second += prob * m * m
    return float(dgp.noise_sigma**2 + within + second - first**2)


def expanded_param_count(d: int) -> int:
    """Total number of per-pattern parameters: 2**(d-1) * (d+2)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return (1 << (d - 1)) * (d + 2)


def expanded_param_count_by_sum(d: int) -> int:
    """Same count obtained by summing (k+1) intercept+slope slots per pattern size."""
    return sum(math.comb(d, k) * (k + 1) for k in range(d + 1))


def clip(value, bound):
    """Clip to [-bound, bound]; values on the boundary pass through unchanged."""
    if bound <= 0:
        raise ValueError("clip level must be positive")
    return np.clip(value, -bound, bound)


class BayesPredictor:
    """Oracle predictor built from the true generative parameters.

    Shares the estimator prediction surface (predict / describe / num_params)
    so experiment grids can run it alongside fitted models, but has no
    ``fit``: it is exact by construction.
    """

    def __init__(self, model: PatternMixtureModel, dgp: LinearDGP):
        self.model = model
        self.dgp = dgp
        self.coeffs_ = compute_delta(model, dgp)

    def predict(self, z) -> np.ndarray:
        return predict_expanded(self.coeffs_, as_masked(z))

    def predict_row(self, values_row, mask_row) -> float:
        return predict_expanded_row(self.coeffs_, values_row, mask_row)

    def describe(self) -> str:
        return "bayes_oracle"

    def num_params(self) -> int:
        return expanded_param_count(self.model.dim)
