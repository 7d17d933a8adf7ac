"""Dense linear-algebra kernels shared by the rest of the package.

Everything here operates on plain float64 ndarrays. SPD inputs are validated
(symmetry, finiteness) before factorization; failures raise
:class:`~misslinear.errors.NotPositiveDefinite` rather than numpy's generic
``LinAlgError`` so callers can treat a degenerate covariance as a domain error.
Problem sizes are small (d <= ~20 in every use), so all storage is dense.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .errors import NotPositiveDefinite

__all__ = [
    "check_finite",
    "check_spd",
    "cholesky",
    "spd_solve",
    "sym_sqrt",
    "least_squares",
    "ridge_solve",
    "std_normal_cdf",
]

_SYM_RTOL = 1e-12


def check_finite(a, name="array"):
    """Return ``a`` as a float64 ndarray, rejecting NaN/Inf entries."""
    out = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return out


def check_spd(a, name="matrix"):
    """Validate that ``a`` is square, finite and symmetric; return float64 copy-view.

    Symmetry tolerance is relative (1e-12 of the largest entry). Positive
    definiteness itself is only established by the factorizations below.
    """
    out = check_finite(a, name)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ValueError(f"{name} must be square, got shape {out.shape}")
    scale = np.abs(out).max() if out.size else 0.0
    if scale > 0 and np.abs(out - out.T).max() > _SYM_RTOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return out


def cholesky(a):
    """Lower Cholesky factor L with L @ L.T == a.

    Raises NotPositiveDefinite when a pivot is non-positive, which in this
    package always signals a degenerate covariance somewhere upstream.
    """
    a = check_spd(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc


def spd_solve(a, b):
    """Solve a @ x = b for SPD ``a`` via its Cholesky factor.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    l = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    y = np.linalg.solve(l, b)
    return np.linalg.solve(l.T, y)


def sym_sqrt(a):
    """Symmetric square root of an SPD matrix via its eigendecomposition."""
    a = check_spd(a)
    evals, evecs = np.linalg.eigh(a)
    if evals.size and evals.min() <= 0.0:
        raise NotPositiveDefinite(
            f"matrix has non-positive eigenvalue {evals.min():g}"
        )
    return (evecs * np.sqrt(evals)) @ evecs.T


def least_squares(design, target):
    """Minimum-norm least-squares solution of design @ x ~= target.

    Rank deficiency is resolved by the minimum-norm convention, which maps
    identically-zero columns to zero coefficients.
    """
    design = np.asarray(design, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    x, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    return x


def ridge_solve(design, target, lam, penalize=None):
    """Minimizer of ||design @ x - target||^2 + lam * ||x[penalize]||^2.

    ``penalize`` is a boolean mask over columns (default: all penalized).
    Solved as an augmented least-squares problem, so lam = 0 reduces exactly
    to :func:`least_squares` and partial penalization stays well-posed as
    long as the combined system has full column rank.
    """
    design = np.asarray(design, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if lam < 0:
        raise ValueError("ridge penalty must be nonnegative")
    if lam == 0:
        return least_squares(design, target)
    p = design.shape[1]
    if penalize is None:
        penalize = np.ones(p, dtype=bool)
    else:
        penalize = np.asarray(penalize, dtype=bool)
    rows = np.flatnonzero(penalize)
    aug = np.zeros((rows.size, p))
    aug[np.arange(rows.size), rows] = math.sqrt(lam)
    full_design = np.vstack([design, aug])
    full_target = np.concatenate([target, np.zeros(rows.size)])
    return least_squares(full_design, full_target)


def std_normal_cdf(x):
    """Standard normal CDF, elementwise over scalars or arrays.

    Backed by scipy's erf-based ``ndtr``; absolute error is far below the
    1e-7 the callers (self-masking calibration) need.
    """
    arr = np.asarray(x, dtype=np.float64)
    out = ndtr(arr)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out
