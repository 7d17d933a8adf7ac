"""Core data representations: missingness patterns, masked matrices, and the
Gaussian pattern-mixture generative model.

Conventions used everywhere in the package:

* a mask entry of 1 means *missing*, 0 means observed;
* masked matrices store a hard 0 at every missing cell — the mask is the
  single source of truth, so no NaN can leak into downstream algebra;
* a pattern is packed into an integer whose bit j is the mask of feature j,
  giving O(1) hashing for the 2**d coefficient tables built elsewhere.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionTooLarge, IndexOutOfRange

MAX_PATTERN_DIM = 20  # hard cap for any operation enumerating 2**d patterns


def check_pattern_dim(d, limit=MAX_PATTERN_DIM):
    if d > limit:
        raise DimensionTooLarge(
            f"d={d} exceeds the cap of {limit} for pattern-indexed tables"
        )


@dataclass(frozen=True)
class Pattern:
    """A d-bit missingness pattern; bit j set means feature j is missing."""

    bits: int
    dim: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.dim):
            raise ValueError(f"bits={self.bits} out of range for dim={self.dim}")

    @classmethod
    def from_row(cls, mask_row) -> "Pattern":
        """Pack a binary mask row into a Pattern."""
        mask_row = np.asarray(mask_row)
        if not np.isin(mask_row, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        return cls(bits=pack_mask_row(mask_row), dim=mask_row.size)

    @property
    def mis_indices(self) -> np.ndarray:
        """Indices of missing features, ascending."""
        return np.flatnonzero(self.to_row())

    @property
    def obs_indices(self) -> np.ndarray:
        """Indices of observed features, ascending."""
        return np.flatnonzero(1 - self.to_row())

    @property
    def n_missing(self) -> int:
        return int(bin(self.bits).count("1"))

    def to_row(self) -> np.ndarray:
        """The pattern as a 0/1 vector of length dim."""
        return (self.bits >> np.arange(self.dim)) & 1


def pack_mask_row(mask_row) -> int:
    """Mask row (0/1 entries) -> integer pattern code."""
    mask_row = np.asarray(mask_row, dtype=np.int64)
    return int(mask_row @ (1 << np.arange(mask_row.size, dtype=np.int64)))


def pattern_codes(mask) -> np.ndarray:
    """Per-row integer pattern codes for an (n, d) mask."""
    mask = np.asarray(mask, dtype=np.int64)
    return mask @ (1 << np.arange(mask.shape[1], dtype=np.int64))


@dataclass(frozen=True)
class MaskedMatrix:
    """Observed values (zeros at missing cells) paired with a binary mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if values.shape != mask.shape or values.ndim != 2:
            raise ValueError(
                f"values {values.shape} and mask {mask.shape} must be equal 2-d shapes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("masked values contain NaN/Inf")
        if np.any(values[mask] != 0.0):
            raise ValueError("missing cells must store exact zeros")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_nan(cls, x) -> "MaskedMatrix":
        """Build from an array using NaN as the missing marker."""
        x = np.array(x, dtype=np.float64)
        mask = np.isnan(x)
        x[mask] = 0.0
        return cls(values=x, mask=mask)

    @classmethod
    def from_complete(cls, x, mask) -> "MaskedMatrix":
        """Apply a mask to complete data, zeroing the masked cells."""
        x = np.array(x, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        x[mask] = 0.0
        return cls(values=x, mask=mask)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def to_nan(self) -> np.ndarray:
        out = self.values.copy()
        out[self.mask] = np.nan
        return out

    def pattern_codes(self) -> np.ndarray:
        return pattern_codes(self.mask)

    def rows(self, idx) -> "MaskedMatrix":
        return MaskedMatrix(values=self.values[idx], mask=self.mask[idx])

    def groups(self) -> dict[int, np.ndarray]:
        """Row indices grouped by pattern code."""
        codes = self.pattern_codes()
        order = np.argsort(codes, kind="stable")
        uniq, starts = np.unique(codes[order], return_index=True)
        bounds = np.append(starts, codes.size)
        return {
            int(c): order[bounds[i] : bounds[i + 1]] for i, c in enumerate(uniq)
        }


def as_masked(x) -> MaskedMatrix:
    """Coerce estimator input to a MaskedMatrix.

    Accepts a MaskedMatrix unchanged, or a 2-d array where NaN marks the
    missing cells (the representation sklearn pipelines pass around).
    """
    if isinstance(x, MaskedMatrix):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-d input, got shape {arr.shape}")
    return MaskedMatrix.from_nan(arr)


# ---------------------------------------------------------------------------
# CSV round trip. Missing cells are written as the literal token NA; finite
# values use 17 significant digits, which round-trips float64 bit-exactly.
# ---------------------------------------------------------------------------

NA_TOKEN = "NA"


def format_float(x) -> str:
    return f"{x:.17g}"


def masked_to_csv(masked: MaskedMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j}" for j in range(masked.dim)])
    for i in range(masked.n):
        writer.writerow(
            [
                NA_TOKEN if masked.mask[i, j] else format_float(masked.values[i, j])
                for j in range(masked.dim)
            ]
        )
    return buf.getvalue()


def masked_from_csv(text: str) -> MaskedMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    body = rows[1:]
    d = len(rows[0])
    values = np.zeros((len(body), d))
    mask = np.zeros((len(body), d), dtype=bool)
    for i, row in enumerate(body):
        if len(row) != d:
            raise ValueError(f"row {i} has {len(row)} cells, expected {d}")
        for j, cell in enumerate(row):
            if cell == NA_TOKEN:
                mask[i, j] = True
            else:
                values[i, j] = float(cell)
    return MaskedMatrix(values=values, mask=mask)


def write_masked_csv(path, masked: MaskedMatrix):
    with open(path, "w", newline="") as fh:
        fh.write(masked_to_csv(masked))


def read_masked_csv(path) -> MaskedMatrix:
    with open(path) as fh:
        return masked_from_csv(fh.read())


def write_vector_csv(path, name, values):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name])
        for v in np.asarray(values, dtype=np.float64):
            writer.writerow([format_float(v)])


def read_vector_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[0]) for r in rows[1:]], dtype=np.float64)


# ---------------------------------------------------------------------------
# Generative model pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianComponent:
    """Mean and SPD covariance of one Gaussian mixture component."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = linalg.check_spd(self.cov, "component covariance")
        if cov.shape[0] != mean.size:
            raise ValueError("mean and covariance dimensions disagree")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class PatternMixtureModel:
    """Per-pattern Gaussian parameters plus pattern probabilities.

    ``assignment`` and ``pattern_probs`` are keyed by integer pattern codes
    (see :func:`pack_mask_row`). Every pattern with positive probability must
    be assigned a component.
    """

    dim: int
    components: tuple
    assignment: dict = field(repr=False)
    pattern_probs: dict = field(repr=False)

    def __post_init__(self):
        check_pattern_dim(self.dim)
        total = sum(self.pattern_probs.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"pattern probabilities sum to {total!r}, not 1")
        for code, prob in self.pattern_probs.items():
            if prob < 0:
                raise ValueError("pattern probabilities must be nonnegative")
            if prob > 0 and code not in self.assignment:
                raise ValueError(f"pattern {code} has positive probability but no component")
        for code, comp_idx in self.assignment.items():
            if not 0 <= comp_idx < len(self.components):
                raise ValueError(f"pattern {code} assigned to unknown component {comp_idx}")
        object.__setattr__(self, "components", tuple(self.components))

    def component_for(self, code: int) -> GaussianComponent:
        return self.components[self.assignment[code]]

    def positive_patterns(self) -> list[int]:
        return sorted(c for c, p in self.pattern_probs.items() if p > 0)


@dataclass(frozen=True)
class LinearDGP:
    """Linear response model y = beta0 + <x, beta> + eps, eps ~ N(0, sigma^2)."""

    beta0: float
    beta: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1:
            raise ValueError("beta must be a vector")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        object.__setattr__(self, "beta", beta)

    @property
    def dim(self) -> int:
        return self.beta.size


def submatrix(cov, row_idx, col_idx) -> np.ndarray:
    """Extract cov[row_idx, col_idx] as a dense block (always 2-d)."""
    cov = np.asarray(cov, dtype=np.float64)
    row_idx = np.asarray(row_idx, dtype=np.intp)
    col_idx = np.asarray(col_idx, dtype=np.intp)
    n, m = cov.shape
    if row_idx.size and (row_idx.min() < 0 or row_idx.max() >= n):
        raise IndexOutOfRange(f"row indices out of range for {n}x{m} matrix")
    if col_idx.size and (col_idx.min() < 0 or col_idx.max() >= m):
        raise IndexOutOfRange(f"column indices out of range for {n}x{m} matrix")
    return cov[np.ix_(row_idx, col_idx)]


def conditional_gaussian(comp: GaussianComponent, given_idx, given_values, query_idx):
    """Conditional distribution of X[query_idx] given X[given_idx] = given_values.

    Returns (mean, cov) with

        mean = mu_I + S_IJ S_JJ^{-1} (x_J - mu_J)
        cov  = S_II - S_IJ S_JJ^{-1} S_JI

    With an empty conditioning set this is simply the marginal (mu_I, S_II).
    """
    given_idx = np.asarray(given_idx, dtype=np.intp)
    query_idx = np.asarray(query_idx, dtype=np.intp)
    if np.intersect1d(given_idx, query_idx).size:
        raise ValueError("given and query index sets must be disjoint")
    given_values = np.asarray(given_values, dtype=np.float64)
    if given_values.size != given_idx.size:
        raise ValueError("given_values length must match given_idx")
    mu_i = comp.mean[query_idx]
    s_ii = submatrix(comp.cov, query_idx, query_idx)
    if given_idx.size == 0:
        return mu_i, s_ii
    mu_j = comp.mean[given_idx]
    s_jj = submatrix(comp.cov, given_idx, given_idx)
    s_ij = submatrix(comp.cov, query_idx, given_idx)
    # solve once with the cross-covariance as right-hand side
    w = linalg.spd_solve(s_jj, s_ij.T)  # S_JJ^{-1} S_JI
    mean = mu_i + w.T @ (given_values - mu_j)
    cov = s_ii - s_ij @ w
    cov = 0.5 * (cov + cov.T)
    return mean, cov
