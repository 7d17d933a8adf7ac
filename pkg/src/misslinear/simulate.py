"""Synthetic data generators: MCAR mixture, three-component mixture, and
self-masking MNAR, plus covariance construction and response generation.

A scenario is built in two stages so that learning-curve cells share one
underlying distribution: :func:`build_scenario` freezes the generative
parameters from the scenario seed, and :meth:`Scenario.sample` draws data
with whatever generator the caller passes in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import linalg
from .data import (
    GaussianComponent,
    LinearDGP,
    MaskedMatrix,
    PatternMixtureModel,
    check_pattern_dim,
)
from .rng import derive_rng

SCENARIO_KINDS = ("mixture1", "mixture3", "selfmasking")

COV_DIAG_FLOOR = 0.1  # fixed diagonal added to the low-rank part


@dataclass(frozen=True)
class ScenarioConfig:
    """Configuration of one data-generating scenario.

    Defaults follow the reference experimental setup: unit intercept,
    all-ones slope vector, zero response noise, and for self-masking a 25%
    per-feature missing rate with unit steepness.
    """

    kind: str
    dim: int
    seed: int = 0
    beta0: float = 1.0
    beta: np.ndarray | None = None
    noise_sigma: float = 0.0
    target_missing_rate: float = 0.25
    selfmask_lambda: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0.0 < self.target_missing_rate < 1.0:
            raise ValueError("target_missing_rate must be in (0, 1)")
        beta = self.beta
        if beta is None:
            beta = np.ones(self.dim)
        beta = np.asarray(beta, dtype=np.float64)
        if beta.size != self.dim:
            raise ValueError("beta length must equal dim")
        object.__setattr__(self, "beta", beta)
        lam = np.broadcast_to(
            np.asarray(self.selfmask_lambda, dtype=np.float64), (self.dim,)
        ).copy()
        if np.any(lam <= 0):
            raise ValueError("selfmask lambda values must be positive")
        object.__setattr__(self, "selfmask_lambda", lam)

    @property
    def dgp(self) -> LinearDGP:
        return LinearDGP(beta0=self.beta0, beta=self.beta, noise_sigma=self.noise_sigma)

    def tag(self) -> str:
        return f"{self.kind}-d{self.dim}-s{self.seed}"


@dataclass(frozen=True)
class SelfMaskingSpec:
    """Single-Gaussian MNAR mechanism: P(M_j=1 | X_j) = Phi(lam_j (X_j - mu0_j))."""

    mean: np.ndarray
    cov: np.ndarray
    lam: np.ndarray
    mu0: np.ndarray
    target_rate: float


@dataclass(frozen=True)
class Scenario:
    """Frozen generative parameters for one scenario.

    ``model`` is the pattern-mixture description when the scenario satisfies
    the Gaussian pattern-mixture assumption (mixture1/mixture3); it is None
    for self-masking, where no such description exists.
    """

    config: ScenarioConfig
    dgp: LinearDGP
    model: PatternMixtureModel | None = None
    selfmask: SelfMaskingSpec | None = None

    @property
    def supports_bayes(self) -> bool:
        return self.model is not None

    def sample(self, n, rng) -> tuple[MaskedMatrix, np.ndarray, np.ndarray]:
        """Draw n rows; returns (masked data, complete data, response)."""
        if self.config.kind == "selfmasking":
            masked, complete = sample_selfmasking_given(self.selfmask, n, rng)
        else:
            masked, complete = sample_mixture_given(self.model, self.config.dim, n, rng)
        y = gen_response(complete, self.dgp, rng)
        return masked, complete, y


def gen_covariance(d, rng) -> np.ndarray:
    """Random covariance B @ B.T + 0.1*I with B of shape (d, floor(d/2)).

    The low-rank factor creates strong correlations; the fixed diagonal keeps
    the matrix comfortably full rank.
    """
    b = rng.standard_normal((d, d // 2))
    return b @ b.T + COV_DIAG_FLOOR * np.eye(d)


def _uniform_pattern_probs(d) -> dict:
    p = 1.0 / (1 << d)  # exact power of two, sums to exactly 1.0
    return {code: p for code in range(1 << d)}


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Freeze the generative parameters implied by a scenario config."""
    d = config.dim
    rng = derive_rng(config.seed, "scenario-params", config.kind, d)
    if config.kind == "mixture1":
        comp = GaussianComponent(mean=rng.standard_normal(d), cov=gen_covariance(d, rng))
        check_pattern_dim(d)
        model = PatternMixtureModel(
            dim=d,
            components=(comp,),
            assignment={code: 0 for code in range(1 << d)},
            pattern_probs=_uniform_pattern_probs(d),
        )
        return Scenario(config=config, dgp=config.dgp, model=model)
    if config.kind == "mixture3":
        comps = tuple(
            GaussianComponent(mean=rng.standard_normal(d), cov=gen_covariance(d, rng))
            for _ in range(3)
        )
        check_pattern_dim(d)
        # 2**d is never divisible by 3: component sizes differ by at most one
        model = PatternMixtureModel(
            dim=d,
            components=comps,
            assignment={code: code % 3 for code in range(1 << d)},
            pattern_probs=_uniform_pattern_probs(d),
        )
        return Scenario(config=config, dgp=config.dgp, model=model)
    # selfmasking
    mean = rng.standard_normal(d)
    cov = gen_covariance(d, rng)
    mu0 = calibrate_selfmask(mean, cov, config.selfmask_lambda, config.target_missing_rate)
    spec = SelfMaskingSpec(
        mean=mean,
        cov=cov,
        lam=config.selfmask_lambda,
        mu0=mu0,
        target_rate=config.target_missing_rate,
    )
    return Scenario(config=config, dgp=config.dgp, selfmask=spec)


def _draw_gaussian(comp: GaussianComponent, n, rng) -> np.ndarray:
    chol = linalg.cholesky(comp.cov)
    return comp.mean + rng.standard_normal((n, comp.dim)) @ chol.T


def sample_mixture_given(model: PatternMixtureModel, d, n, rng):
    """Sample (masked, complete) from a mixture whose patterns are equiprobable.

    Patterns are drawn as d independent fair coin flips, which is exactly the
    uniform distribution over all 2**d patterns at O(d) cost per row.
    """
    mask = rng.random((n, d)) < 0.5
    codes = mask @ (1 << np.arange(d, dtype=np.int64))
    complete = np.empty((n, d))
    comp_of = np.array([model.assignment[c] for c in range(1 << d)])
    row_comp = comp_of[codes]
    for k, comp in enumerate(model.components):
        idx = np.flatnonzero(row_comp == k)
        if idx.size:
            complete[idx] = _draw_gaussian(comp, idx.size, rng)
    masked = MaskedMatrix.from_complete(complete, mask)
    return masked, complete


def sample_pattern_mixture(model: PatternMixtureModel, n, rng):
    """Generic sampler for any pattern-mixture model (categorical patterns)."""
    codes_all = np.array(sorted(model.pattern_probs), dtype=np.int64)
    probs = np.array([model.pattern_probs[int(c)] for c in codes_all])
    probs = probs / probs.sum()
    codes = rng.choice(codes_all, size=n, p=probs)
    d = model.dim
    mask = ((codes[:, None] >> np.arange(d)) & 1).astype(bool)
    complete = np.empty((n, d))
    comp_lookup = {c: model.assignment[int(c)] for c in codes_all}
    row_comp = np.array([comp_lookup[int(c)] for c in codes])
    for k, comp in enumerate(model.components):
        idx = np.flatnonzero(row_comp == k)
        if idx.size:
            complete[idx] = _draw_gaussian(comp, idx.size, rng)
    masked = MaskedMatrix.from_complete(complete, mask)
    return masked, complete


def sample_mixture1(config: ScenarioConfig, n, rng):
    """MCAR scenario: one shared Gaussian, uniform independent masking."""
    scenario = build_scenario(config)
    return sample_mixture_given(scenario.model, config.dim, n, rng)


def sample_mixture3(config: ScenarioConfig, n, rng):
    """Three Gaussian components, pattern code mod 3 picks the component."""
    scenario = build_scenario(config)
    return sample_mixture_given(scenario.model, config.dim, n, rng)


def calibrate_selfmask(mean, cov, lam, target_rate) -> np.ndarray:
    """Thresholds mu0 giving each feature the target marginal missing rate.

    Uses the Gaussian-probit identity
    E[Phi(lam (X - mu0))] = Phi(lam (mu - mu0) / sqrt(1 + lam^2 var)),
    so mu0_j = mu_j - Phi^{-1}(rate) * sqrt(1 + lam_j^2 var_j) / lam_j.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target rate must be in (0, 1)")
    mean = np.asarray(mean, dtype=np.float64)
    var = np.diag(np.asarray(cov, dtype=np.float64))
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), mean.shape)
    z = ndtri(target_rate)
    return mean - z * np.sqrt(1.0 + lam**2 * var) / lam


def sample_selfmasking_given(spec: SelfMaskingSpec, n, rng):
    comp = GaussianComponent(mean=spec.mean, cov=spec.cov)
    complete = _draw_gaussian(comp, n, rng)
    probs = linalg.std_normal_cdf(spec.lam * (complete - spec.mu0))
    mask = rng.random(complete.shape) < probs
    masked = MaskedMatrix.from_complete(complete, mask)
    return masked, complete


def sample_selfmasking(config: ScenarioConfig, n, rng):
    """Single Gaussian with probit self-masking per feature."""
    scenario = build_scenario(config)
    return sample_selfmasking_given(scenario.selfmask, n, rng)


def gen_response(complete, dgp: LinearDGP, rng) -> np.ndarray:
    """y = beta0 + X beta + eps computed from the complete design matrix."""
    complete = np.asarray(complete, dtype=np.float64)
    y = dgp.beta0 + complete @ dgp.beta
    if dgp.noise_sigma > 0:
        y = y + dgp.noise_sigma * rng.standard_normal(complete.shape[0])
    return y


# ---------------------------------------------------------------------------
# Sidecar (de)serialization of the full generative parameters
# ---------------------------------------------------------------------------


def scenario_to_dict(scenario: Scenario) -> dict:
    cfg = scenario.config
    out = {
        "kind": cfg.kind,
        "dim": cfg.dim,
        "seed": cfg.seed,
        "beta0": cfg.beta0,
        "beta": cfg.beta.tolist(),
        "noise_sigma": cfg.noise_sigma,
    }
    if scenario.model is not None:
        model = scenario.model
        out["components"] = [
            {"mean": c.mean.tolist(), "cov": c.cov.tolist()} for c in model.components
        ]
        out["assignment"] = {str(k): int(v) for k, v in sorted(model.assignment.items())}
        out["pattern_probs"] = {
            str(k): float(v) for k, v in sorted(model.pattern_probs.items())
        }
    if scenario.selfmask is not None:
        sm = scenario.selfmask
        out["selfmask"] = {
            "mean": sm.mean.tolist(),
            "cov": sm.cov.tolist(),
            "lambda": sm.lam.tolist(),
            "mu0": sm.mu0.tolist(),
            "target_missing_rate": sm.target_rate,
        }
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    config = ScenarioConfig(
        kind=doc["kind"],
        dim=int(doc["dim"]),
        seed=int(doc["seed"]),
        beta0=float(doc["beta0"]),
        beta=np.asarray(doc["beta"], dtype=np.float64),
        noise_sigma=float(doc["noise_sigma"]),
        target_missing_rate=float(
            doc.get("selfmask", {}).get("target_missing_rate", 0.25)
        ),
        selfmask_lambda=np.asarray(doc["selfmask"]["lambda"], dtype=np.float64)
        if "selfmask" in doc
        else 1.0,
    )
    model = None
    selfmask = None
    if "components" in doc:
        comps = tuple(
            GaussianComponent(
                mean=np.asarray(c["mean"], dtype=np.float64),
                cov=np.asarray(c["cov"], dtype=np.float64),
            )
            for c in doc["components"]
        )
        model = PatternMixtureModel(
            dim=config.dim,
            components=comps,
            assignment={int(k): int(v) for k, v in doc["assignment"].items()},
            pattern_probs={int(k): float(v) for k, v in doc["pattern_probs"].items()},
        )
    if "selfmask" in doc:
        sm = doc["selfmask"]
        selfmask = SelfMaskingSpec(
            mean=np.asarray(sm["mean"], dtype=np.float64),
            cov=np.asarray(sm["cov"], dtype=np.float64),
            lam=np.asarray(sm["lambda"], dtype=np.float64),
            mu0=np.asarray(sm["mu0"], dtype=np.float64),
            target_rate=float(sm["target_missing_rate"]),
        )
    return Scenario(config=config, dgp=config.dgp, model=model, selfmask=selfmask)
