"""Experiment harness: train/test cells, R2 scoring against the exact optimum,
learning curves over n, and hidden-width sweeps.

Every cell derives its own seed from (master seed, scenario tag, estimator
tag, n, repetition), so the full result grid is reproducible cell by cell and
cells can be computed in parallel in any order. Estimator failures inside a
cell are captured into the cell's status instead of aborting the grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bayes import BayesPredictor, bayes_risk
from .data import LinearDGP, PatternMixtureModel
from .errors import DegenerateTarget
from .estimators import (
    EMLR,
    ConstantImputedLR,
    ExpandedLR,
    IterImputeLR,
    MLPRegressor,
)
from .rng import derive_rng, derive_seed
from .simulate import Scenario, ScenarioConfig, build_scenario

ESTIMATOR_KINDS = (
    "constant_imputed_lr",
    "expanded_lr",
    "em_lr",
    "iter_impute_lr",
    "mlp",
    "bayes_oracle",
)

CELL_COLUMNS = (
    "scenario",
    "estimator",
    "n_train",
    "rep",
    "r2_train",
    "r2_test",
    "r2_bayes",
    "wall_ms",
    "hyperparams_json",
    "seed",
    "status",
)

AGGREGATE_COLUMNS = (
    "scenario",
    "estimator",
    "n_train",
    "n_reps",
    "r2_train_mean",
    "r2_train_ci95",
    "r2_test_mean",
    "r2_test_ci95",
    "r2_bayes_mean",
)


def r2_score(y_true, y_pred) -> float:
    """Coefficient of determination 1 - SSE/SST."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.size != y_pred.size:
        raise ValueError("length mismatch")
    if y_true.size < 2:
        raise ValueError("need at least two observations")
    sst = np.sum((y_true - y_true.mean()) ** 2)
    if sst == 0.0:
        raise DegenerateTarget("target vector is constant")
    sse = np.sum((y_true - y_pred) ** 2)
    return float(1.0 - sse / sst)


def bayes_r2(model: PatternMixtureModel, dgp: LinearDGP, y_test) -> float:
    """Best achievable R2 on this test target: 1 - risk / Var(y_test)."""
    y_test = np.asarray(y_test, dtype=np.float64)
    var = float(np.mean((y_test - y_test.mean()) ** 2))
    if var == 0.0:
        raise DegenerateTarget("target vector is constant")
    return 1.0 - bayes_risk(model, dgp) / var


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator entry of an experiment grid."""

    kind: str
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")


def default_estimator_name(kind: str, params: dict) -> str:
    if kind == "mlp" and "hidden_width" in params:
        return f"mlp_w{params['hidden_width']}"
    return kind


def build_estimator(spec: EstimatorSpec, scenario: Scenario, fit_seed: int):
    """Instantiate the predictor for one cell (seeded where training is random)."""
    kind, params = spec.kind, dict(spec.params)
    if kind == "constant_imputed_lr":
        return ConstantImputedLR(**params)
    if kind == "expanded_lr":
        return ExpandedLR(random_state=fit_seed, **params)
    if kind == "em_lr":
        return EMLR(**params)
    if kind == "iter_impute_lr":
        return IterImputeLR(**params)
    if kind == "mlp":
        return MLPRegressor(random_state=fit_seed, **params)
    if kind == "bayes_oracle":
        if not scenario.supports_bayes:
            raise ValueError(
                "bayes_oracle requires a pattern-mixture scenario; "
                f"{scenario.config.kind!r} does not satisfy the assumption"
            )
        return BayesPredictor(scenario.model, scenario.dgp)
    raise ValueError(f"unknown estimator kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    estimators: tuple
    n_grid: tuple
    test_fraction: float = 0.25
    repetitions: int = 5
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        n_grid = tuple(int(n) for n in self.n_grid)
        if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if not n_grid:
            raise ValueError("n_grid must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        object.__setattr__(self, "n_grid", n_grid)
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass(frozen=True)
class RunResult:
    scenario: str
    estimator: str
    n_train: int
    rep: int
    r2_train: float | None
    r2_test: float | None
    r2_bayes: float | None
    wall_ms: float
    hyperparams: dict
    seed: int
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _selected_hyperparams(est) -> dict:
    if isinstance(est, ExpandedLR):
        return {"lambda": est.lambda_}
    if isinstance(est, MLPRegressor) and hasattr(est, "weight_decay_"):
        return {"weight_decay": est.weight_decay_, "hidden_width": est.hidden_width}
    if isinstance(est, EMLR) and hasattr(est, "n_iter_"):
        return {"n_iter": est.n_iter_}
    return {}


def run_cell(
    config: ExperimentConfig, scenario: Scenario, spec: EstimatorSpec, n_train: int, rep: int
) -> RunResult:
    """Sample, split, fit and score one grid cell."""
    seed = derive_seed(
        config.master_seed, scenario.config.tag(), spec.name, n_train, rep
    )
    total = math.ceil(n_train / (1.0 - config.test_fraction))
    masked, _, y = scenario.sample(total, derive_rng(seed, "data"))
    train_rows = np.arange(n_train)
    test_rows = np.arange(n_train, total)
    z_train, y_train = masked.rows(train_rows), y[train_rows]
    z_test, y_test = masked.rows(test_rows), y[test_rows]

    r2_b = None
    if scenario.supports_bayes:
        r2_b = bayes_r2(scenario.model, scenario.dgp, y_test)

    start = time.perf_counter()
    try:
        est = build_estimator(spec, scenario, fit_seed=derive_seed(seed, "fit"))
        if spec.kind != "bayes_oracle":
            est.fit(z_train, y_train)
        wall_ms = 1000.0 * (time.perf_counter() - start)
        r2_tr = r2_score(y_train, est.predict(z_train))
        r2_te = r2_score(y_test, est.predict(z_test))
        hyper = _selected_hyperparams(est)
        status = "ok"
    except Exception as exc:  # failures become records, not crashes
        wall_ms = 1000.0 * (time.perf_counter() - start)
        r2_tr = r2_te = None
        hyper = {}
        status = f"error:{type(exc).__name__}:{exc}"
    return RunResult(
        scenario=scenario.config.tag(),
        estimator=spec.name,
        n_train=n_train,
        rep=rep,
        r2_train=r2_tr,
        r2_test=r2_te,
        r2_bayes=r2_b,
        wall_ms=wall_ms,
        hyperparams=hyper,
        seed=seed,
        status=status,
    )


def _cell_task(args):
    return run_cell(*args)


def run_grid(
    config: ExperimentConfig,
    scenario: Scenario | None = None,
    n_values=None,
    jobs: int = 1,
) -> list[RunResult]:
    """Run estimators x n x repetitions; results come back in grid order."""
    if scenario is None:
        scenario = build_scenario(config.scenario)
    if n_values is None:
        n_values = config.n_grid
    tasks = [
        (config, scenario, spec, int(n), rep)
        for spec in config.estimators
        for n in n_values
        for rep in range(config.repetitions)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [run_cell(*t) for t in tasks]
    return results


def learning_curve(config: ExperimentConfig, jobs: int = 1) -> list[RunResult]:
    """Full grid over the configured training sizes."""
    return run_grid(config, jobs=jobs)


def width_sweep(config: ExperimentConfig, widths, jobs: int = 1) -> list[RunResult]:
    """Train the configured MLP template across hidden widths at fixed n.

    The first (or only) estimator of kind "mlp" in the config serves as the
    template; each width gets its own estimator tag ``mlp_w<width>``.
    """
    templates = [s for s in config.estimators if s.kind == "mlp"]
    if not templates:
        raise ValueError("width_sweep needs an estimator of kind 'mlp' in the config")
    template = templates[0]
    specs = []
    for width in widths:
        params = dict(template.params)
        params["hidden_width"] = int(width)
        specs.append(
            EstimatorSpec(kind="mlp", name=f"mlp_w{int(width)}", params=params)
        )
    swept = replace(config, estimators=tuple(specs))
    return run_grid(swept, jobs=jobs)


# ---------------------------------------------------------------------------
# Aggregation and CSV output
# ---------------------------------------------------------------------------


def aggregate(results) -> list[dict]:
    """Mean and normal-approximation 95% CI over repetitions, per cell group.

    Failed repetitions are excluded; a group with no successful repetition is
    dropped entirely.
    """
    groups = {}
    for r in results:
        groups.setdefault((r.scenario, r.estimator, r.n_train), []).append(r)
    rows = []
    for (scen, est, n_train), cells in sorted(groups.items()):
        ok = [c for c in cells if c.ok]
        if not ok:
            continue
        r2_tr = np.array([c.r2_train for c in ok])
        r2_te = np.array([c.r2_test for c in ok])
        bayes_vals = [c.r2_bayes for c in ok if c.r2_bayes is not None]

        def ci(v):
            if v.size < 2:
                return 0.0
            return 1.96 * v.std(ddof=1) / math.sqrt(v.size)

        rows.append(
            {
                "scenario": scen,
                "estimator": est,
                "n_train": n_train,
                "n_reps": len(ok),
                "r2_train_mean": float(r2_tr.mean()),
                "r2_train_ci95": float(ci(r2_tr)),
                "r2_test_mean": float(r2_te.mean()),
                "r2_test_ci95": float(ci(r2_te)),
                "r2_bayes_mean": float(np.mean(bayes_vals)) if bayes_vals else None,
            }
        )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cells_to_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CELL_COLUMNS)
    ordered = sorted(results, key=lambda r: (r.scenario, r.estimator, r.n_train, r.rep))
    for r in ordered:
        writer.writerow(
            [
                r.scenario,
                r.estimator,
                r.n_train,
                r.rep,
                _fmt(r.r2_train),
                _fmt(r.r2_test),
                _fmt(r.r2_bayes),
                _fmt(r.wall_ms),
                json.dumps(r.hyperparams, sort_keys=True),
                r.seed,
                r.status,
            ]
        )
    return buf.getvalue()


def aggregates_to_csv(agg_rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for row in agg_rows:
        writer.writerow([_fmt(row[c]) for c in AGGREGATE_COLUMNS])
    return buf.getvalue()
