"""Command-line front end.

Subcommands: simulate, bayes-risk, fit, predict, learning-curve, width-sweep.
Configs are JSON documents with strict schemas: any unknown key is rejected
with an error naming it. Every command is deterministic given its config
(plus the --seed override), and all outputs are plain files.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bayes import bayes_risk, compute_delta, predict_expanded, response_variance
from .data import (
    MaskedMatrix,
    read_masked_csv,
    read_vector_csv,
    write_masked_csv,
    write_vector_csv,
)
from .errors import DegenerateTarget
from .estimators import load_model, save_model
from .experiments import (
    EstimatorSpec,
    ExperimentConfig,
    aggregate,
    aggregates_to_csv,
    build_estimator,
    cells_to_csv,
    default_estimator_name,
    learning_curve,
    r2_score,
    width_sweep,
)
from .rng import derive_rng
from .simulate import (
    ScenarioConfig,
    build_scenario,
    gen_response,
    sample_pattern_mixture,
    scenario_from_dict,
    scenario_to_dict,
)
from .svgchart import Series, line_chart

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(Exception):
    """Invalid configuration file or flags."""


# ---------------------------------------------------------------------------
# Strict config parsing
# ---------------------------------------------------------------------------


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


SCENARIO_KEYS = (
    "kind",
    "dim",
    "seed",
    "beta0",
    "beta",
    "noise_sigma",
    "target_missing_rate",
    "lambda",
)

ESTIMATOR_PARAM_KEYS = {
    "constant_imputed_lr": (),
    "expanded_lr": ("lambda_grid", "folds"),
    "em_lr": ("max_iter", "tol"),
    "iter_impute_lr": ("sweeps",),
    "mlp": (
        "hidden_width",
        "decay_grid",
        "epochs",
        "batch_size",
        "learning_rate",
        "val_fraction",
    ),
    "bayes_oracle": (),
}


def parse_scenario(doc) -> ScenarioConfig:
    _check_keys(doc, SCENARIO_KEYS, "scenario")
    for key in ("kind", "dim"):
        if key not in doc:
            raise ConfigError(f"scenario is missing required key {key!r}")
    try:
        return ScenarioConfig(
            kind=doc["kind"],
            dim=int(doc["dim"]),
            seed=int(doc.get("seed", 0)),
            beta0=float(doc.get("beta0", 1.0)),
            beta=None if doc.get("beta") is None else np.asarray(doc["beta"], float),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            target_missing_rate=float(doc.get("target_missing_rate", 0.25)),
            selfmask_lambda=np.asarray(doc["lambda"], float)
            if "lambda" in doc
            else 1.0,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_estimator(doc) -> EstimatorSpec:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("each estimator entry needs a 'kind'")
    kind = doc["kind"]
    if kind not in ESTIMATOR_PARAM_KEYS:
        raise ConfigError(f"unknown estimator kind {kind!r}")
    allowed = ("kind", "name") + ESTIMATOR_PARAM_KEYS[kind]
    _check_keys(doc, allowed, f"estimator {kind!r}")
    params = {k: doc[k] for k in ESTIMATOR_PARAM_KEYS[kind] if k in doc}
    name = doc.get("name", default_estimator_name(kind, params))
    return EstimatorSpec(kind=kind, name=name, params=params)


EXPERIMENT_KEYS = (
    "scenario",
    "estimators",
    "n_grid",
    "test_fraction",
    "repetitions",
    "master_seed",
)


def parse_experiment(doc, extra_keys=()) -> ExperimentConfig:
    _check_keys(doc, EXPERIMENT_KEYS + tuple(extra_keys), "experiment config")
    for key in ("scenario", "estimators", "n_grid"):
        if key not in doc:
            raise ConfigError(f"experiment config is missing required key {key!r}")
    scenario = parse_scenario(doc["scenario"])
    estimators = tuple(parse_estimator(e) for e in doc["estimators"])
    if not estimators:
        raise ConfigError("experiment config needs at least one estimator")
    try:
        return ExperimentConfig(
            scenario=scenario,
            estimators=estimators,
            n_grid=tuple(int(n) for n in doc["n_grid"]),
            test_fraction=float(doc.get("test_fraction", 0.25)),
            repetitions=int(doc.get("repetitions", 5)),
            master_seed=int(doc.get("master_seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def experiment_to_dict(config: ExperimentConfig) -> dict:
    scen = config.scenario
    return {
        "scenario": {
            "kind": scen.kind,
            "dim": scen.dim,
            "seed": scen.seed,
            "beta0": scen.beta0,
            "beta": scen.beta.tolist(),
            "noise_sigma": scen.noise_sigma,
            "target_missing_rate": scen.target_missing_rate,
            "lambda": scen.selfmask_lambda.tolist(),
        },
        "estimators": [
            {"kind": s.kind, "name": s.name, **s.params} for s in config.estimators
        ],
        "n_grid": list(config.n_grid),
        "test_fraction": config.test_fraction,
        "repetitions": config.repetitions,
        "master_seed": config.master_seed,
    }


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = _load_json(args.config)
    _check_keys(doc, ("scenario", "n_samples"), "simulate config")
    if "scenario" not in doc or "n_samples" not in doc:
        raise ConfigError("simulate config needs 'scenario' and 'n_samples'")
    scen_cfg = parse_scenario(doc["scenario"])
    if args.seed is not None:
        scen_cfg = ScenarioConfig(
            kind=scen_cfg.kind,
            dim=scen_cfg.dim,
            seed=args.seed,
            beta0=scen_cfg.beta0,
            beta=scen_cfg.beta,
            noise_sigma=scen_cfg.noise_sigma,
            target_missing_rate=scen_cfg.target_missing_rate,
            selfmask_lambda=scen_cfg.selfmask_lambda,
        )
    n = int(doc["n_samples"])
    if n < 1:
        raise ConfigError("n_samples must be >= 1")
    scenario = build_scenario(scen_cfg)
    masked, complete, y = scenario.sample(n, derive_rng(scen_cfg.seed, "simulate-data"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_masked_csv(out / "masked.csv", masked)
    write_masked_csv(
        out / "complete.csv",
        MaskedMatrix(values=complete, mask=np.zeros_like(complete, dtype=bool)),
    )
    write_vector_csv(out / "response.csv", "y", y)
    _write_json(out / "scenario.json", scenario_to_dict(scenario))
    print(f"wrote {n} rows to {out} (masked.csv, complete.csv, response.csv, scenario.json)")
    return EXIT_OK


def cmd_bayes_risk(args) -> int:
    doc = _load_json(args.sidecar)
    scenario = scenario_from_dict(doc)
    if not scenario.supports_bayes:
        print(
            "bayes-risk: the sidecar describes a self-masking (MNAR) scenario; "
            "the Gaussian pattern-mixture assumption does not hold, so the "
            "closed-form risk is undefined.",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    model, dgp = scenario.model, scenario.dgp
    risk = bayes_risk(model, dgp)
    var_y = response_variance(model, dgp)
    print(f"bayes_risk {risk:.10g}")
    if var_y > 0:
        print(f"bayes_r2 {1.0 - risk / var_y:.10g}")
    else:
        print("bayes_r2 undefined (response variance is zero)")
    if args.monte_carlo:
        n = int(args.monte_carlo)
        rng = derive_rng(scenario.config.seed, "bayes-risk-mc")
        masked, complete = sample_pattern_mixture(model, n, rng)
        y = gen_response(complete, dgp, rng)
        sq = (y - predict_expanded(compute_delta(model, dgp), masked)) ** 2
        mc = float(sq.mean())
        se = float(sq.std(ddof=1) / np.sqrt(n))
        print(f"monte_carlo_risk {mc:.10g} se {se:.3g} n {n}")
    return EXIT_OK


def cmd_fit(args) -> int:
    doc = _load_json(args.config)
    _check_keys(doc, ("estimator", "seed"), "fit config")
    if "estimator" not in doc:
        raise ConfigError("fit config needs an 'estimator' entry")
    spec = parse_estimator(doc["estimator"])
    if spec.kind == "bayes_oracle":
        raise ConfigError("bayes_oracle cannot be fitted from data files")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    masked = read_masked_csv(args.data)
    y = read_vector_csv(args.response)
    est = build_estimator(spec, scenario=None, fit_seed=seed)
    est.fit(masked, y)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    save_model(est, model_path)
    print(f"fitted {spec.name}: train_r2 {r2_score(y, est.predict(masked)):.6g}")
    print(f"wrote {model_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    est = load_model(args.model)
    masked = read_masked_csv(args.data)
    pred = est.predict(masked)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_vector_csv(out / "predictions.csv", "prediction", pred)
    print(f"wrote {out / 'predictions.csv'} ({pred.size} rows)")
    return EXIT_OK


def _grid_outputs(config, results, out: Path, svg_name, x_of, x_label, x_log):
    agg = aggregate(results)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cells.csv").write_text(cells_to_csv(results))
    (out / "aggregates.csv").write_text(aggregates_to_csv(agg))
    _write_json(out / "manifest.json", experiment_to_dict(config))

    by_series = {}
    for row in agg:
        key = x_of(row)
        if key is None:
            continue
        series_name, x = key
        by_series.setdefault(series_name, []).append(
            (x, row["r2_test_mean"], row["r2_test_ci95"])
        )
    series = []
    for name, pts in sorted(by_series.items()):
        pts.sort()
        series.append(
            Series(
                name=name,
                x=[p[0] for p in pts],
                y=[p[1] for p in pts],
                lo=[p[1] - p[2] for p in pts],
                hi=[p[1] + p[2] for p in pts],
            )
        )
    bayes_vals = [r["r2_bayes_mean"] for r in agg if r["r2_bayes_mean"] is not None]
    ref = float(np.mean(bayes_vals)) if bayes_vals else None
    if series:
        svg = line_chart(
            series,
            title=config.scenario.tag(),
            x_label=x_label,
            y_label="test R2",
            x_log=x_log,
            ref_level=ref,
            ref_label="bayes rate" if ref is not None else "",
        )
        (out / svg_name).write_text(svg)
    n_ok = sum(1 for r in results if r.ok)
    n_fail = len(results) - n_ok
    print(f"cells: {n_ok} ok, {n_fail} failed; outputs in {out}")
    return EXIT_OK if n_ok >= 1 else EXIT_RUNTIME


def cmd_learning_curve(args) -> int:
    doc = _load_json(args.config)
    config = parse_experiment(doc)
    if args.seed is not None:
        config = ExperimentConfig(
            scenario=config.scenario,
            estimators=config.estimators,
            n_grid=config.n_grid,
            test_fraction=config.test_fraction,
            repetitions=config.repetitions,
            master_seed=args.seed,
        )
    results = learning_curve(config, jobs=args.jobs)
    return _grid_outputs(
        config,
        results,
        Path(args.out),
        "learning_curve.svg",
        x_of=lambda row: (row["estimator"], row["n_train"]),
        x_label="training samples",
        x_log=True,
    )


def cmd_width_sweep(args) -> int:
    doc = _load_json(args.config)
    config = parse_experiment(doc, extra_keys=("widths",))
    if "widths" not in doc or not doc["widths"]:
        raise ConfigError("width-sweep config needs a non-empty 'widths' list")
    widths = [int(w) for w in doc["widths"]]
    if args.seed is not None:
        config = ExperimentConfig(
            scenario=config.scenario,
            estimators=config.estimators,
            n_grid=config.n_grid,
            test_fraction=config.test_fraction,
            repetitions=config.repetitions,
            master_seed=args.seed,
        )
    results = width_sweep(config, widths, jobs=args.jobs)

    def x_of(row):
        name = row["estimator"]
        width = int(name.rsplit("_w", 1)[1])
        return (f"n={row['n_train']}", width)

    return _grid_outputs(
        config,
        results,
        Path(args.out),
        "width_sweep.svg",
        x_of=x_of,
        x_label="hidden units",
        x_log=False,
    )


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misslinear",
        description="Missing-value regression experiments: simulation, "
        "closed-form optima, estimator fits and learning-curve grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("simulate", parents=[common], help="emit scenario data files")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "bayes-risk", parents=[common], help="closed-form risk from a scenario sidecar"
    )
    p.add_argument("sidecar", help="scenario.json written by simulate")
    p.add_argument("--monte-carlo", type=int, default=None, metavar="N")
    p.set_defaults(func=cmd_bayes_risk)

    p = sub.add_parser("fit", parents=[common], help="fit a model to data CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="masked CSV")
    p.add_argument("--response", required=True, help="response CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict from a model JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="masked CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("learning-curve", parents=[common], help="R2 vs training size grid")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_learning_curve)

    p = sub.add_parser("width-sweep", parents=[common], help="R2 vs hidden width grid")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_width_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, DegenerateTarget) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure contract: exit code 2
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
