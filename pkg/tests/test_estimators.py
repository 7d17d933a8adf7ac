import numpy as np
import pytest
from scipy.optimize import minimize

from misslinear.bayes import compute_delta
from misslinear.data import MaskedMatrix
from misslinear.errors import DimensionTooLarge
from misslinear.estimators import ConstantImputedLR, ExpandedLR, IterImputeLR
from misslinear.experiments import r2_score, bayes_r2
from misslinear.rng import derive_rng
from misslinear.simulate import ScenarioConfig, build_scenario


def mixture1_data(d, n, seed, scenario_seed=3):
    cfg = ScenarioConfig(kind="mixture1", dim=d, seed=scenario_seed)
    scenario = build_scenario(cfg)
    masked, complete, y = scenario.sample(n, derive_rng(seed, "estdata"))
    return scenario, masked, complete, y


def impute_ols_risk(masked, y, masked_eval, y_eval, constants):
    """Risk of (impute by fixed constants, then OLS) - the competitor family."""
    x = masked.values + masked.mask * constants
    design = np.column_stack([np.ones(masked.n), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    x_eval = masked_eval.values + masked_eval.mask * constants
    pred = np.column_stack([np.ones(masked_eval.n), x_eval]) @ coef
    return float(np.mean((y_eval - pred) ** 2))


class TestConstantImputedLR:
    def test_exact_recovery_no_missingness(self, rng):
        x = rng.standard_normal((200, 3))
        beta = np.array([1.0, -2.0, 0.5])
        y = 0.7 + x @ beta
        est = ConstantImputedLR().fit(
            MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool)), y
        )
        np.testing.assert_allclose(est.intercept_, 0.7, atol=1e-9)
        np.testing.assert_allclose(est.coef_, beta, atol=1e-9)
        np.testing.assert_allclose(est.mask_coef_, 0.0, atol=1e-9)

    def test_feature_always_missing(self, rng):
        x = rng.standard_normal((500, 2))
        mask = np.zeros_like(x, dtype=bool)
        mask[:, 1] = True
        masked = MaskedMatrix.from_complete(x, mask)
        y = 2.0 + x[:, 0]
        est = ConstantImputedLR().fit(masked, y)
        # the always-missing feature's value column is all zeros: slope 0
        assert abs(est.coef_[1]) < 1e-8
        pred = est.predict_row(np.array([1.0, 0.0]), np.array([0, 1]))
        np.testing.assert_allclose(
            pred, est.intercept_ + est.coef_[0] + est.mask_coef_[1], atol=1e-10
        )

    def test_beats_mean_and_median_imputation(self):
        _, masked, _, y = mixture1_data(2, 200_000, seed=1)
        train, hold = np.arange(100_000), np.arange(100_000, 200_000)
        ztr, zho = masked.rows(train), masked.rows(hold)
        est = ConstantImputedLR().fit(ztr, y[train])
        fitted_risk = float(np.mean((y[hold] - est.predict(zho)) ** 2))
        obs = ~ztr.mask
        means = np.array(
            [ztr.values[obs[:, j], j].mean() for j in range(2)]
        )
        medians = np.array(
            [np.median(ztr.values[obs[:, j], j]) for j in range(2)]
        )
        for constants in (means, medians):
            rival = impute_ols_risk(ztr, y[train], zho, y[hold], constants)
            assert fitted_risk <= rival + 1e-12

    def test_equivalent_to_joint_constant_search(self):
        # profile objective: for constants c, the best linear fit after
        # imputing with c; its minimum over c equals the mask-feature OLS risk
        _, masked, _, y = mixture1_data(2, 2000, seed=2)
        est = ConstantImputedLR().fit(masked, y)
        fitted_risk = float(np.mean((y - est.predict(masked)) ** 2))

        def objective(c):
            return impute_ols_risk(masked, y, masked, y, c)

        best = np.inf
        for start in (np.zeros(2), np.array([1.0, -1.0]), np.array([-2.0, 2.0])):
            res = minimize(objective, start, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
            best = min(best, res.fun)
        assert abs(best - fitted_risk) <= 1e-6 * fitted_risk
        # and the optimal constants are recovered by the coefficient ratio
        recovered = est.imputation_constants()
        assert objective(recovered) <= best + 1e-6 * fitted_risk

    def test_num_params_and_describe(self, rng):
        est = ConstantImputedLR().fit(
            MaskedMatrix.from_nan(rng.standard_normal((10, 3))), rng.standard_normal(10)
        )
        assert est.num_params() == 7
        assert est.describe() == "constant_imputed_lr"


class TestExpandedLR:
    def test_default_grid(self):
        assert ExpandedLR().lambda_grid == (1e-3, 1.0, 1e3)

    def test_single_pattern_reduces_to_ridge(self, rng):
        n, d, lam = 300, 3, 1.0
        x = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        masked = MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool))
        est = ExpandedLR(lambda_grid=(lam,)).fit(masked, y)
        # direct solve: unpenalized intercept + ridge slopes on the
        # standardized features (the penalized block bias collapses to zero)
        xs = est.standardizer_.transform(masked)
        a = np.zeros((d + 1, d + 1))
        a[0, 0] = n
        a[0, 1:] = xs.sum(axis=0)
        a[1:, 0] = xs.sum(axis=0)
        a[1:, 1:] = xs.T @ xs + lam * np.eye(d)
        rhs = np.concatenate([[y.sum()], xs.T @ y])
        sol = np.linalg.solve(a, rhs)
        pred_direct = sol[0] + xs @ sol[1:]
        np.testing.assert_allclose(est.predict(masked), pred_direct, atol=1e-8)
        assert abs(est.table_[0][0]) < 1e-8  # block bias absorbed by intercept

    def test_unseen_pattern_falls_back_to_intercept(self, rng):
        x = rng.standard_normal((100, 2))
        masked = MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool))
        y = 1.0 + x @ np.ones(2)
        est = ExpandedLR(lambda_grid=(1e-3,)).fit(masked, y)
        pred = est.predict_row(np.array([5.0, 0.0]), np.array([0, 1]))
        np.testing.assert_allclose(pred, est.intercept_)

    def test_fully_observed_recovery_noiseless(self):
        # within the fully-observed pattern the target is exactly linear, so
        # recovery is limited only by the (tiny) ridge bias
        scenario, masked, _, y = mixture1_data(3, 200_000, seed=4)
        est = ExpandedLR(lambda_grid=(1e-3,)).fit(masked, y)
        full = masked.pattern_codes() == 0
        rows = np.flatnonzero(full)[:200]
        pred = est.predict(masked.rows(rows))
        truth = 1.0 + masked.values[rows] @ np.ones(3)
        np.testing.assert_allclose(pred, truth, atol=1e-6)

    def test_consistency_near_bayes(self):
        scenario, masked, _, y = mixture1_data(3, 150_000, seed=5)
        train, test = np.arange(100_000), np.arange(100_000, 150_000)
        est = ExpandedLR().fit(masked.rows(train), y[train])
        r2 = r2_score(y[test], est.predict(masked.rows(test)))
        reference = bayes_r2(scenario.model, scenario.dgp, y[test])
        assert r2 >= reference - 0.005

    def test_pattern_coefficients_match_closed_form(self):
        # well-specification: per-pattern OLS targets the exact coefficients;
        # a well-conditioned model keeps the sampling error under the tolerance
        from misslinear.data import GaussianComponent, LinearDGP, PatternMixtureModel
        from misslinear.simulate import gen_response, sample_pattern_mixture

        d = 3
        comp = GaussianComponent(
            mean=np.array([0.5, -0.3, 0.2]), cov=np.eye(d) + 0.3
        )
        model = PatternMixtureModel(
            dim=d,
            components=(comp,),
            assignment={c: 0 for c in range(8)},
            pattern_probs={c: 1.0 / 8.0 for c in range(8)},
        )
        dgp = LinearDGP(1.0, np.full(d, 0.3))
        gen = derive_rng(1, "recov")
        masked, complete = sample_pattern_mixture(model, 300_000, gen)
        y = gen_response(complete, dgp, gen)
        counts = np.bincount(masked.pattern_codes(), minlength=8)
        bits = (np.arange(8)[:, None] >> np.arange(3)) & 1
        assert np.all(counts >= 50 * ((bits == 0).sum(axis=1) + 1))
        est = ExpandedLR(lambda_grid=(1e-3,)).fit(masked, y)
        delta = compute_delta(model, dgp)
        fitted = est.pattern_coefficients()
        for code in range(8):
            bias, slopes = fitted[code]
            delta0, dslopes = delta.table[code]
            assert abs(bias - delta0) < 1e-2
            np.testing.assert_allclose(slopes, dslopes, atol=1e-2)

    def test_block_solver_matches_dense_normal_equations(self, rng):
        # the arrowhead solve must agree with materializing the whole design:
        # global intercept column + per-pattern [indicator, observed features]
        n, d, lam = 400, 3, 0.7
        x = rng.standard_normal((n, d))
        x[rng.random((n, d)) < 0.4] = np.nan
        masked = MaskedMatrix.from_nan(x)
        y = rng.standard_normal(n)
        est = ExpandedLR(lambda_grid=(lam,)).fit(masked, y)

        xs = est.standardizer_.transform(masked)
        codes = masked.pattern_codes()
        cols, penalized = [np.ones((n, 1))], [False]
        for code in sorted(set(codes.tolist())):
            bits = (code >> np.arange(d)) & 1
            obs = np.flatnonzero(bits == 0)
            ind = (codes == code).astype(float)
            cols.append(ind[:, None])
            penalized.append(True)
            for j in obs:
                cols.append((ind * xs[:, j])[:, None])
                penalized.append(True)
        design = np.hstack(cols)
        pen = np.diag(np.array(penalized, dtype=float))
        theta = np.linalg.solve(design.T @ design + lam * pen, design.T @ y)
        np.testing.assert_allclose(est.predict(masked), design @ theta, atol=1e-10)

    def test_cv_selects_small_lambda_on_clean_data(self):
        _, masked, _, y = mixture1_data(3, 20_000, seed=7)
        est = ExpandedLR().fit(masked, y)
        assert est.lambda_ == 1e-3

    def test_dimension_cap(self, rng):
        x = rng.standard_normal((30, 15))
        with pytest.raises(DimensionTooLarge):
            ExpandedLR().fit(
                MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool)),
                rng.standard_normal(30),
            )

    def test_needs_enough_rows_for_folds(self, rng):
        x = rng.standard_normal((3, 2))
        with pytest.raises(ValueError):
            ExpandedLR(folds=5).fit(
                MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool)),
                rng.standard_normal(3),
            )


class TestIterImputeLR:
    def test_no_missingness_equals_ols(self, rng):
        x = rng.standard_normal((400, 3))
        y = rng.standard_normal(400)
        masked = MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool))
        est = IterImputeLR().fit(masked, y)
        design = np.column_stack([np.ones(400), x])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        np.testing.assert_allclose(est.intercept_, coef[0], atol=1e-9)
        np.testing.assert_allclose(est.coef_, coef[1:], atol=1e-9)

    def test_exact_linear_relation_imputed(self, rng):
        n = 200
        x = rng.standard_normal((n, 3))
        x[:, 2] = 3.0 + 2.0 * x[:, 0] - x[:, 1]  # exact dependence
        mask = np.zeros((n, 3), dtype=bool)
        mask[0, 2] = True
        masked = MaskedMatrix.from_complete(x, mask)
        est = IterImputeLR(sweeps=1).fit(masked, rng.standard_normal(n))
        imputed = est.impute(masked)
        assert abs(imputed[0, 2] - x[0, 2]) < 1e-8

    def test_beats_constant_imputation_under_mcar(self):
        _, masked, _, y = mixture1_data(4, 200_000, seed=8)
        train, test = np.arange(100_000), np.arange(100_000, 200_000)
        ztr, zte = masked.rows(train), masked.rows(test)
        iter_r2 = r2_score(y[test], IterImputeLR().fit(ztr, y[train]).predict(zte))
        const_r2 = r2_score(
            y[test], ConstantImputedLR().fit(ztr, y[train]).predict(zte)
        )
        assert iter_r2 > const_r2

    def test_replay_deterministic(self, rng):
        x = rng.standard_normal((300, 3))
        x[rng.random((300, 3)) < 0.3] = np.nan
        masked = MaskedMatrix.from_nan(x)
        y = rng.standard_normal(300)
        est = IterImputeLR().fit(masked, y)
        np.testing.assert_array_equal(est.predict(masked), est.predict(masked))

    def test_observed_cells_untouched(self, rng):
        x = rng.standard_normal((100, 3))
        x[rng.random((100, 3)) < 0.4] = np.nan
        masked = MaskedMatrix.from_nan(x)
        est = IterImputeLR(sweeps=3).fit(masked, rng.standard_normal(100))
        imputed = est.impute(masked)
        np.testing.assert_array_equal(imputed[~masked.mask], masked.values[~masked.mask])

    def test_sweeps_validation(self, rng):
        x = MaskedMatrix.from_nan(rng.standard_normal((10, 2)))
        with pytest.raises(ValueError):
            IterImputeLR(sweeps=0).fit(x, rng.standard_normal(10))
