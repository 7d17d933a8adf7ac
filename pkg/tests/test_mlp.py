import numpy as np
import pytest

from misslinear.bayes import ExpandedBayesCoefficients, compute_delta, predict_expanded
from misslinear.data import MaskedMatrix
from misslinear.errors import NonFiniteLoss, UnboundedSupport
from misslinear.estimators import MLPRegressor, construct_bayes_mlp, mlp_param_count
from misslinear.rng import derive_rng
from misslinear.simulate import ScenarioConfig, build_scenario, sample_pattern_mixture


class TestParamCount:
    def test_values(self):
        assert mlp_param_count(3, 8) == 65
        assert mlp_param_count(1, 1) == 5
        assert mlp_param_count(10, 2**10) == 22529

    def test_full_width_identity(self):
        for d in range(1, 13):
            assert mlp_param_count(d, 2**d) == (d + 1) * 2 ** (d + 1) + 1

    def test_matches_weight_storage(self):
        d, n_h = 4, 6
        est = MLPRegressor(hidden_width=n_h, epochs=1, decay_grid=(1e-4,))
        x = derive_rng(0, "pc").standard_normal((50, d))
        est.fit(MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool)),
                x @ np.ones(d))
        stored = (
            est.input_weights_.size
            + est.input_bias_.size
            + est.output_weights_.size
            + 1
        )
        assert stored == est.num_params() == mlp_param_count(d, n_h)


class TestTraining:
    def test_defaults(self):
        est = MLPRegressor()
        assert est.decay_grid == (1e-1, 1e-2, 1e-4)
        assert est.batch_size == 200
        assert est.betas == (0.9, 0.999)
        assert est.learning_rate == 1e-3

    def test_fits_linear_function(self):
        rng = derive_rng(3, "mlp-linear")
        n, d = 10_000, 2
        x = rng.standard_normal((n, d))
        y = 1.0 + x @ np.array([1.0, -0.5])
        masked = MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool))
        est = MLPRegressor(hidden_width=4, epochs=200, random_state=0).fit(masked, y)
        mse = float(np.mean((y - est.predict(masked)) ** 2))
        assert mse < 1e-3

    def test_deterministic_given_seed(self, rng):
        x = rng.standard_normal((400, 2))
        x[rng.random((400, 2)) < 0.3] = np.nan
        masked = MaskedMatrix.from_nan(x)
        y = rng.standard_normal(400)
        a = MLPRegressor(hidden_width=3, epochs=5, random_state=7).fit(masked, y)
        b = MLPRegressor(hidden_width=3, epochs=5, random_state=7).fit(masked, y)
        np.testing.assert_array_equal(a.input_weights_, b.input_weights_)
        np.testing.assert_array_equal(a.predict(masked), b.predict(masked))

    def test_divergent_lr_raises(self, rng):
        x = rng.standard_normal((300, 2))
        masked = MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool))
        y = x @ np.ones(2)
        with pytest.raises(NonFiniteLoss):
            MLPRegressor(hidden_width=4, epochs=50, learning_rate=1e160).fit(masked, y)

    def test_mask_features_enter_the_input(self, rng):
        # same observed values, different masks must give different predictions
        x = rng.standard_normal((2000, 2))
        mask = rng.random((2000, 2)) < 0.4
        masked = MaskedMatrix.from_complete(x, mask)
        y = x @ np.ones(2) + mask @ np.array([2.0, -1.0])
        est = MLPRegressor(hidden_width=8, epochs=60, random_state=1).fit(masked, y)
        p0 = est.predict_row(np.array([0.5, 0.0]), np.array([0, 1]))
        p1 = est.predict_row(np.array([0.5, 0.0]), np.array([0, 0]))
        assert abs(p0 - p1) > 0.1

    def test_validation_snapshot_recorded(self, rng):
        x = rng.standard_normal((500, 2))
        masked = MaskedMatrix(values=x, mask=np.zeros_like(x, dtype=bool))
        est = MLPRegressor(hidden_width=2, epochs=3, decay_grid=(1e-2, 1e-4)).fit(
            masked, x @ np.ones(2)
        )
        assert np.isfinite(est.val_loss_)
        assert est.weight_decay_ in (1e-2, 1e-4)


class TestConstructedNetwork:
    def test_d1_exhaustive_grid(self):
        table = {
            0: (0.7, np.array([1.3])),  # observed: 0.7 + 1.3 x
            1: (-0.4, np.zeros(0)),     # missing: constant -0.4
        }
        coeffs = ExpandedBayesCoefficients(dim=1, table=table)
        bound = 2.0
        net = construct_bayes_mlp(coeffs, bound)
        xs = np.arange(-bound, bound + 1e-9, 0.01)
        obs = MaskedMatrix(values=xs[:, None], mask=np.zeros((xs.size, 1), dtype=bool))
        np.testing.assert_allclose(net.predict(obs), 0.7 + 1.3 * xs, atol=1e-8)
        mis = MaskedMatrix(values=np.zeros((xs.size, 1)), mask=np.ones((xs.size, 1), dtype=bool))
        np.testing.assert_allclose(net.predict(mis), -0.4, atol=1e-8)

    @pytest.mark.parametrize("d", [1, 3, 5])
    def test_matches_closed_form_on_mixture3(self, d):
        cfg = ScenarioConfig(kind="mixture3", dim=d, seed=11)
        scenario = build_scenario(cfg)
        coeffs = compute_delta(scenario.model, scenario.dgp)
        masked, _ = sample_pattern_mixture(
            scenario.model, 10_000, derive_rng(d, "audit")
        )
        bound = float(np.abs(masked.values).max()) + 1.0
        net = construct_bayes_mlp(coeffs, bound)
        np.testing.assert_allclose(
            net.predict(masked), predict_expanded(coeffs, masked), atol=1e-6
        )
        pre = net.hidden_preactivations(masked)
        active = pre > 0
        assert np.all(active.sum(axis=1) == 1)
        np.testing.assert_array_equal(np.argmax(active, axis=1), masked.pattern_codes())

    def test_zero_slope_coordinate_still_one_to_one(self):
        # hand-built table where one observed slope is exactly zero
        table = {
            0b00: (0.5, np.array([0.0, 2.0])),
            0b01: (1.0, np.array([-1.5])),
            0b10: (-2.0, np.array([0.0])),
            0b11: (0.25, np.zeros(0)),
        }
        coeffs = ExpandedBayesCoefficients(dim=2, table=table)
        bound = 3.0
        net = construct_bayes_mlp(coeffs, bound)
        rng = derive_rng(4, "zero-slope")
        x = rng.uniform(-bound, bound, size=(4000, 2))
        mask = rng.random((4000, 2)) < 0.5
        masked = MaskedMatrix.from_complete(x, mask)
        np.testing.assert_allclose(
            net.predict(masked), predict_expanded(coeffs, masked), atol=1e-8
        )
        pre = net.hidden_preactivations(masked)
        assert np.all((pre > 0).sum(axis=1) == 1)
        np.testing.assert_array_equal(
            np.argmax(pre > 0, axis=1), masked.pattern_codes()
        )

    def test_requires_full_table(self):
        coeffs = ExpandedBayesCoefficients(dim=2, table={0: (0.0, np.zeros(2))})
        with pytest.raises(ValueError):
            construct_bayes_mlp(coeffs, 1.0)

    def test_requires_finite_positive_bound(self):
        table = {0: (0.0, np.zeros(1)), 1: (0.0, np.zeros(0))}
        coeffs = ExpandedBayesCoefficients(dim=1, table=table)
        with pytest.raises(UnboundedSupport):
            construct_bayes_mlp(coeffs, np.inf)
        with pytest.raises(UnboundedSupport):
            construct_bayes_mlp(coeffs, 0.0)

    def test_width_is_two_to_the_d(self):
        cfg = ScenarioConfig(kind="mixture3", dim=3, seed=1)
        scenario = build_scenario(cfg)
        net = construct_bayes_mlp(compute_delta(scenario.model, scenario.dgp), 5.0)
        assert net.input_weights_.shape == (8, 6)
        assert net.hidden_width == 8
