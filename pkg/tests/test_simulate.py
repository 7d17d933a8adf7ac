import numpy as np
import pytest

from misslinear import linalg
from misslinear.data import pattern_codes
from misslinear.rng import derive_rng, derive_seed
from misslinear.simulate import (
    COV_DIAG_FLOOR,
    Scenario,
    ScenarioConfig,
    build_scenario,
    calibrate_selfmask,
    gen_covariance,
    gen_response,
    sample_mixture1,
    sample_mixture3,
    sample_pattern_mixture,
    sample_selfmasking,
    scenario_from_dict,
    scenario_to_dict,
)


class TestSeedDerivation:
    def test_stable(self):
        assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)

    def test_sensitive_to_parts(self):
        seeds = {
            derive_seed(1, "a", 2),
            derive_seed(1, "a", 3),
            derive_seed(2, "a", 2),
            derive_seed(1, "b", 2),
            derive_seed(1, "a", 2, 0),
        }
        assert len(seeds) == 5

    def test_int_float_distinct(self):
        assert derive_seed(1) != derive_seed(1.0)


class TestGenCovariance:
    def test_d1_is_diagonal_floor(self):
        cov = gen_covariance(1, derive_rng(0, "cov"))
        np.testing.assert_allclose(cov, [[COV_DIAG_FLOOR]])

    def test_min_eigenvalue_floor(self):
        for seed in range(10):
            cov = gen_covariance(4, derive_rng(seed, "cov"))
            linalg.cholesky(cov)
            assert np.linalg.eigvalsh(cov).min() >= COV_DIAG_FLOOR - 1e-12

    def test_lowrank_part_rank(self):
        for d in (2, 5, 9):
            cov = gen_covariance(d, derive_rng(3, "cov", d))
            lowrank = cov - COV_DIAG_FLOOR * np.eye(d)
            rank = np.linalg.matrix_rank(lowrank, tol=1e-8)
            assert rank <= d // 2


class TestMixture1:
    def test_per_feature_missing_rate(self):
        cfg = ScenarioConfig(kind="mixture1", dim=4, seed=1)
        masked, _ = sample_mixture1(cfg, 100_000, derive_rng(0, "m1"))
        rates = masked.mask.mean(axis=0)
        assert np.all(np.abs(rates - 0.5) < 0.01)

    def test_pattern_frequencies_uniform(self):
        cfg = ScenarioConfig(kind="mixture1", dim=3, seed=1)
        masked, _ = sample_mixture1(cfg, 1_000_000, derive_rng(1, "m1"))
        codes = masked.pattern_codes()
        freq = np.bincount(codes, minlength=8) / codes.size
        assert np.all(np.abs(freq - 1.0 / 8.0) < 0.002)

    def test_complete_mean_clt(self):
        cfg = ScenarioConfig(kind="mixture1", dim=4, seed=5)
        scenario = build_scenario(cfg)
        n = 100_000
        _, complete = sample_mixture1(cfg, n, derive_rng(2, "m1"))
        comp = scenario.model.components[0]
        sig = np.sqrt(np.diag(comp.cov))
        assert np.all(np.abs(complete.mean(axis=0) - comp.mean) < 4 * sig / np.sqrt(n))

    def test_mask_independent_of_values(self):
        # MCAR: mean of a feature among rows where another feature is missing
        # matches the overall mean
        cfg = ScenarioConfig(kind="mixture1", dim=3, seed=2)
        _, complete = sample_mixture1(cfg, 1000, derive_rng(3, "m1"))
        masked, complete = sample_mixture1(cfg, 200_000, derive_rng(3, "m1"))
        x0 = complete[:, 0]
        m1 = masked.mask[:, 1]
        assert abs(x0[m1].mean() - x0[~m1].mean()) < 0.05


class TestMixture3:
    def test_assignment_sizes(self):
        cfg = ScenarioConfig(kind="mixture3", dim=4, seed=0)
        model = build_scenario(cfg).model
        counts = np.bincount([model.assignment[c] for c in range(16)], minlength=3)
        assert counts.max() - counts.min() <= 1
        assert model.assignment[0] == 0
        assert model.assignment[1] == 1
        assert model.assignment[2] == 2
        assert model.assignment[3] == 0

    def test_conditional_means_match_components(self):
        cfg = ScenarioConfig(kind="mixture3", dim=3, seed=4)
        scenario = build_scenario(cfg)
        masked, complete = sample_mixture3(cfg, 100_000, derive_rng(0, "m3"))
        codes = masked.pattern_codes()
        for code in range(8):
            idx = codes == code
            n = idx.sum()
            comp = scenario.model.component_for(code)
            sig = np.sqrt(np.diag(comp.cov))
            assert np.all(
                np.abs(complete[idx].mean(axis=0) - comp.mean) < 5 * sig / np.sqrt(n)
            )

    def test_pattern_marginals_uniform(self):
        cfg = ScenarioConfig(kind="mixture3", dim=3, seed=4)
        masked, _ = sample_mixture3(cfg, 500_000, derive_rng(1, "m3"))
        freq = np.bincount(masked.pattern_codes(), minlength=8) / masked.n
        assert np.all(np.abs(freq - 1.0 / 8.0) < 0.004)


class TestSelfmaskCalibration:
    def test_half_rate_gives_mean(self):
        mean = np.array([0.3, -2.0])
        cov = np.diag([1.5, 0.2])
        mu0 = calibrate_selfmask(mean, cov, np.array([1.0, 3.0]), 0.5)
        np.testing.assert_allclose(mu0, mean, atol=1e-12)

    def test_bisection_oracle(self):
        # independent root-finder on the closed-form expectation
        def expected_rate(mu0, mu, var, lam):
            return linalg.std_normal_cdf(lam * (mu - mu0) / np.sqrt(1 + lam**2 * var))

        mu, var, lam, target = 0.0, 1.0, 1.0, 0.25
        lo, hi = -50.0, 50.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if expected_rate(mid, mu, var, lam) > target:
                lo = mid
            else:
                hi = mid
        ref = 0.5 * (lo + hi)
        got = calibrate_selfmask([mu], [[var]], [lam], target)[0]
        assert abs(got - ref) < 1e-9
        assert abs(got - 0.9539) < 1e-4

    def test_calibration_equation_satisfied(self, rng):
        mean = rng.standard_normal(5)
        cov = gen_covariance(5, rng)
        lam = rng.uniform(0.5, 3.0, size=5)
        mu0 = calibrate_selfmask(mean, cov, lam, 0.25)
        var = np.diag(cov)
        back = linalg.std_normal_cdf(lam * (mean - mu0) / np.sqrt(1 + lam**2 * var))
        np.testing.assert_allclose(back, 0.25, atol=1e-9)

    def test_monte_carlo_cross_check(self):
        mu, var, lam = 0.0, 1.0, 1.0
        mu0 = calibrate_selfmask([mu], [[var]], [lam], 0.25)[0]
        rng = np.random.default_rng(11)
        x = rng.standard_normal(10_000_000)
        rate = (rng.random(x.size) < linalg.std_normal_cdf(lam * (x - mu0))).mean()
        assert abs(rate - 0.25) < 0.002


class TestSelfmasking:
    def test_tiny_lambda_gives_half_at_fixed_threshold(self):
        # with mu0 held fixed the probit rule flattens to 1/2 as lambda -> 0
        from misslinear.simulate import SelfMaskingSpec, sample_selfmasking_given

        spec = SelfMaskingSpec(
            mean=np.zeros(2),
            cov=np.eye(2),
            lam=np.full(2, 1e-9),
            mu0=np.array([3.0, -2.0]),
            target_rate=0.25,
        )
        masked, _ = sample_selfmasking_given(spec, 100_000, derive_rng(0, "sm"))
        assert np.all(np.abs(masked.mask.mean(axis=0) - 0.5) < 0.01)

    def test_monotone_missingness(self):
        cfg = ScenarioConfig(kind="selfmasking", dim=2, seed=3)
        masked, complete = sample_selfmasking(cfg, 200_000, derive_rng(1, "sm"))
        for j in range(2):
            x = complete[:, j]
            hi = masked.mask[x > np.quantile(x, 0.9), j].mean()
            lo = masked.mask[x < np.quantile(x, 0.1), j].mean()
            assert hi > lo

    def test_calibrated_rate(self):
        cfg = ScenarioConfig(kind="selfmasking", dim=3, seed=8)
        masked, _ = sample_selfmasking(cfg, 1_000_000, derive_rng(2, "sm"))
        rates = masked.mask.mean(axis=0)
        assert np.all(np.abs(rates - 0.25) < 0.01)


class TestGenResponse:
    def test_zero_input(self):
        from misslinear.data import LinearDGP

        y = gen_response(np.zeros((3, 2)), LinearDGP(1.0, np.ones(2)), derive_rng(0))
        np.testing.assert_array_equal(y, [1.0, 1.0, 1.0])

    def test_hand_value(self):
        from misslinear.data import LinearDGP

        y = gen_response(np.array([[2.0, 3.0]]), LinearDGP(1.0, np.ones(2)), derive_rng(0))
        np.testing.assert_array_equal(y, [6.0])

    def test_noise_variance(self):
        from misslinear.data import LinearDGP

        x = derive_rng(1, "x").standard_normal((100_000, 2))
        dgp = LinearDGP(1.0, np.ones(2), noise_sigma=1.0)
        y = gen_response(x, dgp, derive_rng(2, "eps"))
        resid = y - (1.0 + x @ np.ones(2))
        assert abs(resid.var() - 1.0) < 0.02


class TestScenario:
    def test_determinism_bit_identical(self):
        cfg = ScenarioConfig(kind="mixture3", dim=4, seed=9)
        scenario = build_scenario(cfg)
        a = scenario.sample(500, derive_rng(cfg.seed, "data"))
        b = scenario.sample(500, derive_rng(cfg.seed, "data"))
        np.testing.assert_array_equal(a[0].values, b[0].values)
        np.testing.assert_array_equal(a[0].mask, b[0].mask)
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_array_equal(a[2], b[2])

    def test_zero_fill_invariant(self):
        for kind in ("mixture1", "mixture3", "selfmasking"):
            cfg = ScenarioConfig(kind=kind, dim=3, seed=1)
            masked, complete, _ = build_scenario(cfg).sample(1000, derive_rng(4, kind))
            assert np.all(masked.values[masked.mask] == 0.0)
            assert np.isfinite(complete).all()
            np.testing.assert_array_equal(
                masked.values[~masked.mask], complete[~masked.mask]
            )

    def test_generic_sampler_matches_mixture1(self):
        # distributional agreement between the coin-flip sampler and the
        # generic categorical-pattern sampler for a single component
        cfg = ScenarioConfig(kind="mixture1", dim=3, seed=6)
        scenario = build_scenario(cfg)
        n = 200_000
        m_a, c_a = sample_mixture1(cfg, n, derive_rng(0, "two-sample-a"))
        m_b, c_b = sample_pattern_mixture(scenario.model, n, derive_rng(1, "two-sample-b"))
        comp = scenario.model.components[0]
        sig = np.sqrt(np.diag(comp.cov))
        assert np.all(
            np.abs(c_a.mean(axis=0) - c_b.mean(axis=0)) < 6 * sig / np.sqrt(n)
        )
        cov_a = np.cov(c_a.T)
        cov_b = np.cov(c_b.T)
        assert np.abs(cov_a - cov_b).max() < 0.08
        freq_a = np.bincount(m_a.pattern_codes(), minlength=8) / n
        freq_b = np.bincount(m_b.pattern_codes(), minlength=8) / n
        assert np.abs(freq_a - freq_b).max() < 0.005

    def test_sidecar_roundtrip(self):
        for kind in ("mixture1", "mixture3", "selfmasking"):
            cfg = ScenarioConfig(kind=kind, dim=3, seed=2)
            scenario = build_scenario(cfg)
            back = scenario_from_dict(scenario_to_dict(scenario))
            a = scenario.sample(200, derive_rng(0, "rt"))
            b = back.sample(200, derive_rng(0, "rt"))
            np.testing.assert_array_equal(a[0].values, b[0].values)
            np.testing.assert_array_equal(a[2], b[2])
            assert back.supports_bayes == scenario.supports_bayes

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ScenarioConfig(kind="nope", dim=3)
        with pytest.raises(ValueError):
            ScenarioConfig(kind="mixture1", dim=3, beta=np.ones(2))
        with pytest.raises(ValueError):
            ScenarioConfig(kind="selfmasking", dim=2, selfmask_lambda=-1.0)
        with pytest.raises(ValueError):
            ScenarioConfig(kind="mixture1", dim=2, target_missing_rate=1.5)
