import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debiasing.errors import (
    AlphaAboveOneWarning,
    AlphaExceedsBeta,
    DegenerateInput,
    InvalidRatio,
    LengthMismatch,
    NoFiniteMinimum,
    NonIntegralLevels,
    NonPositiveAlpha,
)
from debiasing.schedule import (
    ConvergenceFit,
    CostModel,
    TruncationDistribution,
    build_geometric_schedule,
    build_truncation_geometric,
    capped_ladder,
    expected_cost_from_sizes,
    expected_likelihood_evals,
    fit_beta,
    geometric_tail_closed_form,
    largest_admissible_n,
    literal_alpha_objective,
    sample_truncation,
    second_moment_bound,
    tradeoff_curve,
    tune_alpha,
)

alphas = st.floats(min_value=0.01, max_value=1.0)
levels = st.integers(min_value=1, max_value=30)


class TestBatchSchedule:
    def test_log_gaussian_ladder(self):
        s = build_geometric_schedule(8, 2, 2**26)
        assert s.L == 24
        assert s.sizes[0] == 8 and s.sizes[-1] == 2**26
        assert all(b == 2 * a for a, b in zip(s.sizes, s.sizes[1:]))

    def test_single_level(self):
        s = build_geometric_schedule(5, 2, 5)
        assert s.L == 1 and s.sizes == (5,) and s.N == 5

    def test_ratio_three(self):
        assert build_geometric_schedule(3, 3, 81).sizes == (3, 9, 27, 81)

    def test_non_power_rejected(self):
        with pytest.raises(NonIntegralLevels, match="largest admissible N is 8192"):
            build_geometric_schedule(128, 2, 10000)

    def test_bad_ratio(self):
        with pytest.raises(InvalidRatio):
            build_geometric_schedule(2, 1, 8)

    def test_cumulative(self):
        s = build_geometric_schedule(1, 2, 4)
        assert s.cumulative_sizes.tolist() == [1, 3, 7]

    def test_largest_admissible(self):
        assert largest_admissible_n(128, 2, 10000) == 8192
        assert largest_admissible_n(100, 10, 10**5) == 10**5

    def test_capped_ladder(self):
        assert capped_ladder(128, 2, 10000) == (128, 256, 512, 1024, 2048, 4096, 8192, 10000)
        assert capped_ladder(8, 2, 64) == (8, 16, 32, 64)

    @given(a=st.integers(1, 50), ratio=st.integers(2, 5), k=st.integers(0, 8))
    def test_invariants(self, a, ratio, k):
        s = build_geometric_schedule(a, ratio, a * ratio**k)
        assert s.L == k + 1
        assert s.sizes == tuple(a * ratio**t for t in range(s.L))


class TestTruncation:
    def test_alpha_one_three_levels(self):
        d = build_truncation_geometric(1.0, 3)
        np.testing.assert_allclose(d.probs, [4 / 7, 2 / 7, 1 / 7], rtol=0, atol=1e-15)
        np.testing.assert_allclose(d.tails, [1, 3 / 7, 1 / 7], rtol=0, atol=1e-15)

    def test_point_mass(self):
        d = build_truncation_geometric(1.0, 1)
        assert d.probs.tolist() == [1.0] and d.tails.tolist() == [1.0]

    def test_reference_alpha(self):
        L = build_geometric_schedule(128, 2, 8192).L
        d = build_truncation_geometric(0.87, L)
        assert abs(d.probs.sum() - 1) < 1e-12 and np.all(d.probs > 0)

    def test_non_positive(self):
        with pytest.raises(NonPositiveAlpha):
            build_truncation_geometric(0.0, 3)

    def test_alpha_above_one_warns(self):
        with pytest.warns(AlphaAboveOneWarning):
            build_truncation_geometric(1.5, 4)

    def test_from_probs(self):
        d = TruncationDistribution.from_probs([2, 1, 1])
        np.testing.assert_allclose(d.probs, [0.5, 0.25, 0.25])
        np.testing.assert_allclose(d.tails, [1, 0.5, 0.25])
        assert d.alpha is None

    @given(alpha=alphas, L=levels)
    def test_closed_form_tails(self, alpha, L):
        d = build_truncation_geometric(alpha, L)
        assert abs(d.probs.sum() - 1) < 1e-12
        assert d.tails[0] == 1.0
        assert np.all(np.diff(d.tails) <= 0)
        np.testing.assert_allclose(d.tails, geometric_tail_closed_form(alpha, L), rtol=0, atol=1e-12)


class TestSampleTruncation:
    def test_point_mass(self):
        d = build_truncation_geometric(1.0, 1)
        rng = np.random.default_rng(0)
        assert {sample_truncation(d, rng) for _ in range(100)} == {1}

    def test_frequencies(self):
        d = build_truncation_geometric(1.0, 3)
        rng = np.random.default_rng(3)
        n = 10**6
        draws = np.array([sample_truncation(d, rng) for _ in range(n)])
        for t, p in enumerate(d.probs, start=1):
            freq = np.mean(draws == t)
            assert abs(freq - p) < 3 * np.sqrt(p * (1 - p) / n)

    def test_determinism(self):
        d = build_truncation_geometric(0.6, 8)
        a = [sample_truncation(d, np.random.default_rng(11)) for _ in range(5)]
        b = [sample_truncation(d, np.random.default_rng(11)) for _ in range(5)]
        assert a == b


class TestExpectedCost:
    def test_hand_value(self):
        s = build_geometric_schedule(1, 2, 4)
        d = build_truncation_geometric(1.0, 3)
        assert expected_likelihood_evals(s, d) == pytest.approx(17 / 7, abs=1e-14)

    def test_single_level(self):
        s = build_geometric_schedule(7, 2, 7)
        assert expected_likelihood_evals(s, build_truncation_geometric(0.5, 1)) == 7

    def test_ratio_two_identity(self):
        s = build_geometric_schedule(3, 2, 3 * 2**6)
        d = build_truncation_geometric(0.7, s.L)
        t = np.arange(1, s.L + 1)
        expected = 5 * 3 * np.sum(d.probs * (2.0**t - 1))
        assert expected_likelihood_evals(s, d, CostModel(M=5)) == pytest.approx(expected, rel=1e-13)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            expected_cost_from_sizes([1, 2], build_truncation_geometric(1.0, 3), CostModel())

    def test_cost_model_validation(self):
        with pytest.raises(ValueError):
            CostModel(M=0)

    def test_sublinear_slope(self):
        Ns = [2**k for k in range(10, 21)]
        costs = []
        for N in Ns:
            s = build_geometric_schedule(128, 2, N)
            costs.append(expected_likelihood_evals(s, build_truncation_geometric(0.5, s.L)))
        slope = np.polyfit(np.log(Ns), np.log(costs), 1)[0]
        assert abs(slope - 0.5) < 0.05


class TestSecondMomentBound:
    def test_large_l_limit(self):
        fit = ConvergenceFit(1.0, 1.0, 0.0)
        value = second_moment_bound(fit, 0.5, 1, 200).value
        assert value == pytest.approx(2 / (1 - 2**-0.5), rel=1e-6)

    def test_single_level(self):
        fit = ConvergenceFit(3.0, 0.8, 0.0)
        assert second_moment_bound(fit, 0.4, 16, 1).value == pytest.approx(3.0 * 2**0.8 / 16**0.8)

    def test_matches_textbook_sum(self):
        c, b, al, a, L = 2.0, 1.1, 0.6, 8, 9
        t = np.arange(1, L + 1)
        ref = c * 2**b * (1 - 2 ** (-al * L)) / a**b * np.sum(1 / (2 ** ((b - al) * (t - 1)) - 2 ** (b * (t - 1) - al * L)))
        assert second_moment_bound(ConvergenceFit(c, b, 0), al, a, L).value == pytest.approx(ref, rel=1e-12)

    def test_diverging_flag(self):
        with pytest.warns(AlphaExceedsBeta):
            res = second_moment_bound(ConvergenceFit(1.0, 0.5, 0.0), 0.7, 1, 4)
        assert res.diverging and np.isfinite(res.value)

    @given(alpha=st.floats(0.02, 0.9), L=st.integers(2, 20))
    def test_monotone_in_alpha(self, alpha, L):
        fit = ConvergenceFit(1.0, 1.0, 0.0)
        lo = second_moment_bound(fit, alpha, 4, L).value
        hi = second_moment_bound(fit, alpha + 0.05, 4, L).value
        assert hi >= lo


class TestTuneAlpha:
    fit = ConvergenceFit(1.0, 1.0, 0.0)

    def test_grid_brackets(self):
        alpha, product = tune_alpha(128, 2, 10000, self.fit)
        grid = np.round(np.arange(0.05, 0.96, 0.05), 2)
        curve = tradeoff_curve(128, 2, 10000, self.fit, alphas=grid)
        i = int(np.argmin(curve.product))
        assert grid[max(i - 1, 0)] <= alpha <= grid[min(i + 1, len(grid) - 1)]
        assert product <= curve.product.min() * (1 + 1e-9)

    def test_doubling_m(self):
        a1, p1 = tune_alpha(128, 2, 10000, self.fit, CostModel(M=1))
        a2, p2 = tune_alpha(128, 2, 10000, self.fit, CostModel(M=2))
        assert a1 == pytest.approx(a2, abs=1e-12)
        assert p2 == pytest.approx(2 * p1, rel=1e-12)

    def test_scale_invariance_in_c(self):
        a1, _ = tune_alpha(64, 2, 2**14, ConvergenceFit(1.0, 0.9, 0.0))
        a2, _ = tune_alpha(64, 2, 2**14, ConvergenceFit(37.0, 0.9, 0.0))
        assert a1 == pytest.approx(a2, abs=1e-12)

    def test_no_finite_minimum(self):
        with pytest.raises(NoFiniteMinimum):
            tune_alpha(128, 2, 10000, ConvergenceFit(1.0, 0.02, 0.0))

    def test_tradeoff_monotone(self):
        curve = tradeoff_curve(128, 2, 10000, self.fit)
        assert np.all(np.diff(curve.work) < 0)
        assert np.all(np.diff(curve.variance) > 0)

    def test_literal_mode_runs(self):
        alpha, _ = tune_alpha(128, 2, 10000, self.fit, literal=True)
        assert 0.01 <= alpha <= 0.99
        assert literal_alpha_objective(0.5, 1.0, 128, 10000) > 0

    def test_beta_one_alpha_window(self):
        alpha, _ = tune_alpha(128, 2, 10000, self.fit)
        assert 0.82 <= alpha <= 0.92


class TestFitBeta:
    def test_noiseless(self):
        n = np.array([8, 16, 32, 64, 128])
        f = fit_beta(n, 4 / n)
        assert f.c == pytest.approx(4, rel=1e-12)
        assert f.beta == pytest.approx(1, abs=1e-12)
        assert f.residual < 1e-20 and not f.degenerate

    def test_constant_is_degenerate(self):
        f = fit_beta([1, 2, 4], [3, 3, 3])
        assert f.degenerate and f.beta == 0

    def test_too_few_points(self):
        with pytest.raises(DegenerateInput):
            fit_beta([1, 2], [1, 0.5])

    def test_non_positive(self):
        with pytest.raises(DegenerateInput):
            fit_beta([1, 2, 4], [1, 0, 0.25])

    def test_perturbation(self):
        n = np.array([8, 16, 32, 64, 128, 256], dtype=float)
        d = 2 / n
        base = fit_beta(n, d).beta
        for i in range(len(n)):
            dd = d.copy()
            dd[i] *= 1.01
            assert abs(fit_beta(n, dd).beta - base) < 0.02

    @settings(max_examples=50)
    @given(c=st.floats(0.01, 100), beta=st.floats(0.05, 3))
    def test_recovery(self, c, beta):
        n = 2.0 ** np.arange(3, 10)
        f = fit_beta(n, c * n**-beta)
        assert f.beta == pytest.approx(beta, abs=1e-9)
        assert f.c == pytest.approx(c, rel=1e-8)


def test_gaussian_mean_beta_near_one():
    # data centred on the prior mean, so only the 1/n variance term remains
    from debiasing.experiments import run_pilot
    from debiasing.models import GaussianMeanModel, generate_synthetic

    ds = generate_synthetic("gaussian_mean", {"mu": [0.0, 0.0]}, 10000, 1)
    model = GaussianMeanModel(ds.data, np.eye(2))
    fit = run_pilot(model, [8, 16, 32, 64, 128, 256], repeats=300, seed=0, reference="full").fit
    assert abs(fit.beta - 1) <= 0.15
