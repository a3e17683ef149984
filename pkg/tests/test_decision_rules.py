import math

import numpy as np
import pytest
from scipy import stats

from bayestrial import decision_rules as dr
from bayestrial.stats_dist import BetaParams, GammaParams, RngStream, beta_binomial_pmf, beta_cdf
from bayestrial.trial_model import (
    BinaryDataset,
    Direction,
    Hypothesis,
    SurvivalDataset,
    recurrence_hazard,
)

LESS12 = Hypothesis(0.12, Direction.LESS)
PAPER_P = (0.006, 0.013, 0.008, 0.0255)


class TestPosteriorProb:
    def test_uniform_posterior(self):
        out = dr.posterior_prob_test(dr.PosteriorProbRule(LESS12, 0.975), BetaParams(1, 1))
        assert out.statistic == pytest.approx(0.12, abs=1e-14) and not out.reject

    def test_zero_events_rejects_closed_form(self):
        out = dr.posterior_prob_test(dr.PosteriorProbRule(LESS12, 0.975), BetaParams(1, 151))
        assert out.statistic == pytest.approx(1 - 0.88**151, abs=1e-13)
        assert out.reject

    def test_greater_direction_is_complement(self):
        post = BetaParams(20, 30)
        up = dr.posterior_prob_statistic(Hypothesis(0.35, "GREATER"), post.alpha, post.beta)
        assert up == pytest.approx(1 - beta_cdf(0.35, post), abs=1e-14)

    def test_region_is_lower_set(self):
        rule = dr.PosteriorProbRule(LESS12, 0.975)
        rej = [dr.posterior_prob_test(rule, BetaParams(1 + x, 1 + 150 - x)).reject for x in range(151)]
        x_crit = max(x for x in range(151) if rej[x])
        assert rej == [x <= x_crit for x in range(151)]

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            dr.PosteriorProbRule(LESS12, 1.2)


class TestZTest:
    def test_at_null_value(self):
        out = dr.z_test(BinaryDataset(100, 12), LESS12)
        assert out.statistic == pytest.approx(0.0, abs=1e-12)
        assert out.pvalue == pytest.approx(0.5) and not out.reject

    @staticmethod
    def _enumerated(n, theta):
        x = np.arange(n + 1)
        rej = dr.z_test_reject_counts(x, n, LESS12, 0.025)
        return float(stats.binom.pmf(x[rej], n, theta).sum())

    def test_type_one_error_by_enumeration(self):
        assert self._enumerated(150, 0.12) == pytest.approx(0.0242, abs=0.005)

    def test_power_by_enumeration(self):
        assert self._enumerated(200, 0.05) == pytest.approx(0.9231, abs=0.005)

    def test_vector_matches_scalar(self):
        rej = dr.z_test_reject_counts(np.arange(151), 150, LESS12, 0.025)
        assert list(rej) == [dr.z_test(BinaryDataset(150, x), LESS12).reject for x in range(151)]

    def test_empty_data(self):
        with pytest.raises(ValueError):
            dr.z_test(BinaryDataset(0, 0), LESS12)


class TestExactBinomial:
    def test_zero_successes(self):
        assert dr.exact_binomial_pvalue(BinaryDataset(10, 0), Hypothesis(0.5)) == 1.0

    def test_all_successes(self):
        assert dr.exact_binomial_pvalue(BinaryDataset(10, 10), Hypothesis(0.5)) == pytest.approx(2.0**-10, rel=1e-12)

    def test_monotone_in_count(self):
        p = dr.binomial_tail_pvalue(np.arange(86), 85, Hypothesis(0.35))
        assert np.all(np.diff(p) <= 0)

    def test_matches_scipy(self):
        h = Hypothesis(0.35)
        for x in (0, 10, 30, 50, 85):
            ref = stats.binomtest(x, 85, 0.35, alternative="greater").pvalue
            assert dr.binomial_tail_pvalue(x, 85, h) == pytest.approx(ref, rel=1e-10)
        low = Hypothesis(0.35, Direction.LESS)
        for x in (0, 10, 30, 85):
            ref = stats.binomtest(x, 85, 0.35, alternative="less").pvalue
            assert dr.binomial_tail_pvalue(x, 85, low) == pytest.approx(ref, rel=1e-10)

    def test_array_sizes(self):
        p = dr.binomial_tail_pvalue(np.array([5, 5]), np.array([10, 20]), Hypothesis(0.35))
        assert p[0] < p[1]

    def test_bad_n(self):
        with pytest.raises(ValueError):
            dr.binomial_tail_pvalue(0, 0, Hypothesis(0.35))


class TestGreenwood:
    def test_no_events_rejects(self):
        data = SurvivalDataset(np.full(100, 52.0), np.zeros(100, bool))
        s, var = dr.kaplan_meier(data, 52.0)
        assert s == 1.0 and var == 0.0
        out = dr.greenwood_test(data)
        assert out.statistic == 1.0 and out.reject

    def test_all_events_accepts(self):
        data = SurvivalDataset(np.linspace(1, 50, 100), np.ones(100, bool))
        out = dr.greenwood_test(data)
        assert out.statistic == 0.0 and not out.reject

    def test_km_hand_example(self):
        data = SurvivalDataset.from_records([(2, True), (3, False), (5, True), (5, True), (8, False), (9, True)])
        s, var = dr.kaplan_meier(data, 6.0)
        # risk sets 6 at t=2, 4 at t=5 with 2 events
        s_ref = (5 / 6) * (2 / 4)
        g_ref = 1 / (6 * 5) + 2 / (4 * 2)
        assert s == pytest.approx(s_ref) and var == pytest.approx(s_ref**2 * g_ref)

    def test_ties_events_before_censoring(self):
        data = SurvivalDataset.from_records([(4, True), (4, False), (6, True)])
        s, _ = dr.kaplan_meier(data, 5.0)
        assert s == pytest.approx(2 / 3)

    def test_adding_event_never_raises_survival(self):
        g = np.random.default_rng(3)
        for _ in range(50):
            t = g.uniform(1, 52, 30)
            e = g.random(30) < 0.5
            s0, _ = dr.kaplan_meier(SurvivalDataset(t, e), 52.0)
            i = int(np.flatnonzero(~e)[0]) if (~e).any() else None
            if i is None:
                continue
            e2 = e.copy()
            e2[i] = True
            s1, _ = dr.kaplan_meier(SurvivalDataset(t, e2), 52.0)
            assert s1 <= s0 + 1e-15

    def test_loglog_bound_inside_unit_interval(self):
        g = np.random.default_rng(1)
        t = g.uniform(1, 52, (200, 40))
        e = g.random((200, 40)) < 0.4
        s, gw = dr.km_greenwood_batch(t, e, 52.0)
        lb = dr.greenwood_lower_bound(s, gw, transform="loglog")
        assert np.all((lb >= 0) & (lb <= s))

    def test_linear_bound_formula(self):
        assert dr.greenwood_lower_bound(0.6, 0.01) == pytest.approx(0.6 - 1.96 * 0.6 * 0.1)

    def test_unknown_transform(self):
        with pytest.raises(ValueError):
            dr.GreenwoodRule(transform="arcsine")


class TestPredictive:
    def test_no_future_beta(self):
        final = dr.PosteriorProbRule(LESS12, 0.975)
        for post, expected in ((BetaParams(1, 151), 1.0), (BetaParams(5, 20), 0.0)):
            rule = dr.PredictiveProbRule(0.05, final, future_n=0)
            assert dr.predictive_prob(rule, post, RngStream(1)) == expected

    def test_beta_binomial_oracle(self):
        final = dr.PosteriorProbRule(LESS12, 0.975)
        x1, n1, n2 = 3, 50, 100
        post = BetaParams(1 + x1, 1 + n1 - x1)
        rule = dr.PredictiveProbRule(0.05, final, future_n=n2, draws=20000)
        est = dr.predictive_prob(rule, post, RngStream(11))
        xs = np.arange(n2 + 1)
        stat = dr.posterior_prob_statistic(LESS12, post.alpha + xs, post.beta + n2 - xs)
        exact = float(np.sum(beta_binomial_pmf(xs, n2, post)[stat > 0.975]))
        se = math.sqrt(exact * (1 - exact) / rule.draws)
        assert abs(est - exact) < 3 * se

    def test_no_future_survival_equals_final_indicator(self):
        layout = recurrence_hazard(1.0)
        final = dr.GreenwoodRule(transform="loglog")
        data = SurvivalDataset(np.linspace(1, 52, 30), np.arange(30) % 3 == 0)
        rule = dr.PredictiveProbRule(0.05, final, future_n=0, layout=layout)
        direct = float(dr.greenwood_test(data, transform="loglog").reject)
        assert dr.predictive_prob(rule, [GammaParams(1, 1)] * 3, RngStream(0), data) == direct

    def test_vanishing_hazards_give_near_one(self):
        layout = recurrence_hazard(1.0)
        data = SurvivalDataset(np.full(30, 52.0), np.zeros(30, bool))
        posts = [GammaParams(0.1, 1e6)] * 3
        rule = dr.PredictiveProbRule(0.05, dr.GreenwoodRule(), future_n=70, draws=500, layout=layout)
        assert dr.predictive_prob(rule, posts, RngStream(2), data) > 0.99

    def test_in_unit_interval_and_deterministic(self):
        layout = recurrence_hazard(1.0)
        data = SurvivalDataset(np.linspace(2, 52, 30), np.arange(30) % 2 == 0)
        posts = [GammaParams(2, 20), GammaParams(3, 60), GammaParams(1, 100)]
        rule = dr.PredictiveProbRule(0.05, dr.GreenwoodRule(), future_n=70, layout=layout)
        a = dr.predictive_prob(rule, posts, RngStream(5), data)
        assert 0 <= a <= 1
        assert a == dr.predictive_prob(rule, posts, RngStream(5), data)

    def test_type_mismatch(self):
        rule = dr.PredictiveProbRule(0.05, dr.GreenwoodRule(), future_n=10)
        with pytest.raises(TypeError):
            dr.predictive_prob(rule, BetaParams(1, 1), RngStream(0))

    def test_validation(self):
        with pytest.raises(ValueError):
            dr.PredictiveProbRule(1.5, dr.GreenwoodRule(), future_n=10)
        with pytest.raises(ValueError):
            dr.PredictiveProbRule(0.1, dr.GreenwoodRule(), future_n=-1)


class TestMultiplicity:
    def test_worked_example(self):
        p = dr.PValueVector(PAPER_P)
        assert dr.rejected_endpoints(dr.bonferroni(p)) == {1}
        assert dr.rejected_endpoints(dr.holm(p)) == {1, 3}
        assert dr.rejected_endpoints(dr.hochberg(p)) == {1, 3}

    def test_all_ones(self):
        for proc in (dr.bonferroni, dr.holm, dr.hochberg):
            assert not proc([1.0, 1.0, 1.0]).any()

    @pytest.mark.parametrize("p", [0.01, 0.025, 0.03])
    def test_single_endpoint(self, p):
        for proc in (dr.bonferroni, dr.holm, dr.hochberg):
            assert bool(proc([p])[0]) == (p < 0.025)

    def test_holm_hand_trace(self):
        assert dr.rejected_endpoints(dr.holm([0.001, 0.9])) == {1}

    def test_hochberg_step_up(self):
        assert dr.rejected_endpoints(dr.hochberg([0.02, 0.024])) == {1, 2}
        assert dr.rejected_endpoints(dr.holm([0.02, 0.024])) == set()

    def test_row_wise(self):
        p = np.array([PAPER_P, (0.02, 0.024, 0.5, 0.5)])
        h = dr.hochberg(p)
        assert list(h[0]) == list(dr.hochberg(PAPER_P))
        assert list(h[1]) == list(dr.hochberg(p[1]))

    def test_pvalue_vector_validation(self):
        with pytest.raises(ValueError):
            dr.PValueVector((0.2, 1.2))
        with pytest.raises(ValueError):
            dr.bonferroni([])
