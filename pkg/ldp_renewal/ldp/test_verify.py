import math

import numpy as np
import pytest
from scipy.stats import gamma

from .common import INF
from .mc import RateCurveEntry
from .model import make_law, sample_pairs
from .parameters import SimulationParameters
from .report import BoundReport, TheoremPart, Verdict
from .sets import SetDescriptor
from .verify import (ELL_S_FINITE, HYPOTHESIS_FREE, SUBLINEAR_REWARD, check_convex, check_lower_bound, check_prop2,
                     check_supermultiplicativity, check_tails, check_upper_bound, clt_window, counterexample_closed,
                     counterexample_open, decay_exponent, estimate_tail_exponents, exact_mu_n, expected_verdicts,
                     gaussian_tail_moments, hypothesis_for_convex_sets, lower_bound_verdict, upper_bound_verdict)

def entry(t=100.0, rate_lo=0.3, rate_hi=0.4, hits=10, p_hat=None):
    p = math.exp(-t * (rate_lo + rate_hi) / 2) if p_hat is None else p_hat
    return RateCurveEntry(t, p, p / 2, p * 2, (rate_lo + rate_hi) / 2 if hits else None, rate_lo, rate_hi, hits,
                          1000)

@pytest.fixture(scope="module")
def exp_unit():
    return make_law("exp_unit", rate=1.0)

class TestVerdicts:
    def test_lower_bound(self):
        verdict, slack = lower_bound_verdict([entry(rate_lo=0.5, rate_hi=0.6)], 0.3, 0.05)
        assert slack == pytest.approx(0.15)
        assert verdict == Verdict.violated
        assert lower_bound_verdict([entry(rate_lo=0.4, rate_hi=0.5)], 0.3, 0.05)[0] == Verdict.consistent

    def test_lower_bound_without_hits(self):
        curve = [entry(hits=0, rate_lo=0.9, rate_hi=INF)] * 2
        assert lower_bound_verdict(curve, 0.3, 0.05)[0] == Verdict.inconclusive

    def test_lower_bound_infinite_infimum(self):
        assert lower_bound_verdict([entry(rate_lo=5.0, rate_hi=6.0)], INF, 0.05)[0] == Verdict.consistent

    def test_upper_bound(self):
        assert upper_bound_verdict([entry(rate_lo=0.05, rate_hi=0.1)], 0.3, 0.05)[0] == Verdict.violated
        assert upper_bound_verdict([entry(rate_lo=0.15, rate_hi=0.2)], 0.3, 0.05)[0] == Verdict.consistent
        assert upper_bound_verdict([entry(rate_lo=0.0, rate_hi=0.01)], INF, 0.05)[0] == Verdict.violated

    def test_only_the_largest_time_decides(self):
        curve = [entry(t=10.0, rate_lo=0.0, rate_hi=0.01), entry(t=100.0, rate_lo=0.3, rate_hi=0.35)]
        assert upper_bound_verdict(curve, 0.3, 0.05)[0] == Verdict.consistent

def test_gaussian_tail_moments():
    mu, var = gaussian_tail_moments()
    assert mu == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-10)
    assert var == pytest.approx(1 - math.pi / 4, rel=1e-10)

def test_decay_exponent():
    curve = [entry(t=t, p_hat=math.exp(-0.2 * t - 1.0)) for t in (10.0, 20.0, 40.0)]
    assert decay_exponent(curve) == pytest.approx(0.2)
    assert decay_exponent([entry(hits=0)]) is None

class TestTails:
    def test_exponential(self, exp_unit):
        estimate = estimate_tail_exponents(exp_unit, [2.0 ** k for k in range(0, 7)])
        assert estimate.ell_i == pytest.approx(1.0, abs=0.05)
        assert estimate.ell_s == pytest.approx(1.0, abs=0.05)
        assert not estimate.truncated

    def test_gaussian_tail_diverges(self):
        estimate = estimate_tail_exponents(make_law("gauss_tail_cauchy"), [2.0 ** k for k in range(0, 8)])
        assert estimate.diverging
        assert estimate.ell_i == INF

    def test_oscillating_on_dyadic_grid(self):
        law = make_law("oscillating_tail", ell_s=1.0, ell_i=2.0)
        estimate = estimate_tail_exponents(law, [2.0 ** k for k in range(1, 11)])
        assert estimate.ell_i == pytest.approx(2.0, abs=0.15)
        assert estimate.ell_s == pytest.approx(1.0, abs=0.15)
        assert check_tails(law, [2.0 ** k for k in range(1, 11)]).verdict == Verdict.consistent

    def test_samples(self, exp_unit):
        s, _ = sample_pairs(exp_unit, np.random.default_rng(0), 200_000)
        estimate = estimate_tail_exponents(s, [1.0, 2.0, 4.0, 6.0, 8.0])
        assert estimate.ell_i == pytest.approx(1.0, abs=0.15)
        assert estimate.ell_s == pytest.approx(1.0, abs=0.15)

    def test_samples_run_out(self):
        estimate = estimate_tail_exponents(np.array([0.5, 1.0, 1.5, 2.0]), [0.25, 1.0, 4.0, 8.0])
        assert estimate.truncated
        assert len(estimate.values) == 2

    @pytest.mark.parametrize("grid", [[1.0], [2.0, 1.0], [0.0, 1.0]])
    def test_invalid_grid(self, exp_unit, grid):
        with pytest.raises(ValueError):
            estimate_tail_exponents(exp_unit, grid)

class TestHypotheses:
    def test_finite_upper_tail(self, exp_unit):
        assert hypothesis_for_convex_sets(exp_unit) == ELL_S_FINITE

    def test_gaussian_tail_is_hypothesis_free(self):
        assert hypothesis_for_convex_sets(make_law("gauss_tail_cauchy")) == HYPOTHESIS_FREE

class TestBoundChecks:
    sim = SimulationParameters(n_runs=5000, chunk_runs=2500)

    def test_lower_bound(self, exp_unit):
        G = SetDescriptor.open_ball([1.5], 0.3)
        report = check_lower_bound(exp_unit, G, [20.0, 40.0], 5000, seed=1, sim=self.sim)
        assert report.theorem_part == TheoremPart.b
        assert report.theoretical_inf == pytest.approx(1 - 1.2 + 1.2 * math.log(1.2), abs=1e-6)
        assert report.verdict == Verdict.consistent
        assert report.verdict in expected_verdicts(report)

    def test_lower_bound_needs_open_set(self, exp_unit):
        with pytest.raises(ValueError):
            check_lower_bound(exp_unit, SetDescriptor.closed_ball([1.5], 0.3), [20.0], 5000, seed=1)

    def test_compact_upper_bound(self, exp_unit):
        report = check_upper_bound(exp_unit, SetDescriptor.closed_ball([1.5], 0.3), [20.0, 40.0], 5000, seed=1,
                                   sim=self.sim)
        assert report.theorem_part == TheoremPart.c
        assert report.verdict == Verdict.consistent

    def test_unbounded_set_is_checked_as_convex(self, exp_unit):
        half = SetDescriptor.half_space([-1.0], -1.2, closed=True)
        report = check_upper_bound(exp_unit, half, [20.0, 40.0], 5000, seed=1, sim=self.sim)
        assert report.theorem_part == TheoremPart.d
        assert report.hypothesis == ELL_S_FINITE
        assert report.verdict == Verdict.consistent

    def test_convex_rejects_box_products(self, exp_unit):
        with pytest.raises(ValueError):
            check_convex(exp_unit, SetDescriptor.box_product(0, 1, SetDescriptor.open_ball([1.0], 1.0)), [1.0],
                         5000, seed=1)

class TestCounterexamples:
    def test_open_half_space(self):
        report = counterexample_open(t_grid=(10, 20), n_runs=1000, seed=3)
        assert report.theorem_part == TheoremPart.counterexample_open
        assert report.theoretical_inf == INF
        assert report.hypothesis == HYPOTHESIS_FREE
        assert report.details["misses"] == 0
        assert report.verdict == Verdict.violated
        assert expected_verdicts(report) == {Verdict.violated}

    def test_closed_hyperbolic_set(self):
        report = counterexample_closed(eps=0.1, N_grid=(50, 100, 200), n_runs=5000, seed=3)
        assert report.theoretical_inf == INF
        assert report.details["bound"] == pytest.approx(0.1 * (1 - math.pi / 4) / (math.sqrt(math.pi) / 2))
        assert report.verdict in expected_verdicts(report)

    def test_eps_range(self):
        with pytest.raises(ValueError):
            counterexample_closed(eps=1.5)

    @pytest.mark.slow
    def test_clt_window(self):
        window = clt_window(make_law("gauss_tail_cauchy"), 400, 0.1, 100_000, seed=0)
        assert window.p_gauss == pytest.approx(0.0843, abs=1e-3)
        assert window.agrees

class TestSupermultiplicativity:
    C = SetDescriptor.box_product(0.8, 1.2, SetDescriptor.closed_ball([1.0], 0.01))

    def test_exact(self, exp_unit):
        assert exact_mu_n(exp_unit, 5, self.C) == pytest.approx(gamma.cdf(6.0, 5) - gamma.cdf(4.0, 5))
        assert exact_mu_n(make_law("reward_of_wait"), 5, self.C) is None

    def test_exp_unit(self, exp_unit):
        report = check_supermultiplicativity(exp_unit, self.C, [(5, 5), (2, 3)], 20_000, seed=7)
        assert report.verdict == Verdict.consistent
        assert [e.t for e in report.empirical_curve] == [2.0, 3.0, 5.0, 10.0]
        row = report.details["pairs"][0]
        assert (row["m"], row["n"]) == (5, 5)
        assert len(row["exact"]) == 3
        assert row["exact"][2] >= row["exact"][0] * row["exact"][1]

    def test_single_pairs(self, exp_unit):
        report = check_supermultiplicativity(exp_unit, self.C, [(1, 1)], 20_000, seed=7)
        assert report.verdict == Verdict.consistent
        row = report.details["pairs"][0]
        assert row["exact"][0] == pytest.approx(math.exp(-0.8) - math.exp(-1.2))
        assert row["exact"][2] >= row["exact"][0] * row["exact"][1]

    def test_needs_box_product(self, exp_unit):
        with pytest.raises(ValueError):
            check_supermultiplicativity(exp_unit, SetDescriptor.closed_ball([1.0], 0.1), [(1, 1)], 1000, seed=0)

class TestSublinearRewards:
    @pytest.mark.slow
    def test_sqrt_reward(self):
        law = make_law("reward_of_wait", function="sqrt")
        report = check_prop2(law, [[w] for w in np.linspace(0.3, 1.5, 12)])
        assert report.hypothesis == SUBLINEAR_REWARD
        assert report.verdict == Verdict.consistent

    def test_bounded_reward(self):
        # unit rewards are dominated by any sublinear f
        law = make_law("oscillating_tail", ell_s=1.0, ell_i=2.0)
        report = check_prop2(law, [[w] for w in np.linspace(0.05, 2.5, 25)])
        assert report.verdict == Verdict.consistent
        assert len(report.details["deviations"]) == 25

    def test_linear_reward_separates(self):
        law = make_law("oscillating_tail", ell_s=1.0, ell_i=2.0, reward="wait")
        report = check_prop2(law, [[0.5], [1.0]])
        assert report.verdict == Verdict.violated
        assert report.details["deviations"][0] == "+inf"

def make_report(part, verdict=Verdict.consistent, theoretical=0.3, hits=10, hypothesis=None):
    return BoundReport(part, None, theoretical, [entry(hits=hits)], verdict, 0.05, {}, hypothesis=hypothesis)

class TestExpectedVerdicts:
    def test_open_counterexample_must_fail(self):
        assert expected_verdicts(make_report(TheoremPart.counterexample_open)) == {Verdict.violated}

    def test_closed_counterexample(self):
        assert Verdict.inconclusive in expected_verdicts(make_report(TheoremPart.counterexample_closed))
        assert Verdict.consistent not in expected_verdicts(make_report(TheoremPart.counterexample_closed))

    def test_unreachable_lower_bound(self):
        assert Verdict.inconclusive in expected_verdicts(make_report(TheoremPart.b, hits=0))
        assert Verdict.inconclusive in expected_verdicts(make_report(TheoremPart.b, theoretical=INF))
        assert expected_verdicts(make_report(TheoremPart.b)) == {Verdict.consistent}

    def test_hypothesis_free_convex(self):
        assert len(expected_verdicts(make_report(TheoremPart.d, hypothesis=HYPOTHESIS_FREE))) == 3
        assert expected_verdicts(make_report(TheoremPart.d, hypothesis=ELL_S_FINITE)) == {Verdict.consistent}
