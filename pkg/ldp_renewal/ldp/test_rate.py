import math

import numpy as np
import pytest

from .common import INF
from .model import make_law
from .rate import (ENVELOPE_LABEL, covering_inf, cramer_j, level_set_bounded, perspective_min, rate_grid, rate_i,
                   rate_inf_over_set, upsilon, upsilon_points)
from .sets import SetDescriptor

def poisson_rate(w):
    return 1 - w + w * math.log(w) if w > 0 else 1.0

@pytest.fixture(scope="module")
def exp_unit():
    return make_law("exp_unit", rate=1.0)

class TestCramer:
    def test_zero_at_mean(self, exp_unit):
        assert cramer_j(exp_unit, 1.0, [1.0]).value == pytest.approx(0.0, abs=1e-10)

    def test_closed_form(self, exp_unit):
        assert cramer_j(exp_unit, 2.0, [1.0]).value == pytest.approx(1 - math.log(2), abs=1e-8)

    def test_outside_support(self, exp_unit):
        assert cramer_j(exp_unit, 1.0, [1.5]).is_infinite
        assert cramer_j(exp_unit, 0.0, [1.0]).is_infinite

    def test_gaussian_reward(self):
        law = make_law("exp_gauss", rate=1.0, mean=[0.0], cov=[[1.0]])
        # independent coordinates: the rates add up
        assert cramer_j(law, 2.0, [1.0]).value == pytest.approx(1 - math.log(2) + 0.5, abs=1e-8)

class TestUpsilon:
    @pytest.mark.parametrize("beta, w", [(1.0, 1.0), (1.0, 2.0), (0.5, 1.5), (2.0, 0.3)])
    def test_closed_form(self, exp_unit, beta, w):
        expected = beta - w + w * math.log(w / beta)
        assert upsilon(exp_unit, beta, [w]).value == pytest.approx(expected, abs=1e-8)

    def test_gaussian_mean(self):
        law = make_law("exp_gauss", rate=1.0, mean=[0.0], cov=[[1.0]])
        assert upsilon(law, 1.0, [0.0]).value == pytest.approx(0.0, abs=1e-8)

    def test_origin_and_negative_beta(self, exp_unit):
        assert upsilon(exp_unit, 0.0, [0.0]).value == 0.0
        assert upsilon(exp_unit, -0.1, [1.0]).is_infinite

    def test_homogeneous(self):
        law = make_law("exp_gauss", rate=2.0, mean=[1.0, -0.5], cov=[[1.0, 0.3], [0.3, 0.5]])
        one = upsilon(law, 0.7, [0.4, 0.2]).value
        three = upsilon(law, 2.1, [1.2, 0.6]).value
        assert three == pytest.approx(3 * one, rel=1e-6)

    def test_zero_beta_is_labelled(self):
        law = make_law("exp_gauss", rate=1.0, mean=[0.0], cov=[[1.0]])
        r = upsilon(law, 0.0, [1.0])
        assert r.label == ENVELOPE_LABEL

    def test_perspective_needs_positive_beta(self, exp_unit):
        with pytest.raises(ValueError):
            perspective_min(exp_unit, 0.0, [1.0])

class TestRateI:
    @pytest.mark.parametrize("w", [0.5, 1.0, 1.5, 1.9, 1.95, 2.0, 2.05])
    def test_poisson(self, exp_unit, w):
        r = rate_i(exp_unit, [w], "lower")
        assert r.value == pytest.approx(poisson_rate(w), abs=1e-6)
        assert r.argmin_beta == pytest.approx(1.0, abs=1e-6)

    def test_known_values(self, exp_unit):
        assert rate_i(exp_unit, [1.9]).value == pytest.approx(0.31952, abs=1e-5)
        assert rate_i(exp_unit, [1.95]).value == pytest.approx(0.35227, abs=1e-5)
        assert rate_i(exp_unit, [2.05]).value == pytest.approx(0.42157, abs=1e-5)

    def test_heavy_tailed_waits_have_no_tail_term(self):
        law = make_law("gauss_tail_cauchy")
        r = rate_i(law, [1.0, 0.0], "upper")
        assert r.argmin_beta == 1.0
        assert r.value == upsilon(law, 1.0, [1.0, 0.0]).value

    def test_ordering(self):
        law = make_law("exp_gauss", rate=1.0, mean=[0.5], cov=[[0.25]])
        for w in np.linspace(-1.0, 2.0, 7):
            upper = rate_i(law, [w], "upper").value
            lower = rate_i(law, [w], "lower").value
            assert upper <= lower + 1e-8
            assert lower <= upsilon(law, 1.0, [w]).value + 1e-8

    def test_oscillating_tail_gap(self):
        # completed waiting time over t: the last, unfinished wait costs (1 - w) times the tail exponent
        law = make_law("oscillating_tail", ell_s=1.0, ell_i=2.0, reward="wait")
        for w in (0.0, 0.25, 0.5, 0.9):
            upper = rate_i(law, [w], "upper")
            lower = rate_i(law, [w], "lower")
            assert upper.argmin_beta == pytest.approx(w)
            assert upper.value == pytest.approx(1 - w, abs=1e-6)
            assert lower.value == pytest.approx(2 * (1 - w), abs=1e-6)
        assert rate_i(law, [1.2], "lower").is_infinite
        assert upsilon(law, 1.0, [0.5]).is_infinite

@pytest.mark.parametrize("family, params, w", [
    ("exp_unit", {}, [0.0]),
    ("exp_unit", {}, [1.5]),
    ("oscillating_tail", {"ell_s": 1.0, "ell_i": 2.0, "reward": "wait"}, [1.0]),
    ("oscillating_tail", {"ell_s": 1.0, "ell_i": 2.0}, [0.0]),
    ("gauss_tail_cauchy", {}, [1.0, 0.0]),
])
def test_lower_semicontinuous(family, params, w):
    law = make_law(family, params)
    value = rate_i(law, w).value
    approach = []
    for k in range(10, 15):
        for direction in np.eye(law.dim):
            for sign in (1, -1):
                approach.append(rate_i(law, np.asarray(w) + sign * 2.0 ** -k * direction).value)
    assert min(approach) >= value - 1e-3

def line(lo, hi):
    return np.linspace(lo, hi, 200)[:, None]

ORDERING_GRIDS = {
    "exp_unit":          (make_law("exp_unit", rate=1.0), line(0.05, 3.0)),
    "exp_gauss":         (make_law("exp_gauss", rate=1.0, mean=[0.5], cov=[[0.25]]), line(-1.0, 2.0)),
    "gauss_tail_cauchy": (make_law("gauss_tail_cauchy"),
                          np.array([[w1, w2] for w1 in np.linspace(0.2, 2.0, 20) for w2 in np.linspace(-1, 1, 10)])),
    "reward_of_wait":    (make_law("reward_of_wait", function="sqrt"), line(0.1, 1.5)),
    "oscillating_unit":  (make_law("oscillating_tail", ell_s=1.0, ell_i=2.0), line(0.05, 2.5)),
    "oscillating_wait":  (make_law("oscillating_tail", ell_s=1.0, ell_i=2.0, reward="wait"), line(0.0, 1.5)),
}

@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(ORDERING_GRIDS))
def test_ordering_on_grid(name):
    law, grid = ORDERING_GRIDS[name]
    for w in grid:
        upper = rate_i(law, w, "upper").value
        lower = rate_i(law, w, "lower").value
        assert upper <= lower + 1e-6, w
        assert lower <= upsilon(law, 1.0, w).value + 1e-6, w

class TestSetInfimum:
    def test_mean_inside(self, exp_unit):
        r = rate_inf_over_set(exp_unit, SetDescriptor.closed_ball([1.0], 0.1))
        assert r.value == 0.0

    def test_ball(self, exp_unit):
        r = rate_inf_over_set(exp_unit, SetDescriptor.closed_ball([2.0], 0.1))
        assert r.value == pytest.approx(poisson_rate(1.9), abs=1e-6)
        assert r.argmin_w[0] == pytest.approx(1.9, abs=1e-4)

    def test_half_space(self, exp_unit):
        r = rate_inf_over_set(exp_unit, SetDescriptor.half_space([-1.0], -1.5, closed=True))
        assert r.value == pytest.approx(0.1082, abs=1e-4)

    def test_off_domain_plane(self):
        # the reward equals the waiting time: I is infinite off the diagonal
        law = make_law("gauss_tail_cauchy")
        off_diagonal = SetDescriptor.closed_ball([3.0, 0.0], 0.5)
        assert rate_inf_over_set(law, off_diagonal).is_infinite

    def test_hyperbolic_set_is_unreachable(self):
        law = make_law("gauss_tail_cauchy")
        assert rate_inf_over_set(law, SetDescriptor.hyperbolic(c=1.0, k=1.0)).is_infinite

    def test_box_product_rejected(self, exp_unit):
        with pytest.raises(ValueError):
            rate_inf_over_set(exp_unit, SetDescriptor.box_product(0.5, 1.5, SetDescriptor.open_ball([1.0], 0.1)))

    def test_covering(self, exp_unit):
        r = covering_inf(exp_unit, SetDescriptor.closed_ball([2.0], 0.1), 0.05)
        assert r.value <= poisson_rate(1.9) + 1e-6
        assert r.value >= poisson_rate(1.85) - 1e-6

def test_level_set_bounded(exp_unit):
    grid = np.linspace(0.05, 4.0, 80)
    check = level_set_bounded(exp_unit, 0.3, grid)
    assert check.bounded
    assert check.inside > 0
    assert not level_set_bounded(exp_unit, 0.3, np.linspace(0.5, 1.5, 11)).bounded

def test_rate_grid(exp_unit):
    points = [[w] for w in np.round(np.arange(0.2, 3.0 + 1e-9, 0.1), 10)]
    rows = rate_grid(exp_unit, points)
    assert len(rows) == 29
    for row in rows:
        w = row.w[0]
        assert row.converged
        assert row.I_lower == pytest.approx(poisson_rate(w), abs=1e-3)
        assert row.I_upper == row.I_lower
        assert row.Upsilon1 == pytest.approx(poisson_rate(w), abs=1e-6)
        assert row.gamma_star == pytest.approx(w)

def test_upsilon_points(exp_unit):
    values = upsilon_points(exp_unit, [(1.0, [2.0]), (-1.0, [1.0])])
    beta, w, r = values[0]
    assert beta == 1.0 and w[0] == 2.0
    assert r.value == pytest.approx(1 - 2 + 2 * math.log(2), abs=1e-8)
    assert values[1][2].value == INF
