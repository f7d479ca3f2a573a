"""Finite-t checks of the large deviation bounds of renewal-reward processes.

Every check compares a Monte Carlo rate curve, or another simulated quantity, with the value the theory
predicts and returns a `BoundReport`. Limits in t cannot be observed: verdicts use the largest t of the
grid and a slack of ``sim.slack`` plus the width of the confidence band there.
"""
import logging
from dataclasses import dataclass, field, replace

import math
import numpy as np
from scipy.stats import gamma as gamma_dist
from scipy.stats import norm
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .common import INF, encode_real, is_inf
from .model import Family, PairLaw, make_law
from .mc import RateCurveEntry, empirical_rate_curve, estimate_mu_n
from .parameters import RateParameters, SimulationParameters
from .rate import rate_i, rate_inf_over_set, upsilon
from .report import BoundReport, TheoremPart, Verdict
from .sets import SetDescriptor, SetKind

logger = logging.getLogger(__name__)

ELL_S_FINITE = "ell_s_finite"
I_S_ZERO_FINITE = "I_s_zero_finite"
HYPOTHESIS_FREE = "hypothesis-free zone"
SUBLINEAR_REWARD = "reward_bounded_by_sublinear_function"

DIVERGENCE_THRESHOLD = 50.0
PROP2_TOL = 1e-3
TAILS_TOL = 0.15
CLT_STDERRS = 5.0

# stream keys, one per kind of check
_LOWER_KEY, _UPPER_KEY, _CONVEX_KEY, _CLOSED_KEY, _SUPERMULT_KEY, _CLT_KEY = 0xB, 0xC, 0xD, 0xCC, 0x5B, 0xC17

def _sim(sim: Optional[SimulationParameters]) -> SimulationParameters:
    return sim if sim is not None else SimulationParameters()

# region Bound verdicts

def _band_slack(entry: RateCurveEntry, base: float) -> float:
    return base + entry.width

def lower_bound_verdict(entries: Sequence[RateCurveEntry], theoretical_inf: float, base_slack: float):
    """liminf (1/t) ln P >= -inf I: the rate may not sit above the infimum."""
    last = entries[-1]
    slack = _band_slack(last, base_slack)
    if all(e.hits == 0 for e in entries):
        return Verdict.inconclusive, slack
    if not is_inf(theoretical_inf) and last.rate_lo > theoretical_inf + slack:
        return Verdict.violated, slack
    return Verdict.consistent, slack

def upper_bound_verdict(entries: Sequence[RateCurveEntry], theoretical_inf: float, base_slack: float):
    """limsup (1/t) ln P <= -inf I: the rate may not sit below the infimum."""
    last = entries[-1]
    slack = _band_slack(last, base_slack)
    if last.rate_hi < theoretical_inf - slack:
        return Verdict.violated, slack
    return Verdict.consistent, slack

def _curve_details(entries: Sequence[RateCurveEntry], inf_value) -> Dict:
    return {
        "theoretical_converged": inf_value.converged,
        "theoretical_label":     inf_value.label,
        "argmin_w":              None if inf_value.argmin_w is None else [float(v) for v in inf_value.argmin_w],
        "zero_hit_entries":      sum(1 for e in entries if e.hits == 0),
    }

def check_lower_bound(law: PairLaw, G: SetDescriptor, t_grid: Sequence[float], n_runs: int, seed: int,
                      sim: SimulationParameters = None, params: RateParameters = None,
                      progress=False) -> BoundReport:
    """Lower bound on an open set: -(1/t) ln P[W_t/t ∈ G] against inf_G I_i."""
    sim = _sim(sim)
    if G.is_closed:
        raise ValueError(f"The lower bound is checked on open sets, got a closed {G.kind.value}")
    logger.info(f"Checking the lower bound for {law!r} on an open {G.kind.value}")
    theoretical = rate_inf_over_set(law, G, "lower", params)
    entries = empirical_rate_curve(law, G, t_grid, n_runs, seed, (_LOWER_KEY,), sim, progress)
    verdict, slack = lower_bound_verdict(entries, theoretical.value, sim.slack)
    logger.info(f"Lower bound: inf I_i = {theoretical.value:.6g}, verdict {verdict.value}")
    return BoundReport(TheoremPart.b, G, theoretical.value, entries, verdict, slack, law.describe(), seed,
                       details=_curve_details(entries, theoretical))

def hypothesis_for_convex_sets(law: PairLaw, params: RateParameters = None) -> str:
    """Which sufficient condition for the upper bound on convex sets holds: ℓ_s < ∞ or I_s(0) < ∞."""
    if not is_inf(law.tail.ell_s):
        return ELL_S_FINITE
    if not rate_i(law, np.zeros(law.dim), "upper", params).is_infinite:
        return I_S_ZERO_FINITE
    return HYPOTHESIS_FREE

def check_convex(law: PairLaw, C: SetDescriptor, t_grid: Sequence[float], n_runs: int, seed: int,
                 sim: SimulationParameters = None, params: RateParameters = None,
                 progress=False) -> BoundReport:
    """Upper bound on a convex set against inf_C I_s, tagged with the hypothesis that held."""
    sim = _sim(sim)
    if C.kind == SetKind.box_product:
        raise ValueError("Upper bounds are checked on reward sets, not on box products")
    hypothesis = hypothesis_for_convex_sets(law, params)
    logger.info(f"Checking the upper bound for {law!r} on a convex {C.kind.value} ({hypothesis})")
    theoretical = rate_inf_over_set(law, C, "upper", params)
    entries = empirical_rate_curve(law, C, t_grid, n_runs, seed, (_CONVEX_KEY,), sim, progress)
    verdict, slack = upper_bound_verdict(entries, theoretical.value, sim.slack)
    logger.info(f"Convex upper bound: inf I_s = {theoretical.value:.6g}, verdict {verdict.value}")
    return BoundReport(TheoremPart.d, C, theoretical.value, entries, verdict, slack, law.describe(), seed,
                       hypothesis=hypothesis, details=_curve_details(entries, theoretical))

def check_upper_bound(law: PairLaw, F: SetDescriptor, t_grid: Sequence[float], n_runs: int, seed: int,
                      sim: SimulationParameters = None, params: RateParameters = None,
                      progress=False) -> BoundReport:
    """Upper bound on a closed set. Compact sets need no hypothesis; other (convex) sets are checked as
    `check_convex` does."""
    sim = _sim(sim)
    if not (F.bounded and F.is_closed):
        return check_convex(law, F, t_grid, n_runs, seed, sim, params, progress)
    logger.info(f"Checking the upper bound for {law!r} on a compact {F.kind.value}")
    theoretical = rate_inf_over_set(law, F, "upper", params)
    entries = empirical_rate_curve(law, F, t_grid, n_runs, seed, (_UPPER_KEY,), sim, progress)
    verdict, slack = upper_bound_verdict(entries, theoretical.value, sim.slack)
    logger.info(f"Compact upper bound: inf I_s = {theoretical.value:.6g}, verdict {verdict.value}")
    return BoundReport(TheoremPart.c, F, theoretical.value, entries, verdict, slack, law.describe(), seed,
                       details=_curve_details(entries, theoretical))

# endregion

# region Counterexamples

def gaussian_tail_moments(nodes=128, upper=8.0) -> Tuple[float, float]:
    """(μ, σ²) of the waiting time with P[S > s] = e^{-s²}, by Gauss-Legendre quadrature on [0, upper]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = upper / 2 * (x + 1)
    w = upper / 2 * w
    survival = np.exp(-s ** 2)
    mean = float(w @ survival)
    second = float(w @ (2 * s * survival))
    return mean, second - mean ** 2

def counterexample_open(law: PairLaw = None, t_grid: Sequence[float] = (10, 50, 100), n_runs: int = 100_000,
                        seed: int = 0, sim: SimulationParameters = None, params: RateParameters = None,
                        progress=False) -> BoundReport:
    """The open half-space {w_1 < 1} under gauss_tail_cauchy: every trajectory lands in it while the rate
    infimum is +inf."""
    law = law if law is not None else make_law(Family.gauss_tail_cauchy)
    C = SetDescriptor.half_space(np.eye(law.dim)[0], 1.0)
    report = check_convex(law, C, t_grid, n_runs, seed, sim, params, progress)
    misses = sum(e.n_runs - e.hits for e in report.empirical_curve)
    return replace(report, theorem_part=TheoremPart.counterexample_open,
                   details={**report.details, "misses": misses})

@dataclass(frozen=True)
class CltWindow:
    """Frequency of -√ε σ √N < T_N - μN <= -ε σ √N against its Gaussian limit."""
    N: int
    eps: float
    p_hat: float
    p_gauss: float
    stderr: float
    n_runs: int

    @property
    def agrees(self) -> bool:
        return abs(self.p_hat - self.p_gauss) <= CLT_STDERRS * self.stderr

    def encode(self):
        return {"N": self.N, "eps": self.eps, "p_hat": self.p_hat, "p_gauss": self.p_gauss,
                "stderr": self.stderr, "n_runs": self.n_runs, "agrees": self.agrees}

def clt_window(law: PairLaw, N: int, eps: float, n_runs: int, seed: int, sim: SimulationParameters = None,
               moments: Tuple[float, float] = None, progress=False) -> CltWindow:
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    mu, var = moments if moments is not None else gaussian_tail_moments()
    sigma = math.sqrt(var)
    # the waiting time average in [μ - √ε σ/√N, μ - ε σ/√N], rewards unconstrained
    unconstrained = SetDescriptor.half_space(np.eye(law.dim)[0], INF, closed=True)
    box = SetDescriptor.box_product(mu - math.sqrt(eps) * sigma / math.sqrt(N), mu - eps * sigma / math.sqrt(N),
                                    unconstrained)
    estimate = estimate_mu_n(law, N, box, n_runs, seed, (_CLT_KEY, N), sim, progress)
    p_gauss = float(norm.cdf(-eps) - norm.cdf(-math.sqrt(eps)))
    stderr = math.sqrt(p_gauss * (1 - p_gauss) / n_runs)
    window = CltWindow(N, eps, estimate.p_hat, p_gauss, stderr, n_runs)
    logger.info(f"CLT window at N={N}: p_hat={window.p_hat:.5g}, Gaussian {p_gauss:.5g}, agrees={window.agrees}")
    return window

def decay_exponent(entries: Sequence[RateCurveEntry]) -> Optional[float]:
    """Least-squares slope of -ln p_hat against t over the entries with hits."""
    points = [(e.t, -math.log(e.p_hat)) for e in entries if e.hits > 0]
    if not points:
        return None
    if len(points) == 1:
        t, y = points[0]
        return y / t
    t, y = np.array(points).T
    return float(np.polyfit(t, y, 1)[0])

def counterexample_closed(law: PairLaw = None, eps: float = 0.1, N_grid: Sequence[int] = (50, 100, 200, 400),
                          n_runs: int = 100_000, seed: int = 0, sim: SimulationParameters = None,
                          params: RateParameters = None, clt_N: Optional[int] = None,
                          progress=False) -> BoundReport:
    """The closed convex set {w_1 < 1, (1 - w_1) w_2 >= 1} under gauss_tail_cauchy, at t = μN.

    The probability decays slower than e^{-t ε σ²/μ} for every ε while the rate infimum is +inf."""
    sim = _sim(sim)
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    law = law if law is not None else make_law(Family.gauss_tail_cauchy)
    mu, var = gaussian_tail_moments()
    C = SetDescriptor.hyperbolic(c=1.0, k=1.0, dim=law.dim)
    hypothesis = hypothesis_for_convex_sets(law, params)
    theoretical = rate_inf_over_set(law, C, "upper", params)
    t_grid = [mu * N for N in N_grid]
    entries = empirical_rate_curve(law, C, t_grid, n_runs, seed, (_CLOSED_KEY,), sim, progress)

    bound = eps * var / mu
    exponent = decay_exponent(entries)
    with_hits = [e for e in entries if e.hits > 0]
    slack = _band_slack(with_hits[-1] if with_hits else entries[-1], sim.slack)
    if exponent is None:
        verdict = Verdict.inconclusive
    elif exponent <= bound + slack:
        verdict = Verdict.violated
    else:
        verdict = Verdict.consistent
    details = {
        "eps":           eps,
        "mu":            mu,
        "sigma2":        var,
        "N_grid":        list(N_grid),
        "bound":         bound,
        "exponent":      encode_real(exponent),
        "one_sided":     [encode_real(e.rate_lo) for e in entries],
    }
    if clt_N is not None:
        details["clt_window"] = clt_window(law, clt_N, eps, n_runs, seed, sim, (mu, var), progress).encode()
    logger.info(f"Closed convex counterexample: exponent {exponent}, bound {bound:.5g}, verdict {verdict.value}")
    return BoundReport(TheoremPart.counterexample_closed, C, theoretical.value, entries, verdict, slack,
                       law.describe(), seed, hypothesis=hypothesis, details=details)

# endregion

# region Super-multiplicativity

def _log_half_width(p_hat: float, lo: float, hi: float) -> float:
    return max(math.log(hi) - math.log(p_hat), math.log(p_hat) - math.log(lo))

def exact_mu_n(law: PairLaw, n: int, C: SetDescriptor) -> Optional[float]:
    """P[(1/n) Σ (S_i, X_i) ∈ C] from the Gamma law of the waiting time sum, for exp_unit laws."""
    if law.family != Family.exp_unit:
        return None
    if not C.inner.contains(np.ones(1)):
        return 0.0
    rate = law.params["rate"]
    return float(gamma_dist.cdf(C.beta, n, scale=1 / (n * rate)) - gamma_dist.cdf(C.alpha, n, scale=1 / (n * rate)))

def check_supermultiplicativity(law: PairLaw, C: SetDescriptor, pairs: Sequence[Tuple[int, int]], n_runs: int,
                                seed: int, sim: SimulationParameters = None, progress=False) -> BoundReport:
    """μ_{m+n}(C) >= μ_m(C) μ_n(C) for the laws μ_n of the pair averages, up to the confidence bands."""
    sim = _sim(sim)
    if C.kind != SetKind.box_product:
        raise ValueError(f"Super-multiplicativity is checked on box products, got {C.kind.value}")
    sizes = sorted({k for m, n in pairs for k in (m, n, m + n)})
    estimates = {k: estimate_mu_n(law, k, C, n_runs, seed, (_SUPERMULT_KEY, k), sim, progress) for k in sizes}

    rows, verdicts = [], []
    for m, n in pairs:
        trio = estimates[m], estimates[n], estimates[m + n]
        row = {"m": m, "n": n, "p_m": trio[0].p_hat, "p_n": trio[1].p_hat, "p_mn": trio[2].p_hat}
        if any(e.hits == 0 for e in trio):
            row["verdict"] = Verdict.inconclusive.value
        else:
            tolerance = sum(_log_half_width(e.p_hat, e.ci_lo, e.ci_hi) for e in trio)
            gap = math.log(trio[2].p_hat) - math.log(trio[0].p_hat) - math.log(trio[1].p_hat)
            row.update(log_gap=gap, tolerance=tolerance,
                       verdict=(Verdict.consistent if gap >= -tolerance else Verdict.violated).value)
        exact = [exact_mu_n(law, k, C) for k in (m, n, m + n)]
        if exact[0] is not None:
            row["exact"] = exact
        rows.append(row)
        verdicts.append(Verdict(row["verdict"]))

    if Verdict.violated in verdicts:
        verdict = Verdict.violated
    elif Verdict.inconclusive in verdicts:
        verdict = Verdict.inconclusive
    else:
        verdict = Verdict.consistent
    entries = [RateCurveEntry.from_estimate(float(k), estimates[k]) for k in sizes]
    logger.info(f"Super-multiplicativity over {list(pairs)}: {verdict.value}")
    return BoundReport(TheoremPart.supermult, C, None, entries, verdict, 0.0, law.describe(), seed,
                       details={"pairs": rows})

# endregion

# region Tails and sublinear rewards

@dataclass(frozen=True)
class TailEstimate:
    ell_i: float
    ell_s: float
    window: Tuple[float, float]
    truncated: bool = False
    diverging: bool = False
    values: List[float] = field(default_factory=list)

    def encode(self):
        return {
            "ell_i":     encode_real(self.ell_i),
            "ell_s":     encode_real(self.ell_s),
            "window":    [encode_real(v) for v in self.window],
            "truncated": self.truncated,
            "diverging": self.diverging,
            "values":    [encode_real(v) for v in self.values],
        }

def _log_survival(source: Union[PairLaw, np.ndarray], s: np.ndarray) -> np.ndarray:
    if isinstance(source, PairLaw):
        return np.asarray(source.log_survival(s), dtype=float)
    samples = np.sort(np.asarray(source, dtype=float))
    count = samples.shape[0] - np.searchsorted(samples, s, side='right')
    with np.errstate(divide='ignore'):
        return np.log(count / samples.shape[0])

def estimate_tail_exponents(source: Union[PairLaw, np.ndarray], s_grid: Sequence[float]) -> TailEstimate:
    """-(1/s) ln P[S > s] on the grid; the max and min over its upper half estimate ℓ_i and ℓ_s.

    ``source`` is a law or an array of waiting time samples (empirical survival)."""
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.shape[0] < 2 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError(f"The tail grid must be positive and increasing, got {list(s_grid)}")
    log_surv = _log_survival(source, s)
    finite = np.isfinite(log_surv)
    truncated = not np.all(finite)
    if truncated:
        logger.warning(f"Survival vanishes from s={s[~finite][0]:.6g} on; tail estimate truncated")
        s, log_surv = s[finite], log_surv[finite]
    if s.shape[0] == 0:
        return TailEstimate(INF, INF, (float(s_grid[0]), float(s_grid[0])), truncated=True, diverging=True)
    values = -log_surv / s
    window = values[s.shape[0] // 2:]
    ell_i, ell_s = float(window.max()), float(window.min())
    diverging = ell_i > DIVERGENCE_THRESHOLD
    if diverging:
        logger.info(f"Tail exponent estimates exceed {DIVERGENCE_THRESHOLD:g}: reported as +inf")
    return TailEstimate(INF if diverging else ell_i, INF if ell_s > DIVERGENCE_THRESHOLD else ell_s,
                        (float(s[s.shape[0] // 2]), float(s[-1])), truncated, diverging, values.tolist())

def _tails_agree(estimate: float, expected: float) -> bool:
    if is_inf(expected) or is_inf(estimate):
        return is_inf(expected) and is_inf(estimate)
    return abs(estimate - expected) <= TAILS_TOL * max(1.0, expected)

def check_tails(law: PairLaw, s_grid: Sequence[float]) -> BoundReport:
    estimate = estimate_tail_exponents(law, s_grid)
    agree = _tails_agree(estimate.ell_i, law.tail.ell_i) and _tails_agree(estimate.ell_s, law.tail.ell_s)
    verdict = Verdict.consistent if agree else Verdict.violated
    if estimate.truncated and not agree:
        verdict = Verdict.inconclusive
    return BoundReport(TheoremPart.tails, None, None, [], verdict, TAILS_TOL, law.describe(),
                       details={"estimate": estimate.encode(), "expected": law.tail.encode()})

def check_prop2(law: PairLaw, w_grid: Sequence, params: RateParameters = None) -> BoundReport:
    """When ‖X‖ <= f(S) for a sublinear f the rate function is Υ(1, ·) whatever the tails."""
    deviations = []
    worst = 0.0
    for w in w_grid:
        lower = rate_i(law, w, "lower", params).value
        ups = upsilon(law, 1.0, w, params).value
        if is_inf(lower) and is_inf(ups):
            deviation = 0.0
        elif is_inf(lower) or is_inf(ups):
            deviation = INF
        else:
            deviation = abs(lower - ups)
        deviations.append(deviation)
        worst = max(worst, deviation)
    hypothesis = SUBLINEAR_REWARD if law.family == Family.reward_of_wait else HYPOTHESIS_FREE
    verdict = Verdict.consistent if worst <= PROP2_TOL else Verdict.violated
    logger.info(f"max |I_i - Υ(1, ·)| = {worst:.3g} over {len(deviations)} points: {verdict.value}")
    return BoundReport(TheoremPart.prop2, None, None, [], verdict, PROP2_TOL, law.describe(),
                       hypothesis=hypothesis,
                       details={"max_deviation": encode_real(worst),
                                "w_grid": [np.atleast_1d(np.asarray(w, dtype=float)).tolist() for w in w_grid],
                                "deviations": [encode_real(d) for d in deviations]})

# endregion

def expected_verdicts(report: BoundReport) -> FrozenSet[Verdict]:
    """The verdicts the theory predicts for a report."""
    part = report.theorem_part
    if part == TheoremPart.counterexample_open:
        return frozenset({Verdict.violated})
    if part == TheoremPart.counterexample_closed:
        return frozenset({Verdict.violated, Verdict.inconclusive})
    if part == TheoremPart.b:
        # unreachable sets or infinite infima leave the lower bound without a two-sided test
        if is_inf(report.theoretical_inf) or all(e.hits == 0 for e in report.empirical_curve):
            return frozenset({Verdict.consistent, Verdict.inconclusive})
    if part == TheoremPart.d and report.hypothesis == HYPOTHESIS_FREE:
        return frozenset({Verdict.violated, Verdict.consistent, Verdict.inconclusive})
    return frozenset({Verdict.consistent})
