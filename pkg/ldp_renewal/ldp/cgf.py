import logging
from dataclasses import dataclass

import math
import numpy as np
from scipy.special import erfc, erfcx, gammainc, gammaln, logsumexp
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

from .common import INF, Matrix, Vector, as_vector
from .exceptions import InsufficientSamplesError
from .model import SQRT_PI_2, DiscreteMeasure, EmpiricalLaw, PairLaw, Sample

logger = logging.getLogger(__name__)

MIN_EMPIRICAL_SAMPLES = 100
UNRELIABLE_TOP_WEIGHT = 0.5
PROBE_RADIUS = 1e6
GAUSS_TAIL_SERIES_FROM = -20.0
GAUSS_TAIL_SERIES_TERMS = 15

@dataclass(frozen=True)
class DualPoint:
    zeta: float
    phi: Vector

    def __post_init__(self):
        if not math.isfinite(self.zeta) or not np.all(np.isfinite(self.phi)):
            raise ValueError(f"Dual points must be finite, got ({self.zeta}, {self.phi})")

    def as_array(self) -> Vector:
        return np.concatenate([[self.zeta], self.phi])

    @classmethod
    def from_array(cls, p: Sequence[float]):
        p = np.asarray(p, dtype=float)
        return cls(float(p[0]), p[1:].copy())

@dataclass(frozen=True)
class CgfValue:
    value: float
    finite: bool
    grad: Optional[Vector] = None
    """(E_tilted[S], E_tilted[X]) as one vector in (s, x) coordinates."""
    hess: Optional[Matrix] = None
    stderr: Optional[float] = None
    unreliable: bool = False

    @property
    def tilted_mean(self) -> Optional[Tuple[float, Vector]]:
        if self.grad is None:
            return None
        return float(self.grad[0]), self.grad[1:]

INFINITE = CgfValue(INF, False)

Evaluation = Optional[Tuple[float, Vector, Matrix]]
"""Value, gradient and Hessian of Λ at a point, or None when Λ is infinite there."""

# region Closed forms

def _exp_unit(law, p: Vector) -> Evaluation:
    zeta, phi = p[0], p[1]
    gap = law.rate - zeta
    value = phi - math.log1p(-zeta / law.rate)
    return value, np.array([1 / gap, 1.0]), np.diag([1 / gap ** 2, 0.0])

def _exp_gauss(law, p: Vector) -> Evaluation:
    zeta, phi = p[0], p[1:]
    gap = law.rate - zeta
    sigma_phi = law.cov @ phi
    value = -math.log1p(-zeta / law.rate) + phi @ law.m + phi @ sigma_phi / 2
    grad = np.concatenate([[1 / gap], law.m + sigma_phi])
    hess = np.zeros((law.dim + 1, law.dim + 1))
    hess[0, 0] = 1 / gap ** 2
    hess[1:, 1:] = law.cov
    return value, grad, hess

def _decay_moments(a: np.ndarray, length: np.ndarray):
    """∫_0^L u^j e^{-a u} du for j = 0, 1, 2 and a >= 0."""
    out = []
    x = a * length
    small = x < 1e-8
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        for j in range(3):
            regular = np.exp(gammaln(j + 1)) * gammainc(j + 1, x) / a ** (j + 1)
            series = length ** (j + 1) / (j + 1)
            out.append(np.where(small, series, regular))
    return out

def _log_tilted_moments(law, zeta: float) -> Tuple[float, float, float]:
    """ln ∫ s^j e^{ζ s} dP(s) for j = 0, 1, 2, piece by piece of the cumulative hazard."""
    pieces = law.pieces
    live = pieces.rate > 0
    start, h0, h, length = pieces.start[live], pieces.cumulative[live], pieces.rate[live], pieces.length[live]
    kappa = h - zeta
    grow = kappa < 0
    # integrate away from the endpoint where the tilted density is largest
    end = np.where(grow, start + np.where(grow, length, 0.0), start)
    h_end = np.where(grow, h0 + h * np.where(grow, length, 0.0), h0)
    sign = np.where(grow, -1.0, 1.0)
    n0, n1, n2 = _decay_moments(np.abs(kappa), length)
    m0 = n0
    m1 = end * n0 + sign * n1
    m2 = end ** 2 * n0 + 2 * sign * end * n1 + n2
    log_prefactor = np.log(h) + zeta * end - h_end
    tiny = np.finfo(float).tiny
    return tuple(float(logsumexp(log_prefactor + np.log(np.maximum(m, tiny)))) for m in (m0, m1, m2))

def _piecewise_hazard(law, p: Vector) -> Evaluation:
    l0, l1, l2 = _log_tilted_moments(law, law.waiting_tilt(p))
    norm, _, _ = _log_tilted_moments(law, 0.0)
    es = math.exp(l1 - l0)
    var = max(math.exp(l2 - l0) - es ** 2, 0.0)
    if law.wait_reward:
        return l0 - norm, np.array([es, es]), np.full((2, 2), var)
    return p[1] + l0 - norm, np.array([es, 1.0]), np.diag([var, 0.0])

def _gauss_tail_series(t: float) -> Tuple[float, float, float]:
    """E[S^j e^{-tS}] for j = 0, 1, 2 and large t, from e^{-s^2} = Σ (-s^2)^k/k!."""
    k = np.arange(GAUSS_TAIL_SERIES_TERMS)
    sign = np.where(k % 2 == 0, 2.0, -2.0)
    log_terms = [gammaln(2 * k + 2 + j) - gammaln(k + 1) - (2 * k + 2 + j) * math.log(t) for j in range(3)]
    return tuple(float(np.sum(sign * np.exp(terms))) for terms in log_terms)

def gauss_tail_cgf(theta: float) -> Tuple[float, float, float]:
    """ln E[e^{θS}] and its first two derivatives for P[S > s] = e^{-s^2}.

    With I = ∫_0^∞ e^{θs - s^2} ds = (√π/2) erfcx(-θ/2), integration by parts gives E[e^{θS}] = 1 + θI and
    E[S e^{θS}] = I + θ(1 + θI)/2."""
    if theta < GAUSS_TAIL_SERIES_FROM:
        m0, m1, m2 = _gauss_tail_series(-theta)
        d1 = m1 / m0
        return math.log(m0), d1, m2 / m0 - d1 ** 2
    if theta < 0:
        i = SQRT_PI_2 * float(erfcx(-theta / 2))
        m = 1 + theta * i
        value, r = math.log(m), i / m
    else:
        log_i = theta ** 2 / 4 + math.log(SQRT_PI_2 * float(erfc(-theta / 2)))
        value = float(np.logaddexp(0.0, math.log(theta) + log_i)) if theta > 0 else 0.0
        r = math.exp(log_i - value)
    # r = I/(1 + θI): Λ' = r + θ/2 and Λ'' = 1 + θΛ'/2 - Λ'^2
    return value, r + theta / 2, 1 - theta * r / 2 - r * r

def _gauss_tail(law, p: Vector) -> Evaluation:
    value, d1, d2 = gauss_tail_cgf(law.waiting_tilt(p))
    grad = np.zeros(law.dim + 1)
    grad[:2] = d1
    hess = np.zeros((law.dim + 1, law.dim + 1))
    hess[:2, :2] = d2
    return value, grad, hess

# endregion

def _measure(measure: DiscreteMeasure, p: Vector) -> Evaluation:
    exponents = measure.log_weights + measure.nodes @ p
    total = logsumexp(exponents)
    tilted = np.exp(exponents - total)
    grad = tilted @ measure.nodes
    hess = (measure.nodes * tilted[:, None]).T @ measure.nodes - np.outer(grad, grad)
    return float(total - measure.log_mass), grad, hess

ANALYTIC_CGFS: Dict[str, Callable[[PairLaw, Vector], Evaluation]] = {
    "exp_unit":         _exp_unit,
    "exp_gauss":        _exp_gauss,
    "piecewise_hazard": _piecewise_hazard,
    "gauss_tail":       _gauss_tail,
}

def evaluate(law: PairLaw, p: Vector) -> Evaluation:
    """Λ(p) with gradient and Hessian for a point p = (ζ, φ) given as one array; None outside the domain."""
    if not law.in_domain(p):
        return None
    if law.analytic_cgf is not None:
        return ANALYTIC_CGFS[law.analytic_cgf](law, p)
    return _measure(law.measure_at(p), p)

def cgf_eval(law: PairLaw, p: Union[DualPoint, Sequence[float]]) -> CgfValue:
    """Λ at p. Values of an empirical law carry the delta-method standard error and the dominance flag."""
    if not isinstance(p, DualPoint):
        p = DualPoint.from_array(p)
    as_vector(p.phi, law.dim)
    result = evaluate(law, p.as_array())
    if result is None:
        return INFINITE
    value, grad, hess = result
    if isinstance(law, EmpiricalLaw):
        estimate = cgf_empirical((law.s, law.x), p)
        return CgfValue(estimate.value, True, estimate.grad, hess, estimate.stderr, estimate.unreliable)
    return CgfValue(value, True, grad, hess)

def cgf_empirical(samples: Union[Sequence[Sample], Tuple[np.ndarray, np.ndarray]],
                  p: Union[DualPoint, Sequence[float]]) -> CgfValue:
    """Log-mean-exp estimate of Λ(p) from pairs, with a delta-method standard error."""
    if isinstance(samples, tuple):
        s, x = samples
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float).reshape(s.shape[0], -1)
    else:
        s = np.array([sample.s for sample in samples])
        x = np.array([sample.x for sample in samples]).reshape(len(samples), -1)
    n = s.shape[0]
    if n < MIN_EMPIRICAL_SAMPLES:
        raise InsufficientSamplesError(f"At least {MIN_EMPIRICAL_SAMPLES} samples are needed, got {n}")
    if not isinstance(p, DualPoint):
        p = DualPoint.from_array(p)
    exponents = p.zeta * s + x @ as_vector(p.phi, x.shape[1])
    top = exponents.max()
    weights = np.exp(exponents - top)
    mean_weight = weights.mean()
    value = float(top + math.log(mean_weight))
    stderr = float(weights.std(ddof=1) / (math.sqrt(n) * mean_weight))
    unreliable = bool(weights.max() > UNRELIABLE_TOP_WEIGHT * weights.sum())
    if unreliable:
        logger.warning(f"Empirical CGF at ({p.zeta:.4g}, {p.phi}) is dominated by a single sample")
    tilted = weights / weights.sum()
    grad = np.concatenate([[tilted @ s], tilted @ x])
    return CgfValue(value, True, grad, stderr=stderr, unreliable=unreliable)

def cgf_domain_probe(law: PairLaw, direction: Union[DualPoint, Sequence[float]]) -> float:
    """sup{r >= 0 : Λ(r·direction) < +∞}, +∞ when still finite at radius 10^6."""
    if isinstance(direction, DualPoint):
        direction = direction.as_array()
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1) > 1e-9:
        raise ValueError(f"Probe direction must have unit norm, got norm {np.linalg.norm(direction)}")
    if law.in_domain(PROBE_RADIUS * direction):
        return INF
    lo, hi = 0.0, PROBE_RADIUS
    for _ in range(128):
        mid = (lo + hi) / 2
        if law.in_domain(mid * direction):
            lo = mid
        else:
            hi = mid
    return lo

@dataclass(frozen=True)
class MomentCondition:
    holds: bool
    zeta: Optional[float] = None
    sigma: Optional[float] = None

def exponential_moment_condition(law: PairLaw) -> MomentCondition:
    """Looks for ζ <= 0 and σ > 0 with E[e^{ζS + σ‖X‖}] < ∞.

    Uses e^{σ‖X‖} <= e^{σ‖X‖_1} <= Σ_ε e^{σ ε·X} over sign vectors ε, so finiteness of Λ(ζ, σε) for
    every ε is enough."""
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * law.dim)).reshape(law.dim, -1).T
    for zeta in (0.0, -1.0, -10.0, -100.0):
        for sigma in (1.0, 0.1, 0.01):
            if all(law.in_domain(np.concatenate([[zeta], sigma * eps])) for eps in signs):
                return MomentCondition(True, zeta, sigma)
    return MomentCondition(False)
