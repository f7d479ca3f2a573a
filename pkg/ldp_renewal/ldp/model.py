"""Waiting time/reward pair laws.

A `PairLaw` describes the common law of the i.i.d. pairs (S_i, X_i): S_i > 0 is the waiting time between
renewals and X_i in R^d (d <= 3) is the reward collected at the renewal. Besides a vectorized sampler,
each law exposes what the rate computations need from it:

* the tail exponents of S (`TailSpec`),
* the affine hull of the support of (S, X), as constraints ``M @ (s, x) == b`` holding almost surely,
* the reward coordinates without any exponential moment ("heavy" coordinates),
* either a closed form for the cumulant generating function or a discretization of the law
  (`DiscreteMeasure`) on which it is evaluated exactly.
"""
import csv
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import auto

import math
import numpy as np
from memoized_property import memoized_property
from pathlib import Path
from scipy.linalg import null_space
from scipy.special import logsumexp
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

from .common import INF, SerializableEnum, Vector, Matrix, encode_real, ensure_path, filehash
from .exceptions import InvalidLawError, SimulationError

logger = logging.getLogger(__name__)

SQRT_PI_2 = math.sqrt(math.pi) / 2
"""Mean of the waiting time with survival e^{-s^2}."""

MAX_REJECTIONS = 1_000_000

GAUSS_TAIL_REACH = 40.0
"""Distance past the tilted peak at which a density with a Gaussian tail is truncated."""

class Family(SerializableEnum):
    exp_unit = auto()
    exp_gauss = auto()
    gauss_tail_cauchy = auto()
    reward_of_wait = auto()
    oscillating_tail = auto()
    empirical = auto()

@dataclass(frozen=True)
class TailSpec:
    ell_i: float
    ell_s: float
    estimated: bool = False
    low_confidence: bool = False

    def __post_init__(self):
        if math.isnan(self.ell_i) or math.isnan(self.ell_s):
            raise InvalidLawError("Tail exponents must be numbers")
        if not 0 <= self.ell_s <= self.ell_i:
            raise InvalidLawError(f"Tail exponents must satisfy 0 <= ell_s <= ell_i, "
                                  f"got ell_s={self.ell_s}, ell_i={self.ell_i}")

    def ell(self, which: str) -> float:
        if which == "lower": return self.ell_i
        if which == "upper": return self.ell_s
        raise ValueError(f"Unknown rate function '{which}', expected 'lower' or 'upper'")

    def encode(self):
        return {"ell_i": encode_real(self.ell_i), "ell_s": encode_real(self.ell_s),
                "estimated": self.estimated, "low_confidence": self.low_confidence}

@dataclass(frozen=True)
class Sample:
    s: float
    x: Vector

    def __post_init__(self):
        if not self.s > 0:
            raise SimulationError(f"Waiting times must be positive, got {self.s}")
        if not np.all(np.isfinite(self.x)):
            raise SimulationError(f"Rewards must be finite, got {self.x}")

@dataclass(frozen=True)
class Constraints:
    """Rows of ``matrix @ (s, x) == rhs``, satisfied by almost every pair."""
    matrix: Matrix
    rhs: Vector

    @classmethod
    def none(cls, dim: int):
        return cls(np.zeros((0, dim + 1)), np.zeros(0))

    def __len__(self):
        return self.matrix.shape[0]

    def residual(self, tau: Vector, scale: float = 1.0) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix @ tau - scale * self.rhs))

@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted nodes y_j = (s_j, x_j) standing in for the law of (S, X); log weights sum to one."""
    nodes: Matrix
    log_weights: Vector
    log_mass: float
    """logsumexp of the log weights as rounded, so that Λ(0) is exactly zero."""

    @classmethod
    def from_log_weights(cls, nodes: Matrix, log_weights: Vector):
        keep = np.isfinite(log_weights)
        log_weights = log_weights[keep] - logsumexp(log_weights[keep])
        return cls(nodes[keep], log_weights, float(logsumexp(log_weights)))

    def mean(self) -> Vector:
        return np.exp(self.log_weights) @ self.nodes

def _open_uniform(rng: np.random.Generator, size: int, max_rejections=MAX_REJECTIONS) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    u = rng.random(size)
    rejections = 0
    while True:
        zeros = np.flatnonzero(u == 0.0)
        if zeros.size == 0:
            return u
        rejections += zeros.size
        if rejections > max_rejections:
            raise SimulationError(f"Uniform sampler rejected more than {max_rejections} draws")
        u[zeros] = rng.random(zeros.size)

def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.empty_like(nodes)
    w[1:-1] = (nodes[2:] - nodes[:-2]) / 2
    w[0] = (nodes[1] - nodes[0]) / 2
    w[-1] = (nodes[-1] - nodes[-2]) / 2
    return w

def waiting_time_nodes(s_max: float) -> np.ndarray:
    """Quadrature nodes for a waiting time density: log-spaced near 0, evenly spaced on [1, 64], log-spaced beyond."""
    parts = [np.exp(np.arange(-30.0, 0.0, 0.025)), np.arange(1.0, min(s_max, 64.0), 0.025)]
    if s_max > 64.0:
        parts.append(np.exp(np.arange(math.log(64.0), math.log(s_max), 0.01)))
    return np.concatenate(parts)

def gauss_tail_nodes(s_max: float) -> np.ndarray:
    """Nodes for a density with a Gaussian tail: the tilted law keeps a unit order spread wherever its peak
    lies, so the grid stays evenly spaced up to s_max."""
    return np.concatenate([np.exp(np.arange(-30.0, 0.0, 0.025)), np.arange(1.0, s_max, 0.025)])

def gauss_tail_measure(f: Callable[[np.ndarray], np.ndarray], s_max: float) -> DiscreteMeasure:
    """The law of (S, f(S)) with density 2s e^{-s^2}, truncated at s_max."""
    s = gauss_tail_nodes(s_max)
    log_density = math.log(2) + np.log(s) - s ** 2
    nodes = np.column_stack([s, f(s)])
    return DiscreteMeasure.from_log_weights(nodes, log_density + np.log(_trapezoid_weights(s)))

class PairLaw(ABC):
    family: Family
    dim: int
    tail: TailSpec
    analytic_cgf: Optional[str] = None
    """Name of the closed form used for the cumulant generating function, if any."""

    def __init__(self, params: Dict):
        self.params = dict(params)

    # region Support geometry

    @memoized_property
    def constraints(self) -> Constraints:
        return Constraints.none(self.dim)

    @property
    def heavy(self) -> Tuple[int, ...]:
        """Indices, in (s, x) coordinates, of reward coordinates without exponential moments."""
        return ()

    def in_domain(self, p: Vector) -> bool:
        """Whether Λ(p) is finite, p being a point of (ζ, φ) coordinates."""
        return all(p[k] == 0 for k in self.heavy)

    @memoized_property
    def dual_basis(self) -> Matrix:
        """Orthonormal basis of the dual points orthogonal to the constraint rows and the heavy coordinates.

        Along constraint rows Λ is affine, along heavy coordinates it is infinite: the Legendre transform
        only needs to search the remaining directions."""
        rows = [self.constraints.matrix]
        for k in self.heavy:
            e = np.zeros((1, self.dim + 1))
            e[0, k] = 1.0
            rows.append(e)
        A = np.vstack(rows)
        if A.shape[0] == 0:
            return np.eye(self.dim + 1)
        return null_space(A)

    # endregion

    @abstractmethod
    def sample_pairs(self, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
        """``size`` i.i.d. pairs as an array of waiting times and a (size, dim) array of rewards."""

    @abstractmethod
    def log_survival(self, s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """ln P[S > s]."""

    @abstractmethod
    def mean(self) -> Optional[Tuple[float, Vector]]:
        """(E[S], E[X]), or None when some moment is not finite."""

    @memoized_property
    def measure(self) -> DiscreteMeasure:
        raise NotImplementedError(f"{self.family.value} laws have a closed form cumulant generating function")

    def measure_at(self, p: Vector) -> DiscreteMeasure:
        """The discretization to evaluate Λ at p with; laws whose tilted mass moves out with p refine it."""
        return self.measure

    def describe(self) -> Dict:
        return {"family": self.family.value, "params": _jsonable(self.params)}

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"

def _jsonable(params: Mapping):
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        out[k] = v
    return out

def _check_rate(rate) -> float:
    rate = float(rate)
    if not rate > 0 or not math.isfinite(rate):
        raise InvalidLawError(f"Exponential rate must be positive and finite, got {rate}")
    return rate

def _exponential(rng, rate, size):
    return -np.log(_open_uniform(rng, size)) / rate

def _gaussian_tail(rng, size):
    return np.sqrt(-np.log(_open_uniform(rng, size)))

class ExpUnitLaw(PairLaw):
    """Exponential waiting times with unit rewards: the counting renewal process."""
    family = Family.exp_unit
    dim = 1
    analytic_cgf = "exp_unit"

    def __init__(self, rate=1.0):
        self.rate = _check_rate(rate)
        super().__init__({"rate": self.rate})
        self.tail = TailSpec(self.rate, self.rate)

    @memoized_property
    def constraints(self):
        return Constraints(np.array([[0.0, 1.0]]), np.array([1.0]))

    def in_domain(self, p):
        return p[0] < self.rate

    def sample_pairs(self, rng, size):
        return _exponential(rng, self.rate, size), np.ones((size, 1))

    def log_survival(self, s):
        return -self.rate * np.asarray(s, dtype=float)

    def mean(self):
        return 1 / self.rate, np.ones(1)

class ExpGaussLaw(PairLaw):
    """Exponential waiting times and independent Gaussian rewards."""
    family = Family.exp_gauss
    analytic_cgf = "exp_gauss"

    def __init__(self, rate=1.0, mean=(0.0,), cov=None):
        self.rate = _check_rate(rate)
        self.m = np.atleast_1d(np.asarray(mean, dtype=float))
        self.dim = self.m.shape[0]
        if not 1 <= self.dim <= 3:
            raise InvalidLawError(f"Reward dimension must be 1, 2 or 3, got {self.dim}")
        self.cov = np.eye(self.dim) if cov is None else np.atleast_2d(np.asarray(cov, dtype=float))
        if self.cov.shape != (self.dim, self.dim):
            raise InvalidLawError(f"Covariance must be {self.dim}x{self.dim}, got shape {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T):
            raise InvalidLawError("Covariance must be symmetric")
        eigenvalues, self._eigenvectors = np.linalg.eigh(self.cov)
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        if eigenvalues.min() < -1e-12 * scale:
            raise InvalidLawError(f"Covariance is not positive semidefinite (eigenvalue {eigenvalues.min():.3g})")
        self._degenerate = eigenvalues <= 1e-12 * scale
        super().__init__({"rate": self.rate, "mean": self.m.tolist(), "cov": self.cov.tolist()})
        self.tail = TailSpec(self.rate, self.rate)

    @memoized_property
    def constraints(self):
        directions = self._eigenvectors[:, self._degenerate].T
        if directions.shape[0] == 0:
            return Constraints.none(self.dim)
        matrix = np.hstack([np.zeros((directions.shape[0], 1)), directions])
        return Constraints(matrix, directions @ self.m)

    def in_domain(self, p):
        return p[0] < self.rate

    def sample_pairs(self, rng, size):
        s = _exponential(rng, self.rate, size)
        x = rng.multivariate_normal(self.m, self.cov, size=size, method='eigh')
        return s, x.reshape(size, self.dim)

    def log_survival(self, s):
        return -self.rate * np.asarray(s, dtype=float)

    def mean(self):
        return 1 / self.rate, self.m.copy()

class GaussTailCauchyLaw(PairLaw):
    """P[S > s] = e^{-s^2} and X = (S, Z) with Z standard Cauchy, independent of S.

    No exponential moment of Z exists and ℓ_s = +∞: the upper large deviation bound fails for some
    convex sets under this law."""
    family = Family.gauss_tail_cauchy
    dim = 2
    analytic_cgf = "gauss_tail"

    def __init__(self):
        super().__init__({})
        self.tail = TailSpec(INF, INF)

    @memoized_property
    def constraints(self):
        return Constraints(np.array([[-1.0, 1.0, 0.0]]), np.array([0.0]))

    @property
    def heavy(self):
        return (2,)

    def sample_pairs(self, rng, size):
        s = _gaussian_tail(rng, size)
        z = np.tan(math.pi * (_open_uniform(rng, size) - 0.5))
        return s, np.column_stack([s, z])

    def log_survival(self, s):
        return -np.square(np.asarray(s, dtype=float))

    def mean(self):
        return None

    def waiting_tilt(self, p) -> float:
        return p[0] + p[1]

REWARD_FUNCTIONS = ("sqrt", "log1p", "power")
OSCILLATING_REWARDS = ("unit", "wait")

class RewardOfWaitLaw(PairLaw):
    """Rewards that are a sublinear function of the waiting time, X = f(S)."""
    family = Family.reward_of_wait
    dim = 1

    def __init__(self, base="exponential", rate=1.0, function="sqrt", const=1.0, power=0.5):
        if base not in ("exponential", "gauss_tail"):
            raise InvalidLawError(f"Unknown base law '{base}', expected 'exponential' or 'gauss_tail'")
        if function not in REWARD_FUNCTIONS:
            raise InvalidLawError(f"Unknown reward function '{function}', expected one of {REWARD_FUNCTIONS}")
        self.base = base
        self.function = function
        self.rate = _check_rate(rate) if base == "exponential" else None
        self.const = float(const)
        self.power = float(power)
        if function == "power" and not (self.const > 0 and 0 < self.power < 1):
            raise InvalidLawError(f"Power rewards need const > 0 and 0 < power < 1, "
                                  f"got const={self.const}, power={self.power}")
        params = {"base": base, "function": function}
        if self.rate is not None: params["rate"] = self.rate
        if function == "power": params.update(const=self.const, power=self.power)
        super().__init__(params)
        self.tail = TailSpec(self.rate, self.rate) if self.rate is not None else TailSpec(INF, INF)
        self._measures: Dict[float, DiscreteMeasure] = {}

    def f(self, s):
        if self.function == "sqrt":
            return np.sqrt(s)
        if self.function == "log1p":
            return np.log1p(s)
        return self.const * np.power(s, self.power)

    def in_domain(self, p):
        return self.rate is None or p[0] < self.rate

    def sample_pairs(self, rng, size):
        if self.rate is None:
            s = _gaussian_tail(rng, size)
        else:
            s = _exponential(rng, self.rate, size)
        return s, self.f(s).reshape(size, 1)

    def log_survival(self, s):
        s = np.asarray(s, dtype=float)
        return -np.square(s) if self.rate is None else -self.rate * s

    def mean(self):
        es = SQRT_PI_2 if self.rate is None else 1 / self.rate
        return es, self.measure.mean()[1:]

    @property
    def slope_bound(self) -> float:
        """A bound on f(s)/s for s >= 1."""
        return self.const if self.function == "power" else 1.0

    def _gauss_tail_measure(self, s_max: float) -> DiscreteMeasure:
        # one grid per power of two
        s_max = 2.0 ** math.ceil(math.log2(s_max))
        if s_max not in self._measures:
            self._measures[s_max] = gauss_tail_measure(self.f, s_max)
        return self._measures[s_max]

    def measure_at(self, p):
        if self.rate is not None:
            return self.measure
        # e^{a s - s^2} peaks at a/2 and is below e^{-1600} of its peak 40 further out
        a = max(p[0], 0.0) + max(p[1], 0.0) * self.slope_bound
        return self._gauss_tail_measure(a / 2 + GAUSS_TAIL_REACH)

    @memoized_property
    def measure(self):
        if self.rate is None:
            return self._gauss_tail_measure(GAUSS_TAIL_REACH)
        s = waiting_time_nodes(math.exp(17.0) / self.rate)
        log_density = math.log(self.rate) - self.rate * s
        nodes = np.column_stack([s, self.f(s)])
        return DiscreteMeasure.from_log_weights(nodes, log_density + np.log(_trapezoid_weights(s)))

@dataclass(frozen=True)
class HazardPieces:
    """Piecewise-linear cumulative hazard: on [start[k], start[k+1]) the hazard rate is rate[k].

    The last piece is unbounded."""
    start: np.ndarray
    cumulative: np.ndarray
    rate: np.ndarray

    @property
    def length(self):
        return np.append(np.diff(self.start), INF)

    def H(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.start, s, side='right') - 1, 0, None)
        return self.cumulative[k] + self.rate[k] * (s - self.start[k])

    def inverse(self, e):
        """Smallest s with H(s) = e, for e > 0."""
        e = np.asarray(e, dtype=float)
        k = np.clip(np.searchsorted(self.cumulative, e, side='left') - 1, 0, None)
        return self.start[k] + (e - self.cumulative[k]) / self.rate[k]

class OscillatingTailLaw(PairLaw):
    """Waiting times whose tail exponent oscillates between ℓ_s and ℓ_i.

    H(s) = -ln P[S > s] is linear between the knots 0, 1, b, b^2, ... with H(s) = ℓ_i s on [0, 1] and
    H(b^k) = ℓ_i b^k for even k, ℓ_s b^k for odd k, so H(s)/s touches ℓ_i and ℓ_s on alternating knots.
    The base b = max(2, ℓ_i/ℓ_s) keeps H nondecreasing.

    Rewards are unit (``reward="unit"``, the counting process) or the waiting time itself
    (``reward="wait"``, X = S). With unit rewards I_i = I_s = Υ(1, ·) whatever the tails."""
    family = Family.oscillating_tail
    dim = 1
    analytic_cgf = "piecewise_hazard"

    def __init__(self, ell_s=1.0, ell_i=2.0, reward="unit"):
        ell_s, ell_i = float(ell_s), float(ell_i)
        if not (0 < ell_s <= ell_i < INF):
            raise InvalidLawError(f"Oscillating tails need 0 < ell_s <= ell_i < inf, got ell_s={ell_s}, ell_i={ell_i}")
        if reward not in OSCILLATING_REWARDS:
            raise InvalidLawError(f"Unknown oscillating reward '{reward}', expected one of {OSCILLATING_REWARDS}")
        super().__init__({"ell_s": ell_s, "ell_i": ell_i, "reward": reward})
        self.tail = TailSpec(ell_i, ell_s)
        self.base = max(2.0, ell_i / ell_s)
        self.reward = reward

    @property
    def wait_reward(self) -> bool:
        return self.reward == "wait"

    @memoized_property
    def pieces(self) -> HazardPieces:
        ell_s, ell_i = self.tail.ell_s, self.tail.ell_i
        knots, values = [0.0, 1.0], [0.0, ell_i]
        k = 0
        # beyond H ~ 800 no double precision survival is left
        while values[-1] < 800.0 or k % 2 == 1:
            k += 1
            knot = self.base ** k
            knots.append(knot)
            values.append((ell_i if k % 2 == 0 else ell_s) * knot)
        knots, values = np.array(knots), np.array(values)
        rates = np.append(np.diff(values) / np.diff(knots), ell_i)
        return HazardPieces(knots, values, rates)

    @memoized_property
    def constraints(self):
        if self.wait_reward:
            return Constraints(np.array([[1.0, -1.0]]), np.array([0.0]))
        return Constraints(np.array([[0.0, 1.0]]), np.array([1.0]))

    def waiting_tilt(self, p) -> float:
        """The exponent of e^{ζ S + φ X} as a multiple of S."""
        return p[0] + p[1] if self.wait_reward else p[0]

    def in_domain(self, p):
        return self.waiting_tilt(p) < self.tail.ell_s

    def sample_pairs(self, rng, size):
        e = -np.log(_open_uniform(rng, size))
        s = self.pieces.inverse(e)
        return s, (s[:, None].copy() if self.wait_reward else np.ones((size, 1)))

    def log_survival(self, s):
        return -self.pieces.H(s)

    def mean(self):
        pieces = self.pieces
        # E[S] = ∫ e^{-H}: each piece integrates in closed form
        total = 0.0
        for start, h0, rate, length in zip(pieces.start, pieces.cumulative, pieces.rate, pieces.length):
            if rate == 0:
                total += math.exp(-h0) * length
            else:
                total += math.exp(-h0) * -math.expm1(-rate * length) / rate
        return total, np.array([total if self.wait_reward else 1.0])

class EmpiricalLaw(PairLaw):
    """The empirical measure of an ingested sample file; resampling draws pairs uniformly from it."""
    family = Family.empirical

    def __init__(self, s: np.ndarray, x: np.ndarray, path: Optional[Path] = None):
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float).reshape(s.shape[0], -1)
        if s.shape[0] < 2:
            raise InvalidLawError("Empirical laws need at least two samples")
        if np.any(s <= 0) or not np.all(np.isfinite(s)) or not np.all(np.isfinite(x)):
            raise InvalidLawError("Empirical samples must have s > 0 and finite rewards")
        self.s, self.x = s, x
        self.dim = x.shape[1]
        if not 1 <= self.dim <= 3:
            raise InvalidLawError(f"Reward dimension must be 1, 2 or 3, got {self.dim}")
        params = {"n": int(s.shape[0])}
        if path is not None:
            params.update(path=str(path), sha256=filehash(path))
        super().__init__(params)
        self.tail = estimate_empirical_tail(s)

    @classmethod
    def from_file(cls, path: Union[Path, str]):
        path = ensure_path(path)
        s, x = load_samples(path)
        return cls(s, x, path=path)

    @memoized_property
    def constraints(self):
        nodes = np.column_stack([self.s, self.x])
        center = nodes.mean(axis=0)
        centered = nodes - center
        _, singular, vt = np.linalg.svd(centered, full_matrices=True)
        scale = max(1.0, float(singular[0])) if singular.size else 1.0
        rank = int(np.sum(singular > 1e-10 * scale))
        directions = vt[rank:]
        if directions.shape[0] == 0:
            return Constraints.none(self.dim)
        return Constraints(directions, directions @ center)

    def sample_pairs(self, rng, size):
        idx = rng.integers(0, self.s.shape[0], size=size)
        return self.s[idx], self.x[idx]

    def log_survival(self, s):
        s_sorted = np.sort(self.s)
        count = self.s.shape[0] - np.searchsorted(s_sorted, np.asarray(s, dtype=float), side='right')
        with np.errstate(divide='ignore'):
            return np.log(count / self.s.shape[0])

    def mean(self):
        return float(self.s.mean()), self.x.mean(axis=0)

    @memoized_property
    def measure(self):
        n = self.s.shape[0]
        return DiscreteMeasure.from_log_weights(np.column_stack([self.s, self.x]), np.full(n, -math.log(n)))

def estimate_empirical_tail(s: np.ndarray) -> TailSpec:
    """Least-squares slope of -ln(survival) against s on the top decile of the samples."""
    s_sorted = np.sort(s)
    n = s_sorted.shape[0]
    start = int(0.9 * n)
    # the largest sample has zero empirical survival
    top = s_sorted[start:n - 1]
    survival = (n - np.arange(start, n - 1) - 1) / n
    if top.shape[0] < 3 or np.ptp(top) == 0:
        logger.warning("Too few distinct tail samples to estimate tail exponents")
        return TailSpec(INF, INF, estimated=True, low_confidence=True)
    slope = float(np.polyfit(top, -np.log(survival), 1)[0])
    if not slope > 0:
        logger.warning(f"Non-positive tail slope {slope:.3g}, tail exponents set to +inf")
        return TailSpec(INF, INF, estimated=True, low_confidence=True)
    return TailSpec(slope, slope, estimated=True, low_confidence=True)

def load_samples(path: Union[Path, str]) -> Tuple[np.ndarray, np.ndarray]:
    """Reads a ``s,x1[,x2[,x3]]`` CSV file."""
    path = ensure_path(path)
    with path.open('r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidLawError(f"{path} is empty")
        expected = ["s"] + [f"x{i}" for i in range(1, len(header))]
        if header != expected or not 2 <= len(header) <= 4:
            raise InvalidLawError(f"{path}: header must be 's,x1[,x2[,x3]]', got '{','.join(header)}'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidLawError(f"{path}:{lineno}: expected {len(header)} values, got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise InvalidLawError(f"{path}:{lineno}: values must be numbers with '.' as decimal separator")
            if not values[0] > 0 or not all(map(math.isfinite, values)):
                raise InvalidLawError(f"{path}:{lineno}: need s > 0 and finite values")
            rows.append(values)
    if not rows:
        raise InvalidLawError(f"{path} has no samples")
    data = np.array(rows)
    return data[:, 0], data[:, 1:]

_FAMILIES = {
    Family.exp_unit:          ExpUnitLaw,
    Family.exp_gauss:         ExpGaussLaw,
    Family.gauss_tail_cauchy: GaussTailCauchyLaw,
    Family.reward_of_wait:    RewardOfWaitLaw,
    Family.oscillating_tail:  OscillatingTailLaw,
}

def make_law(family: Union[Family, str], params: Mapping = None, **kwargs) -> PairLaw:
    """Builds a law from its family tag and parameters, e.g. ``make_law("exp_unit", rate=1)``."""
    try:
        family = Family(family)
    except ValueError:
        raise InvalidLawError(f"Unknown law family '{family}', expected one of {[f.value for f in Family]}")
    params = {**(params or {}), **kwargs}
    if family == Family.empirical:
        if "path" in params:
            return EmpiricalLaw.from_file(params["path"])
        if "s" in params and "x" in params:
            return EmpiricalLaw(params["s"], params["x"])
        raise InvalidLawError("Empirical laws need a sample file 'path'")
    try:
        return _FAMILIES[family](**params)
    except TypeError as e:
        raise InvalidLawError(f"Invalid parameters for {family.value}: {e}")

def sample_pairs(law: PairLaw, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    return law.sample_pairs(rng, size)

def sample_pair(law: PairLaw, rng: np.random.Generator) -> Sample:
    s, x = law.sample_pairs(rng, 1)
    return Sample(float(s[0]), x[0].copy())

def law_mean(law: PairLaw) -> Optional[Tuple[float, Vector]]:
    """(E[S], E[X]), or None ("undefined") when a reward coordinate has no mean."""
    return law.mean()

def mean_ratio(law: PairLaw) -> Optional[Vector]:
    """E[X]/E[S], the law of large numbers limit of W_t/t."""
    m = law.mean()
    if m is None:
        return None
    return m[1] / m[0]
