"""Monte Carlo estimation of renewal-reward event probabilities.

Every estimate is cut into chunks of ``chunk_runs`` runs; chunk c of an estimate with key k draws from
``Generator(PCG64(SeedSequence(seed, spawn_key=(*k, c))))`` and partial counts are added in chunk order,
so an estimate only depends on (seed, key, n_runs, chunk_runs) and never on the number of workers.
"""
import logging
import multiprocessing
from dataclasses import dataclass

import math
import numpy as np
from scipy.stats import beta as beta_dist
from typing import Callable, List, Optional, Sequence, Tuple

from .common import INF, ProgressBar, Vector, encode_real, decode_real
from .exceptions import DimensionError, InsufficientSamplesError, SimulationError
from .model import PairLaw
from .parameters import SimulationParameters
from .sets import SetDescriptor, SetKind

logger = logging.getLogger(__name__)

MIN_RUNS = 100
MAX_BLOCK_DRAWS = 20_000_000

def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))

@dataclass(frozen=True)
class Trajectory:
    t: float
    n_t: int
    w_t: Vector
    t_last: float

@dataclass(frozen=True)
class TrajectoryBatch:
    t: float
    n_t: np.ndarray
    w_t: np.ndarray
    t_last: np.ndarray

    def __len__(self):
        return self.n_t.shape[0]

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(self.t, int(self.n_t[i]), self.w_t[i].copy(), float(self.t_last[i]))

def _block_size(law: PairLaw, t: float, rows: int) -> int:
    mean = law.mean()
    expected = t / mean[0] if mean is not None else t / 0.5
    block = int(min(max(16, math.ceil(1.25 * expected + 10)), 1_000_000))
    return max(1, min(block, MAX_BLOCK_DRAWS // max(rows, 1)))

def simulate_batch(law: PairLaw, t: float, n_runs: int, rng: np.random.Generator,
                   max_renewals=1_000_000_000) -> TrajectoryBatch:
    """Runs ``n_runs`` independent trajectories up to time t, drawing pairs in blocks per run."""
    if not t > 0:
        raise ValueError(f"Time horizon must be positive, got {t}")
    n_t = np.zeros(n_runs, dtype=np.int64)
    w_t = np.zeros((n_runs, law.dim))
    t_last = np.zeros(n_runs)
    elapsed = np.zeros(n_runs)
    active = np.arange(n_runs)
    while active.size:
        block = _block_size(law, t - float(elapsed[active].min()), active.size)
        s, x = law.sample_pairs(rng, active.size * block)
        s = s.reshape(active.size, block)
        x = x.reshape(active.size, block, law.dim)
        T = elapsed[active, None] + np.cumsum(s, axis=1)
        within = T <= t
        k = within.sum(axis=1)
        n_t[active] += k
        w_t[active] += np.where(within[..., None], x, 0.0).sum(axis=1)
        renewed = k > 0
        t_last[active[renewed]] = T[renewed, k[renewed] - 1]
        elapsed[active] = T[:, -1]
        if np.any(n_t[active] > max_renewals):
            raise SimulationError(f"A trajectory exceeded {max_renewals} renewals before t={t}")
        active = active[k == block]
    return TrajectoryBatch(t, n_t, w_t, t_last)

def simulate_trajectory(law: PairLaw, t: float, rng: np.random.Generator, max_renewals=1_000_000_000) -> Trajectory:
    return simulate_batch(law, t, 1, rng, max_renewals)[0]

# region Probability estimates

def clopper_pearson(hits: int, n: int, confidence: float = 0.99) -> Tuple[float, float]:
    """Exact binomial confidence interval."""
    if not 0 <= hits <= n or n < 1:
        raise ValueError(f"Need 0 <= hits <= n and n >= 1, got hits={hits}, n={n}")
    alpha = 1 - confidence
    lo = 0.0 if hits == 0 else float(beta_dist.ppf(alpha / 2, hits, n - hits + 1))
    if hits == 0:
        hi = 1 - (alpha / 2) ** (1 / n)
    elif hits == n:
        hi = 1.0
    else:
        hi = float(beta_dist.ppf(1 - alpha / 2, hits + 1, n - hits))
    return lo, hi

@dataclass(frozen=True)
class ProbEstimate:
    p_hat: float
    ci_lo: float
    ci_hi: float
    n_runs: int
    hits: int
    confidence: float = 0.99

    @classmethod
    def from_counts(cls, hits: int, n_runs: int, confidence: float):
        lo, hi = clopper_pearson(hits, n_runs, confidence)
        return cls(hits / n_runs, lo, hi, n_runs, hits, confidence)

def _chunks(n_runs: int, chunk_runs: int) -> List[int]:
    sizes = [chunk_runs] * (n_runs // chunk_runs)
    if n_runs % chunk_runs:
        sizes.append(n_runs % chunk_runs)
    return sizes

def _run_jobs(fn: Callable, jobs: Sequence, workers: int, progress: bool) -> List:
    bar = ProgressBar(len(jobs)) if progress else None
    results = []
    if workers <= 1 or len(jobs) <= 1:
        iterator = map(fn, jobs)
        pool = None
    else:
        pool = multiprocessing.Pool(min(workers, len(jobs)))
        iterator = pool.imap(fn, jobs)
    try:
        for r in iterator:
            results.append(r)
            if bar: bar.next()
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return results

def _event_hits(job) -> int:
    law, t, set_, seed, key, size, max_renewals = job
    batch = simulate_batch(law, t, size, stream(seed, *key), max_renewals)
    return int(np.count_nonzero(set_.contains(batch.w_t / t)))

def _check_runs(n_runs):
    if n_runs < MIN_RUNS:
        raise InsufficientSamplesError(f"At least {MIN_RUNS} runs are needed, got {n_runs}")

def estimate_prob(law: PairLaw, t: float, set_: SetDescriptor, n_runs: int, seed: int, key: Tuple[int, ...] = (),
                  sim: SimulationParameters = None, progress=False) -> ProbEstimate:
    """Monte Carlo frequency of {W_t/t ∈ set} with its Clopper-Pearson interval."""
    sim = sim if sim is not None else SimulationParameters()
    _check_runs(n_runs)
    if set_.dim != law.dim:
        raise DimensionError(f"Set dimension {set_.dim} does not match the law's reward dimension {law.dim}")
    sizes = _chunks(n_runs, sim.chunk_runs)
    jobs = [(law, t, set_, seed, (*key, c), size, sim.max_renewals) for c, size in enumerate(sizes)]
    logger.info(f"Estimating P[W_t/t ∈ {set_.kind.value}] at t={t:g} with {n_runs} runs "
                f"({len(jobs)} chunks, seed={seed}, key={key})")
    hits = sum(_run_jobs(_event_hits, jobs, sim.workers, progress))
    estimate = ProbEstimate.from_counts(hits, n_runs, sim.confidence)
    logger.info(f"t={t:g}: {hits}/{n_runs} hits, p_hat={estimate.p_hat:.6g}")
    return estimate

@dataclass(frozen=True)
class RateCurveEntry:
    t: float
    p_hat: float
    ci_lo: float
    ci_hi: float
    rate: Optional[float]
    rate_lo: float
    rate_hi: float
    hits: int
    n_runs: int

    @classmethod
    def from_estimate(cls, t: float, e: ProbEstimate):
        # + 0.0 turns -0.0 into 0.0
        rate = -math.log(e.p_hat) / t + 0.0 if e.hits > 0 else None
        rate_lo = -math.log(e.ci_hi) / t if e.ci_hi < 1 else 0.0
        rate_hi = -math.log(e.ci_lo) / t if e.ci_lo > 0 else INF
        return cls(t, e.p_hat, e.ci_lo, e.ci_hi, rate, rate_lo, rate_hi, e.hits, e.n_runs)

    @property
    def width(self) -> float:
        return self.rate_hi - self.rate_lo

    def encode(self):
        return {k: encode_real(v) if isinstance(v, float) else v for k, v in self.__dict__.items()}

    @classmethod
    def decode(cls, serial):
        return cls(decode_real(serial["t"]), decode_real(serial["p_hat"]), decode_real(serial["ci_lo"]),
                   decode_real(serial["ci_hi"]), decode_real(serial["rate"]), decode_real(serial["rate_lo"]),
                   decode_real(serial["rate_hi"]), int(serial["hits"]), int(serial["n_runs"]))

def _check_grid(t_grid: Sequence[float]):
    if len(t_grid) == 0:
        raise ValueError("The time grid is empty")
    if any(t <= 0 for t in t_grid) or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError(f"The time grid must be increasing and positive, got {list(t_grid)}")

def rate_trend(entries: Sequence[RateCurveEntry]) -> str:
    rates = [e.rate for e in entries if e.rate is not None]
    if len(rates) < 2:
        return "undetermined"
    diffs = np.diff(rates)
    if np.all(diffs <= 0): return "decreasing"
    if np.all(diffs >= 0): return "increasing"
    return "mixed"

def empirical_rate_curve(law: PairLaw, set_: SetDescriptor, t_grid: Sequence[float], n_runs: int, seed: int,
                         key: Tuple[int, ...] = (), sim: SimulationParameters = None,
                         progress=False) -> List[RateCurveEntry]:
    """-(1/t) ln P[W_t/t ∈ set] with Clopper-Pearson bands, one independent estimate per t."""
    _check_grid(t_grid)
    entries = []
    for i, t in enumerate(t_grid):
        estimate = estimate_prob(law, t, set_, n_runs, seed, (*key, i), sim, progress)
        entries.append(RateCurveEntry.from_estimate(t, estimate))
    logger.info(f"Empirical rate trend over t={list(t_grid)}: {rate_trend(entries)}")
    return entries

def _pair_average_hits(job) -> int:
    law, n, set_, seed, key, size = job
    rng = stream(seed, *key)
    s, x = law.sample_pairs(rng, size * n)
    averages = np.column_stack([s.reshape(size, n).mean(axis=1), x.reshape(size, n, law.dim).mean(axis=1)])
    return int(np.count_nonzero(set_.contains(averages)))

def estimate_mu_n(law: PairLaw, n: int, set_: SetDescriptor, n_runs: int, seed: int, key: Tuple[int, ...] = (),
                  sim: SimulationParameters = None, progress=False) -> ProbEstimate:
    """Monte Carlo estimate of P[(1/n) Σ_{i<=n} (S_i, X_i) ∈ set] for an interval × set product."""
    sim = sim if sim is not None else SimulationParameters()
    _check_runs(n_runs)
    if n < 1:
        raise ValueError(f"Need n >= 1 pairs per average, got {n}")
    if set_.kind != SetKind.box_product:
        raise ValueError(f"Pair averages are tested against box products, got {set_.kind.value}")
    if set_.dim != law.dim + 1:
        raise DimensionError(f"Set dimension {set_.dim} does not match the pair dimension {law.dim + 1}")
    # chunks are smaller for long averages to keep memory bounded
    chunk = max(1, min(sim.chunk_runs, MAX_BLOCK_DRAWS // n))
    jobs = [(law, n, set_, seed, (*key, c), size) for c, size in enumerate(_chunks(n_runs, chunk))]
    hits = sum(_run_jobs(_pair_average_hits, jobs, sim.workers, progress))
    return ProbEstimate.from_counts(hits, n_runs, sim.confidence)

# endregion

# region Replays

@dataclass(frozen=True)
class Replay:
    """A trajectory together with its pairs, including the first pair ending after t."""
    t: float
    s: np.ndarray
    x: np.ndarray
    n_t: int

    @property
    def renewal_times(self) -> np.ndarray:
        """T_0 = 0, T_1, ..., T_{n_t + 1}."""
        return np.concatenate([[0.0], np.cumsum(self.s)])

    def reward(self, n: int) -> Vector:
        return self.x[:n].sum(axis=0)

def replay_trajectory(law: PairLaw, t: float, rng: np.random.Generator, block=64) -> Replay:
    s_parts, x_parts, total = [], [], 0.0
    while True:
        s, x = law.sample_pairs(rng, block)
        s_parts.append(s)
        x_parts.append(x)
        T = total + np.cumsum(s)
        over = np.flatnonzero(T > t)
        if over.size:
            s_all = np.concatenate(s_parts)
            cut = s_all.shape[0] - block + over[0] + 1
            return Replay(t, s_all[:cut], np.concatenate(x_parts)[:cut], cut - 1)
        total = T[-1]

@dataclass(frozen=True)
class DecompositionCheck:
    n_traj: int
    events: int
    mismatches: int

    @property
    def ok(self):
        return self.mismatches == 0

def decomposition_check(law: PairLaw, t: float, set_: SetDescriptor, p: int, q: int, n_traj: int,
                        seed: int) -> DecompositionCheck:
    """Checks, trajectory by trajectory, that {W_t/t ∈ A, T_p <= t < T_q} is the disjoint union over
    p <= n < q of {(1/t) Σ_{i<=n} X_i ∈ A, T_n <= t < T_{n+1}}."""
    if not 0 <= p < q:
        raise ValueError(f"Need 0 <= p < q, got p={p}, q={q}")
    rng = stream(seed, 0xDEC)
    events = mismatches = 0
    for _ in range(n_traj):
        r = replay_trajectory(law, t, rng)
        T = r.renewal_times

        def renewal(j):
            return T[j] if j < T.shape[0] else INF

        lhs = bool(set_.contains(r.reward(r.n_t) / t)) and renewal(p) <= t < renewal(q)
        cells = sum(1 for n in range(p, q)
                    if renewal(n) <= t < renewal(n + 1) and set_.contains(r.reward(n) / t))
        events += lhs
        if cells > 1 or lhs != (cells == 1):
            mismatches += 1
    return DecompositionCheck(n_traj, events, mismatches)

@dataclass(frozen=True)
class CellPartitionCheck:
    n_traj: int
    exactly_one: int
    renewals_histogram: dict

    @property
    def ok(self):
        return self.exactly_one == self.n_traj

def cell_partition_check(law: PairLaw, t: float, n_traj: int, seed: int) -> CellPartitionCheck:
    """Every trajectory lies in exactly one cell {T_n <= t < T_{n+1}}, n >= 0, T_0 = 0."""
    rng = stream(seed, 0xCE11)
    exactly_one = 0
    histogram = {}
    for _ in range(n_traj):
        r = replay_trajectory(law, t, rng)
        T = r.renewal_times
        cells = [n for n in range(T.shape[0] - 1) if T[n] <= t < T[n + 1]]
        exactly_one += len(cells) == 1
        if cells:
            histogram[cells[0]] = histogram.get(cells[0], 0) + 1
    return CellPartitionCheck(n_traj, exactly_one, dict(sorted(histogram.items())))

# endregion
