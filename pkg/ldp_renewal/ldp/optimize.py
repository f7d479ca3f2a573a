"""One-dimensional convex minimization and concave maximization in a trust ball.

`golden_section` is the usual three-point scheme, with the bracket endpoints kept and checked so that a
non-unimodal objective is reported instead of silently returning a wrong minimum.
"""
import logging
from dataclasses import dataclass

import math
import numpy as np
from scipy.optimize import minimize
from typing import Callable, Optional, Tuple

from .common import INF, Matrix, Vector
from .exceptions import UnimodalityError

logger = logging.getLogger(__name__)

INV_PHI = 2 / (1 + math.sqrt(5))
UNIMODAL_NOISE = 1e-7

@dataclass(frozen=True)
class GoldenResult:
    x: float
    fx: float
    iterations: int
    converged: bool
    unimodal: bool = True

def _unimodality_violation(xs, fs, noise) -> Optional[str]:
    for (x0, f0), (x1, f1), (x2, f2) in zip(zip(xs, fs), zip(xs[1:], fs[1:]), zip(xs[2:], fs[2:])):
        top = max(f0, f2)
        if f1 > top + noise * (1 + abs(top)) and not math.isinf(top):
            return f"f({x1:.10g}) = {f1:.10g} exceeds both f({x0:.10g}) = {f0:.10g} and f({x2:.10g}) = {f2:.10g}"
        if math.isinf(f1) and not (math.isinf(f0) or math.isinf(f2)):
            return f"f is infinite at {x1:.10g} but finite at {x0:.10g} and {x2:.10g}"
    return None

def golden_section(f: Callable[[float], float], lo: float, hi: float, xtol: float,
                   max_iterations=500, noise=UNIMODAL_NOISE, strict=True) -> GoldenResult:
    """Minimizes a unimodal, possibly extended-valued, function on [lo, hi].

    ``noise`` is the relative error tolerated in f before three points count as a unimodality violation.
    A violation raises `UnimodalityError` when ``strict``; otherwise the search goes on, keeps the best point
    seen and reports ``unimodal=False``."""
    if not lo <= hi:
        raise ValueError(f"Empty bracket [{lo}, {hi}]")
    a, b = lo, hi
    fa, fb = f(a), f(b)
    if b - a <= xtol:
        return GoldenResult(*min((fa, a), (fb, b))[::-1], 0, True)
    x1, x2 = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    best = min((f1, x1), (f2, x2), (fa, a), (fb, b))
    unimodal = True
    iterations = 0
    while b - a > xtol and iterations < max_iterations:
        violation = _unimodality_violation((a, x1, x2, b), (fa, f1, f2, fb), noise)
        if violation is not None:
            if strict:
                raise UnimodalityError(violation)
            if unimodal:
                logger.debug(f"Golden section on a noisy objective: {violation}")
            unimodal = False
        if f1 < f2 or (f1 == f2 and fa <= fb):
            b, fb = x2, f2
            x2, f2 = x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
            best = min(best, (f1, x1))
        else:
            a, fa = x1, f1
            x1, f1 = x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
            best = min(best, (f2, x2))
        iterations += 1
    fx, x = min(best, (f1, x1), (f2, x2), (fa, a), (fb, b))
    return GoldenResult(x, fx, iterations, b - a <= xtol, unimodal)

@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    hit_limit: bool
    evaluations: int

def bracket_log(g: Callable[[float], float], t0: float, log_limit: float, step=math.log(2)) -> Bracket:
    """Brackets the minimum of a convex g by walking from t0 in steps of ``step`` (doubling or halving
    when t is a logarithm), never further than ``log_limit`` from t0."""
    evaluations = 0

    def G(t):
        nonlocal evaluations
        evaluations += 1
        return g(t)

    g0 = G(t0)
    if math.isinf(g0):
        # look for any finite value, alternating sides
        for k in range(1, int(log_limit / step) + 1):
            for t in (t0 + k * step, t0 - k * step):
                if not math.isinf(G(t)):
                    return bracket_log(g, t, log_limit - k * step, step)
        return Bracket(t0 - log_limit, t0 + log_limit, True, evaluations)

    g_up = G(t0 + step)
    if g_up < g0:
        direction, prev, current, g_current = 1, t0, t0 + step, g_up
    else:
        g_down = G(t0 - step)
        if g_down >= g0:
            return Bracket(t0 - step, t0 + step, False, evaluations)
        direction, prev, current, g_current = -1, t0, t0 - step, g_down

    while True:
        nxt = current + direction * step
        if abs(nxt - t0) > log_limit:
            logger.debug(f"Bracket reached the search limit at t={current:.6g}")
            lo, hi = sorted((prev, t0 + direction * log_limit))
            return Bracket(lo, hi, True, evaluations)
        g_next = G(nxt)
        if g_next >= g_current:
            lo, hi = sorted((prev, nxt))
            return Bracket(lo, hi, False, evaluations)
        prev, current, g_current = current, nxt, g_next

Evaluation = Optional[Tuple[float, Vector, Matrix]]

@dataclass(frozen=True)
class ConcaveMax:
    x: Vector
    value: float
    grad: Vector
    iterations: int
    converged: bool
    at_boundary: bool
    outward_slope: float = 0.0

def _ascent_direction(g: Vector, H: Matrix) -> Vector:
    """Levenberg-damped Newton direction for a concave objective, steepest ascent as last resort."""
    n = g.shape[0]
    A = -H
    mu = 1e-12 * (1 + abs(np.trace(A)))
    for _ in range(12):
        try:
            L = np.linalg.cholesky(A + mu * np.eye(n))
            d = np.linalg.solve(L.T, np.linalg.solve(L, g))
            if np.all(np.isfinite(d)) and g @ d > 0:
                return d
        except np.linalg.LinAlgError:
            pass
        mu = max(mu * 100, 1e-10)
    return g.copy()

def _project(x: Vector, radius: float) -> Vector:
    norm = np.linalg.norm(x)
    return x if norm <= radius else x * (radius / norm)

def maximize_concave(fun: Callable[[Vector], Evaluation], x0: Vector, radius: float, gtol: float,
                     max_iterations: int, outward_slope: float) -> ConcaveMax:
    """Damped Newton ascent of a concave function on the ball ‖x‖ <= radius.

    ``fun`` returns value, gradient and Hessian, or None where the function is -∞. ``x0`` must be a point
    where it is finite. Steps are backtracked (Armijo) and projected back on the ball; a maximizer on
    the sphere with an outward slope above ``outward_slope`` is reported with ``at_boundary`` set."""
    x = np.asarray(x0, dtype=float)
    current = fun(x)
    if current is None:
        raise ValueError(f"Starting point {x} is outside the domain")
    f, g, H = current
    iterations = 0
    stalled = False
    while iterations < max_iterations:
        on_sphere = np.linalg.norm(x) >= radius * (1 - 1e-12)
        slope = float(g @ x / np.linalg.norm(x)) if on_sphere else 0.0
        g_free = g - slope * x / np.linalg.norm(x) if on_sphere and slope > 0 else g
        if np.linalg.norm(g_free) <= gtol:
            break
        d = _ascent_direction(g, H)
        t = 1.0
        while True:
            candidate = _project(x + t * d, radius)
            trial = fun(candidate)
            if trial is not None and trial[0] >= f + 1e-4 * (g @ (candidate - x)) and trial[0] >= f:
                break
            t /= 2
            if t < 1e-14:
                trial = None
                break
        iterations += 1
        if trial is None or np.array_equal(candidate, x):
            stalled = True
            break
        improvement = trial[0] - f
        x = candidate
        f, g, H = trial
        if on_sphere and improvement <= 1e-15 * (1 + abs(f)):
            break

    norm = np.linalg.norm(x)
    on_sphere = norm >= radius * (1 - 1e-9)
    slope = float(g @ x / norm) if on_sphere else 0.0
    at_boundary = on_sphere and slope > outward_slope
    g_free = g - slope * x / norm if on_sphere and slope > 0 else g
    converged = bool(np.linalg.norm(g_free) <= gtol) and not at_boundary
    if stalled and not at_boundary and np.linalg.norm(g_free) > 1e3 * gtol:
        logger.debug(f"Newton ascent stalled with gradient norm {np.linalg.norm(g_free):.3g}, trying Nelder-Mead")
        fallback = _nelder_mead(fun, x, radius, gtol)
        if fallback is not None and fallback.value > f:
            return fallback
    return ConcaveMax(x, f, g, iterations, converged, at_boundary, slope)

def _nelder_mead(fun, x0, radius, gtol) -> Optional[ConcaveMax]:
    def negative(x):
        if np.linalg.norm(x) > radius:
            return INF
        ev = fun(x)
        return INF if ev is None else -ev[0]

    res = minimize(negative, x0, method='Nelder-Mead',
                   options={'xatol': 1e-10, 'fatol': 1e-12, 'maxiter': 4000 * x0.shape[0]})
    ev = fun(res.x) if np.linalg.norm(res.x) <= radius else None
    if ev is None:
        return None
    f, g, _ = ev
    return ConcaveMax(res.x, f, g, int(res.nit), bool(np.linalg.norm(g) <= gtol), False)
