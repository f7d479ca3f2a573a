"""Rate functions of renewal-reward processes.

* ``J(s, w) = sup_{ζ, φ} {sζ + φ·w - Λ(ζ, φ)}``, the Cramér rate of the pair averages,
* ``Υ(β, w) = inf_{γ > 0} γ J(β/γ, w/γ)``, its perspective,
* ``I(w) = inf_{β ∈ [0, 1]} {Υ(β, w) + (1 - β) ℓ}``, with ℓ the lower (ℓ_i) or upper (ℓ_s) tail exponent of
  the waiting times; I(w) = Υ(1, w) when ℓ = +∞.

Supremums are computed in the reduced dual space of the law (see `PairLaw.dual_basis`); points outside
the affine hull of the support get J = +∞ without any search.
"""
import logging
from dataclasses import dataclass, field

import math
import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize, minimize_scalar
from typing import Dict, List, Optional, Sequence, Tuple

from .cgf import evaluate
from .common import INF, Vector, as_vector, encode_real, ext_add, is_inf
from .exceptions import DimensionError
from .model import PairLaw, mean_ratio
from .optimize import bracket_log, golden_section, maximize_concave
from .parameters import RateParameters
from .sets import SetDescriptor, SetKind, dykstra

logger = logging.getLogger(__name__)

ENVELOPE_LABEL = "envelope-estimate"
LOWER_BOUND_LABEL = "lower-bound"
UNCERTIFIED_LABEL = "uncertified"

@dataclass
class RateValue:
    value: float
    converged: bool = True
    iterations: int = 0
    argmax_dual: Optional[Vector] = None
    argmin_gamma: Optional[float] = None
    argmin_beta: Optional[float] = None
    argmin_w: Optional[Vector] = None
    label: Optional[str] = None
    near_boundary: bool = False

    def __post_init__(self):
        if self.value < 0:
            self.value = 0.0

    @property
    def is_infinite(self):
        return is_inf(self.value)

    def encode(self):
        def vec(v): return None if v is None else [float(x) for x in v]
        return {
            "value":        encode_real(self.value),
            "converged":    self.converged,
            "iterations":   self.iterations,
            "argmax_dual":  vec(self.argmax_dual),
            "argmin_gamma": encode_real(self.argmin_gamma),
            "argmin_beta":  encode_real(self.argmin_beta),
            "argmin_w":     vec(self.argmin_w),
            "label":        self.label,
            "near_boundary": self.near_boundary,
        }

def _params(params: Optional[RateParameters]) -> RateParameters:
    return params if params is not None else RateParameters()

# region J

@dataclass
class _DualSup:
    value: float
    x: Vector
    converged: bool
    at_boundary: bool
    iterations: int

def _dual_sup(law: PairLaw, tau: Vector, scale: float, params: RateParameters,
              start: Optional[Vector] = None) -> _DualSup:
    """sup_p {τ·p - scale·Λ(p)} over the reduced dual space, i.e. scale·J(τ/scale)."""
    B = law.dual_basis
    if B.shape[1] == 0:
        return _DualSup(0.0, np.zeros(0), True, False, 0)
    heavy = list(law.heavy)
    tau_b = B.T @ tau

    def point(r):
        p = B @ r
        p[heavy] = 0.0
        return p

    def fun(r):
        ev = evaluate(law, point(r))
        if ev is None:
            return None
        v, g, H = ev
        return tau_b @ r - scale * v, tau_b - scale * (B.T @ g), -scale * (B.T @ H @ B)

    if start is None or fun(start) is None:
        start = np.zeros(B.shape[1])
    tau_norm = np.linalg.norm(tau)
    res = maximize_concave(fun, start, params.trust_radius, params.gradient_tol * (scale + tau_norm),
                           params.max_newton_iterations, params.outward_slope)
    # first order certificate, heavy coordinates excluded by construction of the basis
    certificate = np.linalg.norm(res.grad)
    converged = not res.at_boundary and certificate <= params.certificate_tol * (scale + tau_norm)
    if res.at_boundary:
        logger.debug(f"Dual search hit the trust radius at τ={tau}, scale={scale:.6g}: value is a lower bound")
    return _DualSup(max(res.value, 0.0), res.x, converged, res.at_boundary, res.iterations)

def cramer_j(law: PairLaw, s: float, w, params: RateParameters = None) -> RateValue:
    params = _params(params)
    w = as_vector(w, law.dim)
    if not s > 0:
        return RateValue(INF)
    tau = np.concatenate([[s], w])
    if law.constraints.residual(tau) > params.affine_tol * (1 + np.linalg.norm(tau)):
        return RateValue(INF)
    sup = _dual_sup(law, tau, 1.0, params)
    dual = law.dual_basis @ sup.x if sup.x.size else np.zeros(law.dim + 1)
    return RateValue(sup.value, sup.converged, sup.iterations, argmax_dual=dual,
                     label=LOWER_BOUND_LABEL if sup.at_boundary else None)

# endregion

# region Υ

def _pinned_gamma(law: PairLaw, tau: Vector, params: RateParameters) -> Tuple[bool, Optional[float]]:
    """Splits constraint rows into M_0 τ = 0 (any γ) and M_1 τ = γ b (a single γ).

    Returns whether τ is compatible with the constraints and the pinned γ, if any."""
    constraints = law.constraints
    if len(constraints) == 0:
        return True, None
    M, b = constraints.matrix, constraints.rhs
    image = M @ tau
    tol = params.affine_tol * (1 + np.linalg.norm(tau))
    if not np.any(b != 0):
        return bool(np.linalg.norm(image) <= tol), None
    gamma = float(image @ b / (b @ b))
    if np.linalg.norm(image - gamma * b) > tol or not gamma > 0:
        return False, None
    return True, gamma

def _pinned_beta(law: PairLaw, w: Vector, params: RateParameters) -> Tuple[bool, Optional[float]]:
    """Homogeneous constraint rows with a waiting time component fix β: M_0 (β, w) = 0.

    Returns whether w is compatible with the homogeneous rows and the pinned β, if any."""
    constraints = law.constraints
    if len(constraints) == 0:
        return True, None
    M0 = constraints.matrix[constraints.rhs == 0]
    if M0.shape[0] == 0 or not np.any(M0[:, 0] != 0):
        return True, None
    a, r = M0[:, 0], -(M0[:, 1:] @ w)
    beta = float(a @ r / (a @ a))
    if np.linalg.norm(a * beta - r) > params.affine_tol * (1 + np.linalg.norm(w)):
        return False, None
    return True, beta

def perspective_min(law: PairLaw, beta: float, w, params: RateParameters = None, probe=False) -> RateValue:
    """Υ(β, w) = inf_γ γ J(β/γ, w/γ) for β > 0, evaluated at w itself.

    With ``probe`` the value is compared with the values on a small ball around w and flagged
    ``near_boundary`` when those are lower by more than the probe radius."""
    params = _params(params)
    if not beta > 0:
        raise ValueError(f"The perspective minimization needs beta > 0, got {beta}")
    w = as_vector(w, law.dim)
    result = _perspective(law, np.concatenate([[beta], w]), params)
    if probe and not result.is_infinite:
        delta = params.boundary_probe
        for k in range(law.dim):
            for sign in (1, -1):
                v = w.copy()
                v[k] += sign * delta
                nearby = _perspective(law, np.concatenate([[beta], v]), params)
                if nearby.value < result.value - delta:
                    result.near_boundary = True
    return result

def _perspective(law: PairLaw, tau: Vector, params: RateParameters) -> RateValue:
    compatible, pinned = _pinned_gamma(law, tau, params)
    if not compatible:
        return RateValue(INF)
    if pinned is not None:
        sup = _dual_sup(law, tau, pinned, params)
        return RateValue(sup.value, sup.converged, sup.iterations, argmin_gamma=pinned,
                         label=LOWER_BOUND_LABEL if sup.at_boundary else None)

    warm = {"x": None}
    evaluations: Dict[float, _DualSup] = {}

    def g(t):
        if t not in evaluations:
            sup = _dual_sup(law, tau, math.exp(t), params, warm["x"])
            if sup.x.size and not sup.at_boundary:
                warm["x"] = sup.x
            evaluations[t] = sup
        return evaluations[t].value

    t0 = math.log(tau[0])
    bracket = bracket_log(g, t0, math.log(params.bracket_limit))
    res = golden_section(g, bracket.lo, bracket.hi, math.log1p(params.gamma_rtol), noise=params.objective_noise,
                         strict=False)
    best = evaluations[res.x]
    converged = best.converged and res.converged and res.unimodal
    if bracket.hit_limit and (math.isclose(res.x, bracket.lo) or math.isclose(res.x, bracket.hi)):
        logger.debug(f"Perspective minimum at the bracket limit γ={math.exp(res.x):.3g} for τ={tau}")
        converged = False
    return RateValue(res.fx, converged, res.iterations + bracket.evaluations, argmin_gamma=math.exp(res.x),
                     label=LOWER_BOUND_LABEL if best.at_boundary else None)

def upsilon(law: PairLaw, beta: float, w, params: RateParameters = None) -> RateValue:
    params = _params(params)
    w = as_vector(w, law.dim)
    if beta < 0:
        return RateValue(INF)
    if beta > 0:
        return perspective_min(law, beta, w, params)
    if not np.any(w):
        return RateValue(0.0)

    previous = None
    stable = False
    for k in range(1, params.envelope_steps + 1):
        current = perspective_min(law, 2.0 ** -k, w, params)
        if previous is not None:
            if current.is_infinite and previous.is_infinite:
                stable = True
            elif not current.is_infinite and not previous.is_infinite:
                stable = abs(current.value - previous.value) <= params.envelope_rtol * max(abs(current.value), 1e-12)
            if stable:
                break
        previous = current
    if not stable:
        logger.warning(f"Υ(0, {w}) did not stabilize along β = 2^-k, last value {current.value:.6g}")
    return RateValue(current.value, stable and current.converged, k, argmin_gamma=current.argmin_gamma,
                     label=ENVELOPE_LABEL)

# endregion

def rate_i(law: PairLaw, w, which: str = "lower", params: RateParameters = None) -> RateValue:
    """I_i (``lower``) or I_s (``upper``) at w."""
    params = _params(params)
    w = as_vector(w, law.dim)
    ell = law.tail.ell(which)
    if is_inf(ell):
        r = upsilon(law, 1.0, w, params)
        r.argmin_beta = 1.0
        return r

    compatible, pinned = _pinned_beta(law, w, params)
    if not compatible or (pinned is not None and not -params.affine_tol <= pinned <= 1 + params.affine_tol):
        return RateValue(INF)
    if pinned is not None:
        beta = min(max(pinned, 0.0), 1.0)
        inner = upsilon(law, beta, w, params)
        return RateValue(ext_add(inner.value, (1 - beta) * ell), inner.converged, inner.iterations,
                         argmin_gamma=inner.argmin_gamma, argmin_beta=beta, label=inner.label)

    values: Dict[float, RateValue] = {}

    def h(beta):
        if beta == 0:
            # Υ(0, w) for w != 0 is reached through β ↓ 0
            return ell if not np.any(w) else INF
        if beta not in values:
            values[beta] = perspective_min(law, beta, w, params)
        return ext_add(values[beta].value, (1 - beta) * ell)

    res = golden_section(h, 0.0, 1.0, params.beta_tol, noise=params.objective_noise, strict=False)
    if res.x == 0:
        return RateValue(res.fx, res.unimodal, res.iterations, argmin_beta=0.0)
    inner = values[res.x]
    return RateValue(res.fx, inner.converged and res.converged and res.unimodal, res.iterations,
                     argmin_gamma=inner.argmin_gamma, argmin_beta=res.x, label=inner.label)

# region Set infima

class _Plane:
    """The affine plane {w0 + N u}."""

    def __init__(self, w0: Vector, N):
        self.w0, self.N = w0, N

    def project(self, w):
        return self.w0 + self.N @ (self.N.T @ (w - self.w0))

def _domain_plane(law: PairLaw, which: str) -> Optional[_Plane]:
    """Affine plane carrying the effective domain of I, when ℓ = +∞ and some support constraints are
    homogeneous: then I(w) = Υ(1, w) < ∞ forces M_0 (1, w) = 0."""
    if not is_inf(law.tail.ell(which)) or len(law.constraints) == 0:
        return None
    rows = law.constraints.rhs == 0
    if not np.any(rows):
        return None
    A = law.constraints.matrix[rows, 1:]
    c = -law.constraints.matrix[rows, 0]
    w0 = np.linalg.lstsq(A, c, rcond=None)[0]
    if np.linalg.norm(A @ w0 - c) > 1e-9 * (1 + np.linalg.norm(c)):
        return _Plane(w0, np.zeros((law.dim, 0)))
    return _Plane(w0, null_space(A))

def _plane_meets_set(plane: _Plane, set_: SetDescriptor) -> bool:
    candidates = [plane.project(s) for s in _seeds(set_, plane.w0)]
    candidates += [dykstra((set_, plane), c) for c in candidates]
    if plane.N.shape[1] > 0:
        def negative_margin(u):
            return -min(float(set_.margin(plane.w0 + plane.N @ u)), 1.0)
        for c in list(candidates):
            res = minimize(negative_margin, plane.N.T @ (c - plane.w0), method='Nelder-Mead')
            candidates.append(plane.w0 + plane.N @ res.x)
    return any(set_.contains(c) for c in candidates) or (
        set_.is_closed and max(float(set_.margin(c)) for c in candidates) >= -1e-12)

def _seeds(set_: SetDescriptor, fallback: Vector) -> List[Vector]:
    try:
        return set_.seeds()
    except ValueError:
        return [fallback]

def rate_inf_over_set(law: PairLaw, set_: SetDescriptor, which: str = "upper",
                      params: RateParameters = None) -> RateValue:
    """inf_{w ∈ set} I(w). Uncertified results carry the ``uncertified`` label."""
    params = _params(params)
    if set_.kind == SetKind.box_product:
        raise ValueError("Box products describe pair averages; rate infima are taken over reward sets")
    if set_.dim != law.dim:
        raise DimensionError(f"Set dimension {set_.dim} does not match the law's reward dimension {law.dim}")

    m = mean_ratio(law)
    if m is not None and set_.margin(m) >= 0:
        return RateValue(0.0, argmin_w=m)

    plane = _domain_plane(law, which)
    if plane is not None and not _plane_meets_set(plane, set_):
        logger.info(f"The set does not meet the effective domain of I_{which}: infimum is +inf")
        return RateValue(INF)

    cache: Dict[bytes, float] = {}

    def I(w):
        key = np.round(w, 14).tobytes()
        if key not in cache:
            cache[key] = rate_i(law, w, which, params).value
        return cache[key]

    if set_.kind == SetKind.half_space and m is not None:
        # the mean lies outside: the infimum of a convex function sits on the boundary hyperplane
        n = set_.normal
        hyperplane = _Plane(n * set_.offset / (n @ n), null_space(n[None, :]))
        parts = (hyperplane,) if plane is None else (hyperplane, plane)
        if plane is None and law.dim == 1:
            w = hyperplane.w0
            return RateValue(I(w), argmin_w=w)
        project = lambda w: dykstra(parts, w)
    elif plane is None:
        project = set_.project
    else:
        project = lambda w: dykstra((set_, plane), w)

    if law.dim == 1 and set_.kind in (SetKind.open_ball, SetKind.closed_ball) and plane is None:
        lo, hi = set_.center[0] - set_.radius, set_.center[0] + set_.radius
        res = minimize_scalar(lambda x: I(np.array([x])), bounds=(lo, hi), method='bounded',
                              options={'xatol': 1e-10})
        best_value, best_w = min((I(np.array([x])), x) for x in (lo, hi, set_.center[0], res.x))
        best_w = np.array([best_w])
    else:
        best_value, best_w = _nelder_mead_inf(I, project, [project(s) for s in _seeds(set_, np.zeros(law.dim))],
                                              set_)

    certified = _certify(I, project, best_w, best_value, set_, params)
    if not certified:
        logger.warning(f"Set infimum {best_value:.6g} at w={best_w} could not be certified")
    return RateValue(best_value, certified, argmin_w=best_w, label=None if certified else UNCERTIFIED_LABEL)

def _nelder_mead_inf(I, project, seeds, set_: SetDescriptor):
    values = [(I(s), i) for i, s in enumerate(seeds)]
    finite = [(v, i) for v, i in values if not is_inf(v)]
    if not finite:
        return INF, seeds[0]
    scale = set_.radius if set_.radius is not None else 1.0
    _, i = min(finite)
    best_w, best_value = seeds[i], I(seeds[i])
    # I is convex: a local minimum is global, one restart confirms it
    for _ in range(2):
        d = best_w.shape[0]
        simplex = np.vstack([best_w] + [best_w + 0.25 * scale * e for e in np.eye(d)])
        res = minimize(lambda z: I(project(z)), best_w, method='Nelder-Mead',
                       options={'initial_simplex': simplex, 'xatol': 1e-7, 'fatol': 1e-10, 'maxiter': 400 * d})
        w = project(res.x)
        value = I(w)
        improvement = best_value - value
        if value < best_value:
            best_value, best_w = value, w
        if improvement <= 1e-10:
            break
    return best_value, best_w

def _certify(I, project, w, value, set_: SetDescriptor, params: RateParameters) -> bool:
    if is_inf(value):
        return False
    scale = set_.radius if set_.radius is not None else 1.0
    for h in (1e-2 * scale, 1e-3 * scale):
        for e in np.eye(w.shape[0]):
            for sign in (1, -1):
                if I(project(w + sign * h * e)) < value - params.set_certify_tol:
                    return False
    return set_.bounded or np.linalg.norm(w) < 1e3

def covering_inf(law: PairLaw, F: SetDescriptor, radius: float, which: str = "upper",
                 params: RateParameters = None) -> RateValue:
    """Minimum, over a finite cover of the closed ball F by closed balls of the given radius, of the
    infimum of I on each covering ball."""
    if F.kind not in (SetKind.open_ball, SetKind.closed_ball):
        raise ValueError(f"Covers are built for balls, got {F.kind.value}")
    if not radius > 0:
        raise ValueError(f"Covering radius must be positive, got {radius}")
    d = F.dim
    step = 2 * radius / math.sqrt(d)
    n = int(math.ceil(F.radius / step))
    offsets = np.arange(-n, n + 1) * step
    grid = np.array(np.meshgrid(*[offsets] * d)).reshape(d, -1).T + F.center
    keep = np.linalg.norm(grid - F.center, axis=1) <= F.radius + radius
    best = RateValue(INF)
    for center in grid[keep]:
        r = rate_inf_over_set(law, SetDescriptor.closed_ball(center, radius), which, params)
        if r.value < best.value:
            best = r
    return best

@dataclass
class LevelSetCheck:
    bounded: bool
    inside: int
    touching: List[Vector] = field(default_factory=list)

def level_set_bounded(law: PairLaw, level: float, grid: Sequence, which: str = "upper",
                      params: RateParameters = None) -> LevelSetCheck:
    """Samples {w : I(w) <= level} on a rectangular grid; bounded when no grid point on the outer
    faces of the grid belongs to it."""
    grid = np.asarray(grid, dtype=float).reshape(len(grid), -1)
    lo, hi = grid.min(axis=0), grid.max(axis=0)
    inside, touching = 0, []
    for w in grid:
        if rate_i(law, w, which, params).value <= level:
            inside += 1
            if np.any(np.isclose(w, lo)) or np.any(np.isclose(w, hi)):
                touching.append(w)
    return LevelSetCheck(not touching, inside, touching)

# endregion

# region Grids

@dataclass
class GridRow:
    w: Vector
    beta_star: Optional[float]
    gamma_star: Optional[float]
    J: float
    Upsilon1: float
    I_lower: float
    I_upper: float
    converged: bool
    near_boundary: bool = False

def rate_grid(law: PairLaw, points: Sequence, params: RateParameters = None) -> List[GridRow]:
    params = _params(params)
    rows = []
    for w in points:
        w = as_vector(w, law.dim)
        j = cramer_j(law, 1.0, w, params)
        ups = perspective_min(law, 1.0, w, params, probe=True)
        lower = rate_i(law, w, "lower", params)
        if law.tail.ell_i == law.tail.ell_s:
            upper = lower
        else:
            upper = rate_i(law, w, "upper", params)
        rows.append(GridRow(w, lower.argmin_beta, ups.argmin_gamma, j.value, ups.value, lower.value, upper.value,
                            j.converged and ups.converged and lower.converged and upper.converged,
                            ups.near_boundary))
    return rows

def upsilon_points(law: PairLaw, points: Sequence[Tuple[float, Sequence[float]]],
                   params: RateParameters = None) -> List[Tuple[float, Vector, RateValue]]:
    params = _params(params)
    return [(float(beta), as_vector(w, law.dim), upsilon(law, float(beta), w, params)) for beta, w in points]

# endregion
