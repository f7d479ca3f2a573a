from dataclasses import dataclass
from enum import auto

import math
import numpy as np
from scipy.optimize import minimize_scalar
from typing import List, Optional, Tuple, TypedDict, Union

from .common import SerializableEnum, Vector, as_vector, encode_real, decode_real
from .exceptions import DimensionError

class SetKind(SerializableEnum):
    open_ball = auto()
    closed_ball = auto()
    half_space = auto()
    box_product = auto()
    intersection = auto()
    hyperbolic = auto()

@dataclass(frozen=True, eq=False)
class SetDescriptor:
    """A convex set of reward averages w (or, for ``box_product``, of pair averages (s, w)).

    * balls: ``center``, ``radius``
    * half_space: {w : normal·w <= offset} when ``closed``, {normal·w < offset} otherwise
    * box_product: [``alpha``, ``beta``] × ``inner``, over (s, w)
    * intersection: all of ``parts``
    * hyperbolic: {w_1 < c, (c - w_1)·w_2 >= k}, in the first two coordinates
    """
    kind: SetKind
    center: Optional[Vector] = None
    radius: Optional[float] = None
    normal: Optional[Vector] = None
    offset: Optional[float] = None
    closed: bool = False
    alpha: Optional[float] = None
    beta: Optional[float] = None
    inner: Optional['SetDescriptor'] = None
    parts: Tuple['SetDescriptor', ...] = ()
    c: Optional[float] = None
    k: Optional[float] = None
    hyperbolic_dim: int = 2

    class Serial(TypedDict, total=False):
        kind: str
        center: List[float]
        radius: float
        normal: List[float]
        offset: float
        closed: bool
        alpha: float
        beta: float
        inner: 'SetDescriptor.Serial'
        parts: List['SetDescriptor.Serial']
        c: float
        k: float
        dim: int

    def __post_init__(self):
        kind = self.kind
        if kind in (SetKind.open_ball, SetKind.closed_ball):
            if self.center is None or self.radius is None:
                raise ValueError("Balls need a center and a radius")
            if not self.radius > 0:
                raise ValueError(f"Ball radius must be positive, got {self.radius}")
        elif kind == SetKind.half_space:
            if self.normal is None or self.offset is None:
                raise ValueError("Half-spaces need a normal and an offset")
            if not np.any(self.normal != 0):
                raise ValueError("Half-space normal must be nonzero")
        elif kind == SetKind.box_product:
            if self.alpha is None or self.beta is None or self.inner is None:
                raise ValueError("Box products need alpha, beta and an inner set")
            if not self.alpha <= self.beta:
                raise ValueError(f"Box product interval is empty: [{self.alpha}, {self.beta}]")
            if self.inner.kind not in (SetKind.open_ball, SetKind.closed_ball, SetKind.half_space):
                raise ValueError(f"Box product inner set must be a ball or a half-space, got {self.inner.kind.value}")
        elif kind == SetKind.intersection:
            if len(self.parts) < 1:
                raise ValueError("Intersections need at least one part")
            if len({p.dim for p in self.parts}) != 1:
                raise DimensionError("All parts of an intersection must have the same dimension")
        elif kind == SetKind.hyperbolic:
            if self.c is None or self.k is None or not self.k > 0:
                raise ValueError(f"Hyperbolic sets need c and k > 0, got c={self.c}, k={self.k}")
            if self.hyperbolic_dim < 2:
                raise DimensionError("Hyperbolic sets need at least two coordinates")

    # region Constructors

    @classmethod
    def open_ball(cls, center, radius):
        return cls(SetKind.open_ball, center=as_vector(center), radius=float(radius))

    @classmethod
    def closed_ball(cls, center, radius):
        return cls(SetKind.closed_ball, center=as_vector(center), radius=float(radius), closed=True)

    @classmethod
    def half_space(cls, normal, offset, closed=False):
        return cls(SetKind.half_space, normal=as_vector(normal), offset=float(offset), closed=closed)

    @classmethod
    def box_product(cls, alpha, beta, inner: 'SetDescriptor'):
        return cls(SetKind.box_product, alpha=float(alpha), beta=float(beta), inner=inner)

    @classmethod
    def intersection(cls, *parts: 'SetDescriptor'):
        return cls(SetKind.intersection, parts=tuple(parts))

    @classmethod
    def hyperbolic(cls, c=1.0, k=1.0, dim=2):
        return cls(SetKind.hyperbolic, c=float(c), k=float(k), hyperbolic_dim=dim)

    # endregion

    @property
    def dim(self) -> int:
        if self.kind in (SetKind.open_ball, SetKind.closed_ball):
            return self.center.shape[0]
        if self.kind == SetKind.half_space:
            return self.normal.shape[0]
        if self.kind == SetKind.box_product:
            return self.inner.dim + 1
        if self.kind == SetKind.intersection:
            return self.parts[0].dim
        return self.hyperbolic_dim

    @property
    def is_closed(self) -> bool:
        if self.kind == SetKind.intersection:
            return all(p.is_closed for p in self.parts)
        if self.kind == SetKind.box_product:
            return self.inner.is_closed
        if self.kind == SetKind.hyperbolic:
            return False
        return self.closed

    @property
    def bounded(self) -> bool:
        if self.kind in (SetKind.open_ball, SetKind.closed_ball):
            return True
        if self.kind == SetKind.intersection:
            return any(p.bounded for p in self.parts)
        if self.kind == SetKind.box_product:
            return self.inner.bounded
        return False

    def margin(self, w) -> Union[float, np.ndarray]:
        """Positive inside, zero on the boundary, negative outside; for balls and half-spaces it is the
        signed distance to the boundary. Accepts a point or an (n, dim) array of points."""
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.dim:
            raise DimensionError(f"Point dimension {w.shape[-1]} does not match set dimension {self.dim}")
        kind = self.kind
        if kind in (SetKind.open_ball, SetKind.closed_ball):
            return self.radius - np.linalg.norm(w - self.center, axis=-1)
        if kind == SetKind.half_space:
            return (self.offset - w @ self.normal) / np.linalg.norm(self.normal)
        if kind == SetKind.box_product:
            s = w[..., 0]
            return np.minimum(np.minimum(s - self.alpha, self.beta - s), self.inner.margin(w[..., 1:]))
        if kind == SetKind.intersection:
            return np.min([p.margin(w) for p in self.parts], axis=0)
        gap = self.c - w[..., 0]
        return np.minimum(gap, gap * w[..., 1] - self.k)

    def contains(self, w) -> Union[bool, np.ndarray]:
        w = np.asarray(w, dtype=float)
        if self.kind == SetKind.intersection:
            result = np.all([p.contains(w) for p in self.parts], axis=0)
        elif self.kind == SetKind.box_product:
            s = w[..., 0]
            result = (s >= self.alpha) & (s <= self.beta) & self.inner.contains(w[..., 1:])
        elif self.kind == SetKind.hyperbolic:
            gap = self.c - w[..., 0]
            result = (gap > 0) & (gap * w[..., 1] >= self.k)
        else:
            m = self.margin(w)
            result = m >= 0 if self.closed else m > 0
        return bool(result) if np.ndim(result) == 0 else result

    def project(self, w: Vector) -> Vector:
        """Euclidean projection on the closure of the set."""
        w = np.asarray(w, dtype=float)
        kind = self.kind
        if kind in (SetKind.open_ball, SetKind.closed_ball):
            d = w - self.center
            norm = np.linalg.norm(d)
            return w if norm <= self.radius else self.center + d * (self.radius / norm)
        if kind == SetKind.half_space:
            excess = w @ self.normal - self.offset
            return w if excess <= 0 else w - excess * self.normal / (self.normal @ self.normal)
        if kind == SetKind.box_product:
            return np.concatenate([[np.clip(w[0], self.alpha, self.beta)], self.inner.project(w[1:])])
        if kind == SetKind.intersection:
            return dykstra(self.parts, w)
        return self._project_hyperbolic(w)

    def _project_hyperbolic(self, w: Vector) -> Vector:
        if self.margin(w) >= 0:
            return w
        # nearest point of the boundary curve w_2 = k / (c - w_1)
        def distance(log_gap):
            gap = math.exp(log_gap)
            return (self.c - gap - w[0]) ** 2 + (self.k / gap - w[1]) ** 2
        center = math.log(max(self.c - w[0], 1e-6)) if w[0] < self.c else 0.0
        res = minimize_scalar(distance, bounds=(center - 30, center + 30), method='bounded',
                              options={'xatol': 1e-12})
        gap = math.exp(res.x)
        out = w.copy()
        out[0], out[1] = self.c - gap, self.k / gap
        return out

    def seeds(self) -> List[Vector]:
        """Starting points for local minimization: the center and its ± radius offsets along each axis."""
        if self.kind in (SetKind.open_ball, SetKind.closed_ball):
            points = [self.center.copy()]
            for k in range(self.dim):
                e = np.zeros(self.dim)
                e[k] = self.radius
                points += [self.center + e, self.center - e]
            return points
        if self.kind == SetKind.half_space:
            foot = self.normal * self.offset / (self.normal @ self.normal)
            return [foot, foot - self.normal / np.linalg.norm(self.normal)]
        if self.kind == SetKind.intersection:
            return [self.project(p) for part in self.parts for p in part.seeds()]
        if self.kind == SetKind.hyperbolic:
            base = np.zeros(self.dim)
            base[0], base[1] = self.c - 1.0, self.k
            return [base, self.project(base + 1.0)]
        raise ValueError(f"No seeds for {self.kind.value} sets")

    def encode(self) -> Serial:
        kind = self.kind
        serial = {"kind": kind.value}
        if kind in (SetKind.open_ball, SetKind.closed_ball):
            serial.update(center=self.center.tolist(), radius=self.radius)
        elif kind == SetKind.half_space:
            serial.update(normal=self.normal.tolist(), offset=encode_real(self.offset), closed=self.closed)
        elif kind == SetKind.box_product:
            serial.update(alpha=encode_real(self.alpha), beta=encode_real(self.beta), inner=self.inner.encode())
        elif kind == SetKind.intersection:
            serial.update(parts=[p.encode() for p in self.parts])
        else:
            serial.update(c=self.c, k=self.k, dim=self.hyperbolic_dim)
        return serial

    @classmethod
    def decode(cls, serial: Serial):
        try:
            kind = SetKind(serial["kind"])
        except (KeyError, ValueError):
            raise ValueError(f"Unknown set kind in {serial}, expected one of {[k.value for k in SetKind]}")
        if kind == SetKind.open_ball:
            return cls.open_ball(serial["center"], serial["radius"])
        if kind == SetKind.closed_ball:
            return cls.closed_ball(serial["center"], serial["radius"])
        if kind == SetKind.half_space:
            return cls.half_space(serial["normal"], decode_real(serial["offset"]), serial.get("closed", False))
        if kind == SetKind.box_product:
            return cls.box_product(decode_real(serial["alpha"]), decode_real(serial["beta"]),
                                   cls.decode(serial["inner"]))
        if kind == SetKind.intersection:
            return cls.intersection(*[cls.decode(p) for p in serial["parts"]])
        return cls.hyperbolic(serial.get("c", 1.0), serial.get("k", 1.0), serial.get("dim", 2))

def dykstra(parts, w, iterations=200, tol=1e-12):
    x = np.asarray(w, dtype=float).copy()
    increments = [np.zeros_like(x) for _ in parts]
    for _ in range(iterations):
        previous = x.copy()
        for i, part in enumerate(parts):
            y = part.project(x + increments[i])
            increments[i] = x + increments[i] - y
            x = y
        if np.linalg.norm(x - previous) <= tol * (1 + np.linalg.norm(x)):
            break
    return x
