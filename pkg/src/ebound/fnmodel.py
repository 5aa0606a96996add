"""Closed proper extended-real functions on the real line.

Two flavors share one interface: :class:`AnalyticSpec` (a catalog member with
vectorized evaluation and optional one-sided derivatives) and :class:`GridSpec`
(values on uniform nodes, ``inf`` marking points outside the domain).  Grids are
never interpolated: the discrete function is the object being analyzed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import (EmptyRegion, InvalidFunction, NoDerivativeOracle,
                     OffGridQuery, UndefinedAt)

__all__ = [
    "AnalyticSpec", "GridSpec", "FunctionSpec", "SamplePlan",
    "evaluate", "derivative", "sample", "discretize",
]

INF = math.inf


@dataclass(frozen=True)
class AnalyticSpec:
    """A named closed function given by formulas.

    ``eval`` and ``deriv`` accept floats or numpy arrays.  ``deriv`` returns the
    pair ``(d_minus, d_plus)`` and marks points where no derivative exists
    (jumps) with ``nan``.  ``breakpoint_locator`` covers infinite breakpoint
    families: it returns the breakpoint nearest to ``x`` (or ``None``).
    """

    name: str
    eval: Callable
    params: Mapping[str, float] = field(default_factory=dict)
    deriv: Optional[Callable] = None
    breakpoints: Tuple[float, ...] = ()
    breakpoint_locator: Optional[Callable[[float], Optional[float]]] = None
    domain: Tuple[float, float] = (-INF, INF)

    def __call__(self, x):
        return evaluate(self, x)

    def in_domain(self, x):
        lo, hi = self.domain
        return (x >= lo) & (x <= hi)

    def nearest_breakpoint(self, x: float) -> Optional[float]:
        best = None
        for b in self.breakpoints:
            if best is None or abs(b - x) < abs(best - x):
                best = b
        if self.breakpoint_locator is not None:
            b = self.breakpoint_locator(x)
            if b is not None and (best is None or abs(b - x) < abs(best - x)):
                best = b
        return best


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Values on the nodes ``x0 + i*h``; ``inf`` entries lie outside dom f."""

    x0: float
    h: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidFunction(f"grid spacing must be positive, got {self.h}")
        if not math.isfinite(self.x0):
            raise InvalidFunction("grid origin must be finite")
        if vals.ndim != 1 or vals.size < 2:
            raise InvalidFunction("a grid needs at least two values")
        if np.isnan(vals).any() or (vals == -INF).any():
            raise InvalidFunction("grid values must be finite or +inf")
        if not np.isfinite(vals).any():
            raise InvalidFunction("improper function: every grid value is +inf")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "h", float(self.h))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (self.x0 == other.x0 and self.h == other.h
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def nodes(self) -> np.ndarray:
        return self.x0 + np.arange(self.values.size) * self.h

    def node(self, i: int) -> float:
        return float(self.x0 + i * self.h)

    def index_of(self, x: float) -> int:
        """Index of the node at ``x``; raise :class:`OffGridQuery` otherwise."""
        k = round((x - self.x0) / self.h)
        # 1e-12*h plus a few ulps of the coordinates involved
        slack = 1e-12 * self.h + 8 * np.finfo(float).eps * (abs(x) + abs(self.x0) + abs(k) * self.h)
        if 0 <= k < self.values.size and abs(x - self.node(k)) <= slack:
            return int(k)
        raise OffGridQuery(f"x={x!r} is not a node of the grid")

    def nearest_index(self, x: float) -> int:
        k = int(round((x - self.x0) / self.h))
        return min(max(k, 0), self.values.size - 1)

    def to_json(self) -> dict:
        return {"x0": self.x0, "h": self.h,
                "values": [v if math.isfinite(v) else "inf" for v in self.values.tolist()]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "GridSpec":
        vals = []
        for v in obj["values"]:
            if isinstance(v, str):
                if v.strip().lower() not in ("inf", "+inf", "infinity", "+infinity"):
                    raise InvalidFunction(f"bad grid value {v!r}")
                vals.append(INF)
            else:
                vals.append(float(v))
        return cls(float(obj["x0"]), float(obj["h"]), np.asarray(vals))


FunctionSpec = Union[AnalyticSpec, GridSpec]


def discretize(f: AnalyticSpec, lo: float, hi: float, h: float) -> GridSpec:
    """Sample ``f`` at the nodes ``lo + i*h`` covering ``[lo, hi]``."""
    n = int(round((hi - lo) / h)) + 1
    xs = lo + np.arange(n) * h
    return GridSpec(lo, h, evaluate(f, xs))


def evaluate(f: FunctionSpec, x):
    if isinstance(f, GridSpec):
        if np.ndim(x) == 0:
            return float(f.values[f.index_of(float(x))])
        return np.array([f.values[f.index_of(float(t))] for t in np.asarray(x, dtype=float)])
    xa = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        val = np.asarray(f.eval(xa), dtype=float)
    val = np.where(f.in_domain(xa), val, INF)
    return float(val) if val.ndim == 0 else val


def derivative(f: FunctionSpec, x: float) -> Tuple[float, float]:
    """One-sided derivatives ``(d_minus, d_plus)`` of an analytic function."""
    if isinstance(f, GridSpec) or f.deriv is None:
        raise NoDerivativeOracle(f"{_name(f)} has no derivative oracle")
    lo, hi = f.domain
    if not lo < x < hi:
        raise UndefinedAt(f"x={x!r} is not interior to the domain of {f.name}")
    with np.errstate(all="ignore"):
        dm, dp = f.deriv(float(x))
    dm, dp = float(dm), float(dp)
    if math.isnan(dm) or math.isnan(dp):
        raise UndefinedAt(f"{f.name} has no one-sided derivative at x={x!r}")
    return dm, dp


def derivative_array(f: AnalyticSpec, xs: np.ndarray):
    """Vectorized :func:`derivative`; undefined points come back as ``nan``."""
    if isinstance(f, GridSpec) or f.deriv is None:
        raise NoDerivativeOracle(f"{_name(f)} has no derivative oracle")
    xs = np.asarray(xs, dtype=float)
    with np.errstate(all="ignore"):
        dm, dp = f.deriv(xs)
    dm = np.broadcast_to(np.asarray(dm, dtype=float), xs.shape).copy()
    dp = np.broadcast_to(np.asarray(dp, dtype=float), xs.shape).copy()
    lo, hi = f.domain
    outside = ~((xs > lo) & (xs < hi))
    dm[outside] = np.nan
    dp[outside] = np.nan
    return dm, dp


def _name(f):
    return f.name if isinstance(f, AnalyticSpec) else "grid function"


@dataclass(frozen=True)
class SamplePlan:
    """Where to draw points: ``0 < |x - center| < radius`` and, when ``gap`` is
    finite, ``f(center) < f(x) < f(center) + gap``."""

    center: float
    radius: float
    gap: float = INF
    count: int = 200
    offset: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sample radius must be positive")
        if not self.gap >= 0:
            raise ValueError("level gap must be nonnegative")
        if self.count < 1:
            raise ValueError("sample count must be positive")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.gap)


def _stratified(rng, center, radius, count):
    width = 2.0 * radius / count
    return center - radius + (np.arange(count) + rng.random(count)) * width


def _avoid_breakpoints(f, x, offset):
    if not isinstance(f, AnalyticSpec) or offset <= 0:
        return x
    b = f.nearest_breakpoint(x)
    if b is not None and abs(x - b) < offset:
        return b - offset if x < b else b + offset
    return x


def sample(f: FunctionSpec, plan: SamplePlan, *, strict_above: Optional[bool] = None
           ) -> list[Tuple[float, float]]:
    """Draw points of the ball-and-window region described by ``plan``.

    Candidates are stratified uniform over ``(center - radius, center + radius)``
    with seeded jitter, in batches of ``plan.count``, for at most
    ``10 * plan.count`` candidates.  Grid functions snap candidates to interior
    nodes.  ``strict_above`` forces the ``f(x) > f(center)`` filter even for an
    unbounded window (the default applies it only when the window is finite).
    Returns ``(x, f(x))`` pairs sorted by ``x``.
    """
    rng = np.random.default_rng(plan.seed)
    if strict_above is None:
        strict_above = plan.bounded
    fbar = evaluate(f, plan.center) if (strict_above or plan.bounded) else None
    accepted: dict[float, float] = {}
    attempts = 0
    while len(accepted) < plan.count and attempts < 10 * plan.count:
        batch = _stratified(rng, plan.center, plan.radius, plan.count)
        attempts += plan.count
        for x in batch:
            x = float(x)
            if isinstance(f, GridSpec):
                k = f.nearest_index(x)
                if k == 0 or k == len(f) - 1:
                    continue
                x = f.node(k)
            else:
                x = _avoid_breakpoints(f, x, plan.offset)
            if not 0 < abs(x - plan.center) < plan.radius or x in accepted:
                continue
            fx = evaluate(f, x)
            if not math.isfinite(fx):
                continue
            if strict_above and not fx > fbar:
                continue
            if plan.bounded and not fx < fbar + plan.gap:
                continue
            accepted[x] = fx
            if len(accepted) == plan.count:
                break
    if not accepted:
        raise EmptyRegion(
            f"no admissible sample near x={plan.center!r} in {attempts} attempts "
            "(local maximum, or level gap too small?)")
    return sorted(accepted.items())
