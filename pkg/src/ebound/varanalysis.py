"""Estimators for the variational quantities behind the certificates.

``d(0, df(x))`` comes from one-sided derivatives (analytic functions) or
one-sided secants (grids): zero when the two bracket 0, else the smaller
magnitude.  This realizes the limiting subdifferential for the V/Lambda-shaped
kinks of the catalog, not in general.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .envelope import envelope_grid
from .errors import BoundaryNode, NoAdmissiblePairs, NoDerivativeOracle, OutsideDomain
from .fnmodel import (FunctionSpec, GridSpec, derivative, derivative_array, discretize,
                      evaluate)

__all__ = ["SubgradDistance", "LevelSetDistance", "ProxRegularityEstimate",
           "ConditionIIIResult", "subgrad_distance", "levelset_distance",
           "prox_regularity_modulus", "check_condition_iii", "bracket_distance"]


def bracket_distance(lo_slope: float, hi_slope: float) -> float:
    """Distance from 0 to the interval spanned by two one-sided slopes."""
    a, b = min(lo_slope, hi_slope), max(lo_slope, hi_slope)
    if a <= 0.0 <= b:
        return 0.0
    return min(abs(a), abs(b))


@dataclass(frozen=True)
class SubgradDistance:
    x: float
    value: float
    method: str  # "derivative-oracle" | "grid-secant"
    spacing: Optional[float] = None


def subgrad_distance(f: FunctionSpec, x: float) -> SubgradDistance:
    if isinstance(f, GridSpec):
        i = f.index_of(x)
        if i == 0 or i == len(f) - 1:
            raise BoundaryNode(f"x={x!r} is a grid endpoint")
        fm, f0, fp = f.values[i - 1], f.values[i], f.values[i + 1]
        if not math.isfinite(f0):
            raise OutsideDomain(f"x={x!r} is outside dom f")
        s_minus = (f0 - fm) / f.h
        s_plus = (fp - f0) / f.h
        return SubgradDistance(float(x), bracket_distance(s_minus, s_plus), "grid-secant", f.h)
    if not math.isfinite(evaluate(f, x)):
        raise OutsideDomain(f"x={x!r} is outside dom {f.name}")
    dm, dp = derivative(f, x)
    return SubgradDistance(float(x), bracket_distance(dm, dp), "derivative-oracle")


@dataclass(frozen=True)
class LevelSetDistance:
    x: float
    level: float
    value: float
    witness: Optional[float] = None


_SCAN_POINTS = 100_000
_BISECTIONS = 60


def levelset_distance(f: FunctionSpec, c: float, x: float, window: float,
                      anchors: Sequence[float] = ()) -> LevelSetDistance:
    """Distance from ``x`` to ``{f <= c}`` searched within ``[x-window, x+window]``.

    Analytic functions are scanned at step ``window/1e5`` and the nearest hit is
    refined by bisection toward ``x``, keeping the feasible end.  ``anchors`` are
    points known to lie in the level set (isolated minimizers a scan can miss).
    """
    if not window > 0:
        raise ValueError("window must be positive")
    if isinstance(f, GridSpec):
        xs = f.nodes
        mask = (f.values <= c) & (np.abs(xs - x) <= window)
        if not mask.any():
            return LevelSetDistance(float(x), float(c), math.inf)
        cand = xs[mask]
        k = int(np.argmin(np.abs(cand - x)))
        return LevelSetDistance(float(x), float(c), float(abs(cand[k] - x)), float(cand[k]))

    if evaluate(f, x) <= c:
        return LevelSetDistance(float(x), float(c), 0.0, float(x))
    step = window / _SCAN_POINTS
    grid = x - window + np.arange(2 * _SCAN_POINTS + 1) * step
    pts = list(grid[evaluate(f, grid) <= c])
    pts += [a for a in anchors if abs(a - x) <= window and evaluate(f, a) <= c]
    if not pts:
        return LevelSetDistance(float(x), float(c), math.inf)
    pts = np.asarray(pts, dtype=float)
    s = float(pts[np.argmin(np.abs(pts - x))])
    direction = 1.0 if x > s else -1.0
    out = s + direction * step
    if (out - x) * direction > 0:
        out = x
    feasible, infeasible = s, out
    if evaluate(f, out) > c:
        for _ in range(_BISECTIONS):
            mid = 0.5 * (feasible + infeasible)
            if evaluate(f, mid) <= c:
                feasible = mid
            else:
                infeasible = mid
    return LevelSetDistance(float(x), float(c), abs(x - feasible), feasible)


@dataclass(frozen=True)
class ProxRegularityEstimate:
    center: float
    epsilon: float
    rho_hat: float
    sample_pairs: int
    worst_pair: Optional[tuple] = None  # (x, y, deficit)


def prox_regularity_modulus(f: FunctionSpec, center: float, eps: float,
                            pair_count: int = 2000, seed: int = 0) -> ProxRegularityEstimate:
    """Smallest rho making the quadratic minorization hold on sampled pairs.

    Only the reference subgradient 0 is supported: ``x`` is admissible when
    ``|x - center| < eps``, ``f(x) < f(center) + eps`` and a one-sided
    derivative ``v`` at ``x`` has ``|v| < eps``.
    """
    if isinstance(f, GridSpec) or f.deriv is None:
        raise NoDerivativeOracle("prox-regularity needs a derivative oracle")
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    fbar = evaluate(f, center)
    xs = center + eps * (2.0 * rng.random(pair_count) - 1.0)
    ys = center + eps * (2.0 * rng.random(pair_count) - 1.0)
    fx = evaluate(f, xs)
    fy = evaluate(f, ys)
    dm, dp = derivative_array(f, xs)
    rho, worst, used = 0.0, None, 0
    for k in range(pair_count):
        x, y = float(xs[k]), float(ys[k])
        if x == y or not fx[k] < fbar + eps or not math.isfinite(fy[k]):
            continue
        for v in {float(dm[k]), float(dp[k])}:
            if math.isnan(v) or not abs(v) < eps:
                continue
            used += 1
            r = 2.0 * (fx[k] + v * (y - x) - fy[k]) / (y - x) ** 2
            if worst is None or r > worst[2]:
                worst = (x, y, float(r))
            rho = max(rho, float(r))
    if used == 0:
        raise NoAdmissiblePairs(f"no admissible pairs near x={center!r} with eps={eps}")
    return ProxRegularityEstimate(float(center), float(eps), rho, used, worst)


@dataclass(frozen=True)
class ConditionIIIResult:
    """``holds`` is True, False, or None (unknown)."""

    holds: Optional[bool]
    mode: str
    checked: int
    witnesses: tuple = ()

    def to_json(self):
        return {"holds": "unknown" if self.holds is None else self.holds,
                "mode": self.mode, "checked": self.checked,
                "witnesses": list(self.witnesses)}


def check_condition_iii(f: FunctionSpec, lam: float, center: float, eps_bar: float,
                        sample_count: int = 200, mode: str = "direct", *,
                        margin: float = 3.0, h: float = 1e-3, seed: int = 0,
                        tol: float = 1e-12) -> ConditionIIIResult:
    """Check that points near ``center`` with ``f(x) > f(center)`` have a
    proximal point ``y`` with ``f(y) >= f(center)``.

    Analytic functions are discretized on ``[center - eps_bar - margin,
    center + eps_bar + margin]`` with spacing ``h``; proximal sets are taken on
    that grid, so the check is windowed.  ``sufficient`` mode only looks for
    global-minimum evidence on the window and answers True or unknown.
    """
    if mode not in ("direct", "sufficient"):
        raise ValueError("mode must be 'direct' or 'sufficient'")
    if isinstance(f, GridSpec):
        grid = f
    else:
        lo = center - eps_bar - margin
        grid = discretize(f, lo, center + eps_bar + margin, h)
    fbar = evaluate(f, center)
    if mode == "sufficient":
        below = np.flatnonzero(grid.values < fbar - tol)
        if below.size == 0:
            return ConditionIIIResult(True, mode, len(grid))
        k = int(below[np.argmin(grid.values[below])])
        return ConditionIIIResult(None, mode, len(grid),
                                  ({"x": grid.node(k), "f": float(grid.values[k])},))
    res = envelope_grid(grid, lam)
    xs = grid.nodes
    cand = np.flatnonzero((np.abs(xs - center) < eps_bar) & (grid.values > fbar))
    if cand.size > sample_count:
        rng = np.random.default_rng(seed)
        cand = np.sort(rng.choice(cand, sample_count, replace=False))
    for i in cand:
        prox = res.prox_sets[i]
        best = max(grid.values[j] for j in prox)
        if best < fbar - tol:
            return ConditionIIIResult(False, mode, int(cand.size), (
                {"x": float(xs[i]), "prox": [grid.node(j) for j in prox],
                 "f_prox_max": float(best), "f_center": float(fbar)},))
    return ConditionIIIResult(True, mode, int(cand.size))
