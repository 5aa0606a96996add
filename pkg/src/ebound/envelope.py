"""Moreau envelopes and proximal sets of grid functions.

The envelope is that of the grid-restricted function,
``env[i] = min_j values[j] + (x_j - x_i)**2 / (2*lam)``, so it lies above the
continuous envelope by at most O(h**2/lam) plus the modulus of continuity of f
at scale h.  :func:`envelope_grid` uses the linear-time lower envelope of
parabolas (the distance-transform sweep); :func:`brute_force_envelope` is the
exhaustive oracle.  Both evaluate candidate values with the same expression, so
they agree exactly, proximal sets included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AllInfinite
from .fnmodel import FunctionSpec, GridSpec, evaluate

__all__ = ["EnvelopeResult", "ProxBoundednessReport", "envelope_grid",
           "brute_force_envelope", "brute_force_all", "prox_bounded_probe",
           "envelope_stationary", "DEFAULT_TOL_PROX"]

DEFAULT_TOL_PROX = 1e-10


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    """Envelope values and proximal index sets on the nodes of ``grid``.

    ``tol_prox`` is relative: node ``i`` collects every minimizer within
    ``tol_prox * (1 + |env[i]|)`` of ``env[i]``.
    """

    lam: float
    grid: GridSpec
    env: np.ndarray
    prox_sets: tuple
    tol_prox: float = DEFAULT_TOL_PROX

    @property
    def nodes(self):
        return self.grid.nodes

    def prox_points(self, i: int) -> np.ndarray:
        return self.grid.x0 + np.asarray(self.prox_sets[i]) * self.grid.h

    def as_grid(self) -> GridSpec:
        """The envelope as a grid function, for certificate validation."""
        return GridSpec(self.grid.x0, self.grid.h, self.env)


def _check(f: GridSpec, lam: float):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not np.isfinite(f.values).any():
        raise AllInfinite("every grid value is +inf")


def brute_force_envelope(f: GridSpec, lam: float, i: int, tol_prox: float = DEFAULT_TOL_PROX):
    """Exhaustive O(n) minimization at node ``i``: ``(value, argmin indices)``."""
    _check(f, lam)
    xs = f.nodes
    d = xs - xs[i]
    vals = f.values + d * d / (2.0 * lam)
    m = float(vals.min())
    return m, np.flatnonzero(vals <= m + tol_prox * (1.0 + abs(m)))


def brute_force_all(f: GridSpec, lam: float, tol_prox: float = DEFAULT_TOL_PROX,
                    collect: bool = True, chunk: int = 512):
    """Brute force at every node, vectorized over row blocks (O(n**2) work)."""
    _check(f, lam)
    xs = f.nodes
    n = xs.size
    env = np.empty(n)
    sets = [] if collect else None
    denom = 2.0 * lam
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d = xs[None, :] - xs[start:stop, None]
        vals = f.values[None, :] + d * d / denom
        m = vals.min(axis=1)
        env[start:stop] = m
        if collect:
            tie = vals <= (m + tol_prox * (1.0 + np.abs(m)))[:, None]
            sets.extend(tuple(np.flatnonzero(row).tolist()) for row in tie)
    return env, (tuple(sets) if collect else None)


def _hull(v, finite, c):
    """Lower envelope of the parabolas ``v[q] + c*(x - q)**2`` in index units.

    Returns the hull indices and segment boundaries ``z`` (hull[t] is minimal
    on ``[z[t], z[t+1]]``).
    """
    hull: list[int] = []
    z: list[float] = []
    for q in finite:
        vq = v[q]
        while hull:
            p = hull[-1]
            s = (vq - v[p]) / (2.0 * c * (q - p)) + 0.5 * (q + p)
            if s <= z[-1]:
                hull.pop()
                z.pop()
            else:
                break
        z.append(s if hull else -math.inf)
        hull.append(q)
    z.append(math.inf)
    return hull, z


def _gap_root(v, c, j, k, target):
    """Solve ``gap_{j,k}(x) = target`` where the gap of parabola j over k is linear."""
    slope = 2.0 * c * (k - j)
    intercept = v[j] - v[k] - c * (k - j) * (j + k)
    return (target - intercept) / slope


def _extend_left(v, c, hull, z, j, u, target):
    while True:
        x = _gap_root(v, c, j, hull[u], target)
        if x >= z[u] or u == 0:
            return x
        u -= 1


def _extend_right(v, c, hull, z, j, u, target):
    last = len(hull) - 1
    while True:
        x = _gap_root(v, c, j, hull[u], target)
        if x <= z[u + 1] or u == last:
            return x
        u += 1


def envelope_grid(f: GridSpec, lam: float, tol_prox: float = DEFAULT_TOL_PROX) -> EnvelopeResult:
    """Moreau envelope and proximal sets of a grid function in O(n + ties)."""
    _check(f, lam)
    v = f.values.tolist()
    n = len(v)
    c = f.h * f.h / (2.0 * lam)
    finite = [q for q in range(n) if math.isfinite(v[q])]
    hull, z = _hull(v, finite, c)

    # first pass: the hull winner at every node
    win = np.empty(n, dtype=np.int64)
    t = 0
    for i in range(n):
        while z[t + 1] < i:
            t += 1
        win[i] = hull[t]
    idx = np.arange(n)
    approx = np.asarray(v)[win] + c * (idx - win) ** 2
    tol_max = tol_prox * (1.0 + float(np.abs(approx).max()))
    scale = 1.0 + max(abs(x) for x in (v[q] for q in finite)) + c * n * n
    target = 4.0 * tol_max + 1e-11 * scale

    # second pass: every parabola within `target` of the hull at some node
    pairs_i = [idx, idx[np.isfinite(f.values)]]
    pairs_j = [win, idx[np.isfinite(f.values)]]
    on_hull = {q: t for t, q in enumerate(hull)}
    t = 0
    for j in finite:
        if j in on_hull:
            u = on_hull[j]
            lo = _extend_left(v, c, hull, z, j, u - 1, target) if u > 0 else -math.inf
            hi = _extend_right(v, c, hull, z, j, u + 1, target) if u < len(hull) - 1 else math.inf
        else:
            while hull[t + 1] < j:
                t += 1
            xv = z[t + 1]
            k = hull[t]
            gap = v[j] - v[k] + c * (k - j) * (2.0 * xv - j - k)
            if gap > target:
                continue
            lo = _extend_left(v, c, hull, z, j, t, target)
            hi = _extend_right(v, c, hull, z, j, t + 1, target)
        a = max(0, math.ceil(lo)) if lo > -math.inf else 0
        b = min(n - 1, math.floor(hi)) if hi < math.inf else n - 1
        if a <= b:
            span = np.arange(a, b + 1)
            pairs_i.append(span)
            pairs_j.append(np.full(span.size, j))

    I = np.concatenate(pairs_i)
    J = np.concatenate(pairs_j)
    order = np.lexsort((J, I))
    I, J = I[order], J[order]
    keep = np.ones(I.size, dtype=bool)
    keep[1:] = (I[1:] != I[:-1]) | (J[1:] != J[:-1])
    I, J = I[keep], J[keep]

    xs = f.nodes
    d = xs[J] - xs[I]
    vals = f.values[J] + d * d / (2.0 * lam)
    starts = np.flatnonzero(np.r_[True, I[1:] != I[:-1]])
    env = np.minimum.reduceat(vals, starts)
    tie = vals <= (env + tol_prox * (1.0 + np.abs(env)))[I]
    sets = [[] for _ in range(n)]
    for i, j in zip(I[tie].tolist(), J[tie].tolist()):
        sets[i].append(j)
    return EnvelopeResult(lam, f, env, tuple(tuple(s) for s in sets), tol_prox)


def envelope_stationary(f: GridSpec, lam: float, i: int, tol: float = 1e-12,
                        result: Optional[EnvelopeResult] = None) -> bool:
    """Grid test for ``0 in d(e_lam f)(x_i)``: node i is its own proximal point."""
    res = result if result is not None else envelope_grid(f, lam)
    return abs(res.env[i] - f.values[i]) <= tol and i in res.prox_sets[i]


@dataclass(frozen=True)
class ProxBoundednessReport:
    lam: float
    finite_everywhere: bool
    divergence_witness: Optional[tuple] = None  # (probe y, value)
    threshold_estimate: Optional[float] = None  # math.inf when unbounded
    trace: tuple = ()

    def to_json(self):
        thr = self.threshold_estimate
        return {
            "lambda": self.lam,
            "finite_everywhere": self.finite_everywhere,
            "divergence_witness": (None if self.divergence_witness is None else
                                   {"y": self.divergence_witness[0],
                                    "value": self.divergence_witness[1]}),
            "threshold_estimate": ("infinite" if thr == math.inf else thr),
            "trace": [{"y": y, "value": val} for y, val in self.trace],
        }


_DIVERGED = -1e12
_MONOTONE_PROBES = 10


def _probe(f: FunctionSpec, lam: float, radius: float, count: int = 64):
    if isinstance(f, GridSpec):
        ys = f.nodes[np.isfinite(f.values)]
        ys = ys[np.argsort(np.abs(ys), kind="stable")]
        vals = f.values[np.isfinite(f.values)][np.argsort(np.abs(f.nodes[np.isfinite(f.values)]),
                                                          kind="stable")]
        return list(zip(ys.tolist(), (vals + ys * ys / (2 * lam)).tolist())), False
    radii = np.geomspace(1e-3, radius, count)
    trace = []
    for r in radii:
        best = None
        for y in (-r, r):
            val = evaluate(f, y)
            val = val + y * y / (2 * lam) if math.isfinite(val) else math.inf
            if best is None or val < best[1]:
                best = (float(y), float(val))
        trace.append(best)
    vals = [b[1] for b in trace]
    tail = vals[-_MONOTONE_PROBES:]
    diverged = (all(b < a for a, b in zip(tail, tail[1:])) and tail[-1] < _DIVERGED)
    return trace, diverged


def prox_bounded_probe(f: FunctionSpec, lam: float, probe_radius: float = 1e8,
                       threshold: bool = True, bisection_steps: int = 60,
                       lam_range=(1e-8, 1e6)) -> ProxBoundednessReport:
    """Heuristic prox-boundedness check.

    ``f(y) + y**2/(2*lam)`` is evaluated at geometrically spaced ``|y|`` up to
    ``probe_radius``; divergence means the last 10 probes decrease strictly and
    end below -1e12.  Grid functions have bounded support and are always
    prox-bounded.  With ``threshold`` the supremum of admissible lambda is
    located by bisection over ``lam_range``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    trace, diverged = _probe(f, lam, probe_radius)
    witness = min(trace, key=lambda p: p[1]) if diverged else None
    thr = None
    if threshold:
        lo, hi = lam_range
        if isinstance(f, GridSpec) or not _probe(f, hi, probe_radius)[1]:
            thr = math.inf
        elif _probe(f, lo, probe_radius)[1]:
            thr = 0.0
        else:
            for _ in range(bisection_steps):
                mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
                if _probe(f, mid, probe_radius)[1]:
                    hi = mid
                else:
                    lo = mid
            thr = 0.5 * (lo + hi)
    return ProxBoundednessReport(lam, not diverged, witness, thr, tuple(trace))
