"""Error-bound certificates: sample-based validation, estimation, failure scans.

All results are evidence on finite samples, never proofs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (DegenerateFit, ExponentOutOfRange, InvalidCertificate,
                     NonConstantOnSet, PlanMismatch)
from .fnmodel import (FunctionSpec, GridSpec, SamplePlan, derivative_array, evaluate,
                      sample)
from .varanalysis import levelset_distance, subgrad_distance

__all__ = ["KINDS", "Certificate", "ValidationReport", "ExponentFit", "validate",
           "estimate", "kl_failure_scan", "KLScan", "stationary_scan", "Bracket"]

KINDS = ("KL", "LSEB", "LHEB", "uKL", "uLSEB", "uHEB")
UNIFORM = {"KL": "uKL", "LSEB": "uLSEB", "LHEB": "uHEB"}
POINTWISE = {v: k for k, v in UNIFORM.items()}
PASS_TOL = 1e-9
CONSTANT_TOL = 1e-9


def base_kind(kind: str) -> str:
    return POINTWISE.get(kind, kind)


def check_exponent(kind: str, gamma: float, module: str = "certify") -> None:
    base = base_kind(kind)
    if base == "KL" and not 0 <= gamma < 1:
        raise ExponentOutOfRange(f"KL exponents lie in [0, 1), got {gamma}", module=module)
    if base == "LSEB" and not gamma >= 0:
        raise ExponentOutOfRange(f"LSEB exponents are >= 0, got {gamma}", module=module)
    if base == "LHEB" and not gamma > 0:
        raise ExponentOutOfRange(f"LHEB exponents are > 0, got {gamma}", module=module)


@dataclass(frozen=True)
class Certificate:
    """One error-bound claim.

    ``locality`` is a point for pointwise kinds and a tuple of nodes for the
    uniform ones.  ``eta`` is the ball radius (the tube radius for uniform
    kinds); ``None`` means "some radius exists" and must be supplied at
    validation time.  ``nu`` is the level gap (``inf`` = unbounded); Hölder
    kinds carry none.
    """

    kind: str
    gamma: float
    mu: float
    locality: Union[float, Tuple[float, ...]] = 0.0
    eta: Optional[float] = None
    nu: Optional[float] = math.inf
    fbar: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidCertificate(f"unknown certificate kind {self.kind!r}")
        check_exponent(self.kind, self.gamma)
        if not self.mu > 0:
            raise InvalidCertificate(f"constant must be positive, got {self.mu}")
        if self.eta is not None and not self.eta > 0:
            raise InvalidCertificate("eta must be positive")
        if base_kind(self.kind) == "LHEB":
            object.__setattr__(self, "nu", None)
        elif self.nu is None:
            object.__setattr__(self, "nu", math.inf)
        elif not self.nu > 0:
            raise InvalidCertificate("nu must be positive")
        if self.rho is not None and not self.rho >= 0:
            raise InvalidCertificate("rho must be nonnegative")
        if self.uniform:
            loc = self.locality
            if isinstance(loc, (int, float)):
                loc = (loc,)
            loc = tuple(float(z) for z in loc)
            if not loc:
                raise InvalidCertificate("uniform certificates need a nonempty node set")
            object.__setattr__(self, "locality", loc)
        else:
            if not isinstance(self.locality, (int, float)):
                raise InvalidCertificate(f"{self.kind} certificates live at a single point")
            object.__setattr__(self, "locality", float(self.locality))

    @property
    def uniform(self) -> bool:
        return self.kind.startswith("u")

    @property
    def points(self) -> Tuple[float, ...]:
        return self.locality if self.uniform else (self.locality,)

    def to_json(self) -> dict:
        nu = self.nu
        return {
            "kind": self.kind, "gamma": self.gamma, "mu": self.mu,
            "locality": list(self.locality) if self.uniform else self.locality,
            "eta": self.eta,
            "nu": None if nu is None else ("unbounded" if nu == math.inf else nu),
            "fbar": self.fbar, "rho": self.rho,
        }

    @classmethod
    def from_json(cls, obj) -> "Certificate":
        nu = obj.get("nu", math.inf)
        if nu == "unbounded":
            nu = math.inf
        loc = obj.get("locality", 0.0)
        if isinstance(loc, list):
            loc = tuple(loc)
        return cls(kind=obj["kind"], gamma=float(obj["gamma"]), mu=float(obj["mu"]),
                   locality=loc, eta=obj.get("eta"), nu=nu, fbar=obj.get("fbar"),
                   rho=obj.get("rho"))


@dataclass(frozen=True)
class ValidationReport:
    cert: Certificate
    samples: int
    worst_violation: float
    tight_mu: float
    failures: tuple
    rows: tuple  # (x, lhs, rhs) sorted by x

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self):
        return {
            "certificate": self.cert.to_json(), "samples": self.samples,
            "passed": self.passed, "worst_violation": self.worst_violation,
            "tight_mu": self.tight_mu,
            "failures": [{"x": x, "lhs": l, "rhs": r} for x, l, r in self.failures],
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EB_THREADS", "1")))
    except ValueError:
        return 1


def _pow(d: float, gamma: float) -> float:
    # 0**0 := 0 here: a point already in the level set has nothing to bound
    if gamma == 0:
        return 1.0 if d > 0 else 0.0
    return d ** gamma


def _level_distance(f, fbar, x, anchors):
    near = min(abs(x - a) for a in anchors)
    window = near * (1 + 1e-9) + 1e-300
    if isinstance(f, GridSpec):
        window += f.h
    return levelset_distance(f, fbar, x, window, anchors=anchors).value


def _sides(f, kind, fbar, x, fx, anchors):
    """(lhs base, rhs) before the exponent is applied."""
    base = base_kind(kind)
    if base == "KL":
        return fx - fbar, subgrad_distance(f, x).value
    dist = _level_distance(f, fbar, x, anchors)
    if base == "LSEB":
        return dist, subgrad_distance(f, x).value
    return dist, fx - fbar


def _common_value(f, points):
    vals = [evaluate(f, z) for z in points]
    if max(vals) - min(vals) > CONSTANT_TOL:
        raise NonConstantOnSet(f"f varies by {max(vals) - min(vals):.3g} on the node set")
    return vals[0]


def _collect(f, cert: Certificate, plan: Optional[SamplePlan], count: int, seed: int,
             offset: float):
    if plan is not None:
        if cert.eta is not None and plan.radius > cert.eta:
            raise PlanMismatch(f"plan radius {plan.radius} exceeds certificate eta {cert.eta}")
        nu = cert.nu if cert.nu is not None else math.inf
        if plan.gap > nu:
            raise PlanMismatch(f"plan gap {plan.gap} exceeds certificate nu {nu}")
        count, seed, offset = plan.count, plan.seed, plan.offset
        radius, gap = plan.radius, plan.gap
    else:
        if cert.eta is None:
            raise PlanMismatch("certificate has no radius; pass a SamplePlan")
        radius, gap = cert.eta, (cert.nu if cert.nu is not None else math.inf)
    points = cert.points
    fbar = _common_value(f, points)
    pts: dict[float, float] = {}
    for k, z in enumerate(points):
        p = SamplePlan(z, radius, gap, count, offset, seed + k)
        for x, fx in sample(f, p, strict_above=True):
            if fx > fbar and fx < fbar + gap:
                pts[x] = fx
    return fbar, sorted(pts.items())


def _rows(f, kind, fbar, samples, anchors):
    def one(item):
        x, fx = item
        return (x,) + _sides(f, kind, fbar, x, fx, anchors)
    threads = _threads()
    if threads > 1 and len(samples) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, samples))
    return [one(s) for s in samples]


def validate(f: FunctionSpec, cert: Certificate, plan: Optional[SamplePlan] = None, *,
             count: int = 200, seed: int = 0, offset: float = 1e-7) -> ValidationReport:
    """Check the certificate's inequality on sampled points.

    Without a plan, points are drawn from the certificate's own region.  A
    sample fails when ``lhs - mu*rhs > 1e-9 * (1 + |lhs|)``.
    """
    fbar, samples = _collect(f, cert, plan, count, seed, offset)
    rows = []
    worst, tight, failures = -math.inf, 0.0, []
    for x, base, rhs in _rows(f, cert.kind, fbar, samples, cert.points):
        lhs = _pow(base, cert.gamma)
        viol = lhs - cert.mu * rhs
        worst = max(worst, viol)
        if lhs > 0:
            tight = max(tight, lhs / rhs if rhs > 0 else math.inf)
        if viol > PASS_TOL * (1 + abs(lhs)):
            failures.append((x, lhs, rhs))
        rows.append((x, lhs, rhs))
    cert = replace(cert, fbar=fbar) if cert.fbar is None else cert
    return ValidationReport(cert, len(rows), worst, tight, tuple(failures), tuple(rows))


@dataclass(frozen=True)
class ExponentFit:
    kind: str
    gamma_hat: float
    intercept_hat: float
    residual: float
    samples: int

    def to_json(self):
        return {"kind": self.kind, "gamma_hat": self.gamma_hat,
                "intercept_hat": self.intercept_hat, "residual": self.residual,
                "samples": self.samples}


def _round_exponent(kind, gamma):
    g = round(gamma * 12) / 12
    base = base_kind(kind)
    if base == "KL":
        return min(max(g, 0.0), 11 / 12)
    if base == "LHEB":
        return max(g, 1 / 12)
    return max(g, 0.0)


def estimate(f: FunctionSpec, kind: str, center: float, plan: SamplePlan
             ) -> Tuple[ExponentFit, Certificate]:
    """Least-squares exponent in log-log coordinates, then the tight constant.

    KL regresses ``log d(0, df)`` on ``log(f - fbar)``; LSEB regresses
    ``log d(0, df)`` on ``log dist``; LHEB regresses ``log(f - fbar)`` on
    ``log dist``.  The slope is the exponent.  The suggested certificate rounds
    it to the nearest 1/12 and pads the tight constant by 5%.
    """
    kind = base_kind(kind)
    fbar = evaluate(f, center)
    samples = [(x, fx) for x, fx in sample(f, plan, strict_above=True) if fx > fbar]
    rows = _rows(f, kind, fbar, samples, (center,))
    good = [(b, r) for _, b, r in rows if b > 0 and r > 0 and math.isfinite(b) and math.isfinite(r)]
    if len(good) < 8:
        raise DegenerateFit(f"only {len(good)} usable samples (need 8)")
    X = np.log([b for b, _ in good])
    Y = np.log([r for _, r in good])
    if np.ptp(X) == 0:
        raise DegenerateFit("all left-hand sides are equal")
    slope, intercept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + intercept)) ** 2)))
    fit = ExponentFit(kind, float(slope), float(intercept), resid, len(good))
    gamma = _round_exponent(kind, float(slope))
    tight = max(_pow(b, gamma) / r for b, r in good)
    nu = None if kind == "LHEB" else plan.gap
    cert = Certificate(kind, gamma, 1.05 * tight, center, eta=plan.radius, nu=nu, fbar=fbar)
    return fit, cert


@dataclass(frozen=True)
class KLScan:
    center: float
    alphas: tuple
    rows: tuple  # (x, f(x) - fbar, d(0, df(x)), (q_alpha, ...))
    vanishing: dict
    decay: dict  # fitted exponent s in q ~ (f - fbar)**s

    def quotients(self, alpha) -> np.ndarray:
        k = self.alphas.index(alpha)
        return np.array([r[3][k] for r in self.rows])


_TAIL_SLACK = 1.1
_DECAY_MIN = 0.1


def kl_failure_scan(f: FunctionSpec, center: float, alphas: Sequence[float],
                    points: Sequence[float]) -> KLScan:
    """Quotients ``(f(x) - f(center))**(-alpha) * d(0, df(x))`` along ``points``.

    A quotient sequence is flagged vanishing when, taken in order of decreasing
    ``f(x) - f(center)``, its second half never grows by more than 10% per step
    and it either falls below a tenth of its first value or decays like a
    positive power of ``f(x) - f(center)`` (log-log slope at least 0.1).  The
    flag is a heuristic; the table is the result.
    """
    alphas = tuple(float(a) for a in alphas)
    for a in alphas:
        if not 0 <= a < 1:
            raise ExponentOutOfRange(f"alpha must lie in [0, 1), got {a}", module="certify")
    fbar = evaluate(f, center)
    rows = []
    for x in points:
        gap = evaluate(f, x) - fbar
        if not gap > 0:
            raise ValueError(f"point {x!r} does not lie above the level f(center)")
        d = subgrad_distance(f, x).value
        rows.append((float(x), float(gap), float(d), tuple(gap ** (-a) * d for a in alphas)))
    order = sorted(range(len(rows)), key=lambda k: -rows[k][1])
    vanishing, decay = {}, {}
    for k, a in enumerate(alphas):
        q = np.array([rows[i][3][k] for i in order])
        gaps = np.array([rows[i][1] for i in order])
        tail = q[len(q) // 2:]
        monotone = bool(np.all(tail[1:] <= _TAIL_SLACK * tail[:-1]))
        pos = q > 0
        s = math.nan
        if pos.sum() >= 2 and np.ptp(np.log(gaps[pos])) > 0:
            s = float(np.polyfit(np.log(gaps[pos]), np.log(q[pos]), 1)[0])
        decays = q[-1] < 0.1 * q[0] or (not math.isnan(s) and s >= _DECAY_MIN)
        vanishing[a] = bool(len(q) >= 2 and monotone and decays)
        decay[a] = s
    return KLScan(float(center), alphas, tuple(rows), vanishing, decay)


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    root: float


def _bisect_sign(g, lo, hi, steps=50):
    glo = g(lo)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return mid, mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return lo, hi


def stationary_scan(f: FunctionSpec, interval: Tuple[float, float], step: float
                    ) -> list[Bracket]:
    """Sign changes of the derivative (or grid secants) over ``interval``."""
    a, b = interval
    if not (step > 0 and b > a):
        raise ValueError("need a < b and a positive step")
    if isinstance(f, GridSpec):
        i0 = max(1, int(math.ceil((a - f.x0) / f.h)))
        i1 = min(len(f) - 2, int(math.floor((b - f.x0) / f.h)))
        out = []
        for i in range(i0, i1 + 1):
            sm = (f.values[i] - f.values[i - 1]) / f.h
            sp = (f.values[i + 1] - f.values[i]) / f.h
            if (sm < 0 < sp) or (sm > 0 > sp) or (sm == 0 and sp != 0):
                x = f.node(i)
                out.append(Bracket(x, x, x))
        return out

    xs = a + np.arange(int(math.floor((b - a) / step)) + 1) * step
    _, d = derivative_array(f, xs)
    sign = np.sign(d)

    def g(x):
        return float(derivative_array(f, np.array([x]))[1][0])

    out = []
    last = None  # index of last nonzero, finite sign
    for k in range(xs.size):
        s = sign[k]
        if np.isnan(s):
            continue
        if s == 0:
            if last is None or sign[last] != 0 or k - last > 1:
                out.append(Bracket(float(xs[k]), float(xs[k]), float(xs[k])))
            last = k
            continue
        if last is not None and sign[last] != 0 and sign[last] != s:
            lo, hi = _bisect_sign(g, float(xs[last]), float(xs[k]))
            out.append(Bracket(lo, hi, 0.5 * (lo + hi)))
        last = k
    return out
