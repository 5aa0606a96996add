"""Built-in functions with ground-truth metadata."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidFunction, NothingToAudit, UnknownEntry
from .fnmodel import AnalyticSpec, GridSpec, discretize

__all__ = ["CatalogEntry", "KnownEnvelope", "get", "names", "audit_disputed_formula",
           "function_from_json", "staircase_piece"]

INF = math.inf


@dataclass(frozen=True)
class KnownEnvelope:
    lam: float
    evaluator: Callable
    provenance: str  # "closed-form" or "disputed"


@dataclass(frozen=True)
class CatalogEntry:
    spec: AnalyticSpec
    known_certificates: tuple = ()
    known_envelopes: tuple = ()
    notes: str = ""
    tags: tuple = ()

    def envelope(self, lam: float, provenance: Optional[str] = None) -> Optional[KnownEnvelope]:
        for env in self.known_envelopes:
            if env.lam in (lam, None) and (provenance is None or env.provenance == provenance):
                return env
        return None


# -- staircase ---------------------------------------------------------------

def staircase_piece(x):
    """Piece index ``n`` with ``1/n < x <= 1/(n-1)``, for ``0 < x <= 1/2``.

    Starts from ``floor(1/x) + 1`` and corrects with the same float comparisons
    that define membership, so piece boundaries are consistent.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        n = np.floor(1.0 / x) + 1.0
    n = np.where(np.isfinite(n), n, 2.0 ** 60)
    exact = n < 2.0 ** 52
    for _ in range(3):
        lower = exact & (x <= 1.0 / n)
        upper = exact & (n > 3) & (x > 1.0 / (n - 1.0))
        if not (lower.any() or upper.any()):
            break
        n = n + lower - upper
    return np.maximum(n, 3.0)


def _staircase_eval(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, 0.0, x * x + 0.25)
    mid = (x > 0) & (x <= 0.5)
    if mid.any():
        xm = x[mid]
        n = staircase_piece(xm)
        with np.errstate(over="ignore"):
            out[mid] = xm * xm + 1.0 / n - 1.0 / (n * n)
    return out


def _staircase_deriv(x):
    x = np.asarray(x, dtype=float)
    n = staircase_piece(np.clip(x, 1e-300, 0.5))
    at_jump = (x > 0) & (x <= 0.5) & (x == 1.0 / (n - 1.0))
    d = np.where(x < 0, 0.0, 2.0 * x)
    dm = np.where(at_jump, np.nan, d)
    dp = np.where(at_jump, np.nan, d)
    dp = np.where(x == 0, 1.0, dp)
    return dm, dp


def _staircase_locator(x):
    if x <= 0:
        return 0.0
    if x > 0.75:
        return 0.5
    n = float(staircase_piece(min(x, 0.5)))
    cands = [1.0 / (n - 1.0), 1.0 / n, 0.0]
    if n > 3:
        cands.append(1.0 / (n - 2.0))
    return min(cands, key=lambda b: abs(b - x))


def _staircase_disputed_envelope(x):
    """The closed form printed for the lambda = 1/2 envelope (not reproduced)."""
    x = np.asarray(x, dtype=float)
    n = staircase_piece(np.clip(x, 1e-300, 0.5))
    with np.errstate(over="ignore"):
        mid = 0.5 * x * x + 1.0 / n - 1.0 / (n * n)
    return np.where(x <= 0, 0.0, np.where(x > 0.5, 0.5 * x * x + 0.25, mid))


# -- oscillatory -------------------------------------------------------------

def _osc_eval(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = x * x * (2.0 + np.cos(1.0 / x))
    return np.where(x == 0, 0.0, v)


def _osc_deriv(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 1.0 / x
        d = 4.0 * x + 2.0 * x * np.cos(r) + np.sin(r)
    d = np.where(x == 0, 0.0, d)
    return d, d


# -- two_well ----------------------------------------------------------------

def _two_well(gap):
    kink = -gap / 4.0

    def ev(x):
        x = np.asarray(x, dtype=float)
        return np.minimum((x - 1.0) ** 2, (x + 1.0) ** 2 + gap)

    def de(x):
        x = np.asarray(x, dtype=float)
        left, right = 2.0 * (x + 1.0), 2.0 * (x - 1.0)
        dm = np.where(x <= kink, left, right)
        dp = np.where(x < kink, left, right)
        return dm, dp

    return ev, de, kink


def _huber(lam):
    def env(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= lam, x * x / (2 * lam), np.abs(x) - lam / 2)
    return env


def _cert(kind, gamma, mu, at=0.0, eta=None, nu=INF, fbar=None):
    from .certify import Certificate
    return Certificate(kind=kind, gamma=gamma, mu=mu, locality=at, eta=eta, nu=nu, fbar=fbar)


def _build(name, params):
    p = dict(params)
    if name == "staircase":
        if p:
            raise InvalidFunction("staircase takes no parameters")
        spec = AnalyticSpec("staircase", _staircase_eval, {}, _staircase_deriv,
                            breakpoints=(0.0,), breakpoint_locator=_staircase_locator)
        return CatalogEntry(
            spec,
            known_certificates=(_cert("LSEB", 1.0, 0.5, eta=0.2),),
            known_envelopes=(KnownEnvelope(0.5, _staircase_disputed_envelope, "disputed"),),
            notes="0 for x<=0; x^2+1/n-1/n^2 on (1/n, 1/(n-1)], n>=3; x^2+1/4 for x>1/2. "
                  "Satisfies LSEB at 0 (exponent 1, constant 1/2) but no KL exponent. "
                  "The stored lambda=1/2 envelope formula disagrees with direct minimization.",
        )
    if name == "oscillatory":
        if p:
            raise InvalidFunction("oscillatory takes no parameters")
        spec = AnalyticSpec("oscillatory", _osc_eval, {}, _osc_deriv)
        return CatalogEntry(
            spec,
            known_certificates=(_cert("LHEB", 2.0, 1.0, eta=0.3, nu=None),),
            notes="x^2 (2 + cos(1/x)), 0 at 0. LHEB at 0 (exponent 2, constant 1); "
                  "stationary points accumulate at 0, so no LSEB exponent exists.",
        )
    if name == "quadratic":
        a = float(p.pop("a", 1.0))
        if p or not a > 0:
            raise InvalidFunction("quadratic takes one positive parameter 'a'")
        spec = AnalyticSpec("quadratic", lambda x: a * np.asarray(x, float) ** 2, {"a": a},
                            lambda x: (2 * a * np.asarray(x, float),) * 2)
        envs = tuple(KnownEnvelope(lam, (lambda lam: lambda x: a * np.asarray(x, float) ** 2
                                         / (1 + 2 * a * lam))(lam), "closed-form")
                     for lam in (0.25, 0.5, 1.0))
        return CatalogEntry(
            spec,
            known_certificates=(
                _cert("KL", 0.5, 1 / math.sqrt(4 * a), eta=1.0, nu=1.0),
                _cert("LSEB", 1.0, 1 / (2 * a), eta=1.0),
                _cert("LHEB", 2.0, 1 / a, eta=1.0, nu=None),
            ),
            known_envelopes=envs,
            notes="a x^2; envelope a x^2/(1+2 a lambda).",
        )
    if name == "absval":
        if p:
            raise InvalidFunction("absval takes no parameters")
        spec = AnalyticSpec("absval", lambda x: np.abs(np.asarray(x, float)), {},
                            lambda x: (np.where(np.asarray(x) > 0, 1.0, -1.0),
                                       np.where(np.asarray(x) < 0, -1.0, 1.0)),
                            breakpoints=(0.0,))
        envs = tuple(KnownEnvelope(lam, _huber(lam), "closed-form") for lam in (0.25, 0.5, 1.0))
        return CatalogEntry(
            spec,
            known_certificates=(
                _cert("KL", 0.0, 1.0, eta=1.0, nu=1.0),
                _cert("LSEB", 0.0, 1.0, eta=1.0),
                _cert("LHEB", 1.0, 1.0, eta=1.0, nu=None),
            ),
            known_envelopes=envs,
            notes="|x|; envelope is the Huber function.",
        )
    if name == "neg_quadratic":
        if p:
            raise InvalidFunction("neg_quadratic takes no parameters")
        spec = AnalyticSpec("neg_quadratic", lambda x: -np.asarray(x, float) ** 2, {},
                            lambda x: (-2 * np.asarray(x, float),) * 2)
        return CatalogEntry(spec, notes="-x^2; prox-bounded with threshold 1/2.")
    if name == "two_well":
        gap = float(p.pop("gap", 1.5))
        if p or not gap > 0:
            raise InvalidFunction("two_well takes one positive parameter 'gap'")
        ev, de, kink = _two_well(gap)
        spec = AnalyticSpec("two_well", ev, {"gap": gap}, de, breakpoints=(kink,))
        return CatalogEntry(
            spec,
            known_certificates=(_cert("LHEB", 2.0, 1.0, at=1.0, eta=1.0, nu=None),),
            notes="min((x-1)^2, (x+1)^2 + gap): global min at 1, shallower local min at -1. "
                  "Exists to exercise the proximal-value condition failing.",
            tags=("invented",),
        )
    raise UnknownEntry(f"unknown catalog entry {name!r}")


_NAMES = ("staircase", "oscillatory", "quadratic", "absval", "neg_quadratic", "two_well")


def names():
    return _NAMES


def get(name: str, **params) -> CatalogEntry:
    return _build(name, params)


def function_from_json(obj):
    """A GridSpec or catalog AnalyticSpec from its JSON object."""
    if "values" in obj:
        return GridSpec.from_json(obj)
    if "name" in obj:
        return get(obj["name"], **obj.get("params", {})).spec
    raise InvalidFunction("function JSON needs either 'values' or 'name'")


@dataclass(frozen=True)
class AuditReport:
    name: str
    lam: float
    lo: float
    hi: float
    h: float
    max_discrepancy: float
    mean_discrepancy: float
    witness_x: float
    witness_formula: float
    witness_bruteforce: float
    probes: tuple = field(default_factory=tuple)

    def to_json(self):
        return {
            "name": self.name, "lambda": self.lam,
            "grid": {"lo": self.lo, "hi": self.hi, "h": self.h},
            "max_discrepancy": self.max_discrepancy,
            "mean_discrepancy": self.mean_discrepancy,
            "witness": {"x": self.witness_x, "formula": self.witness_formula,
                        "bruteforce": self.witness_bruteforce},
            "probes": [dict(zip(("x", "formula", "bruteforce"), p)) for p in self.probes],
        }


def audit_disputed_formula(name: str, lam: float = 0.5, lo: float = -1.0, hi: float = 1.0,
                        h: float = 1e-4, probes=(0.4,)) -> AuditReport:
    """Compare a disputed closed-form envelope with exhaustive minimization."""
    from .envelope import brute_force_all

    entry = get(name)
    known = entry.envelope(lam, "disputed")
    if known is None:
        raise NothingToAudit(f"{name} has no disputed envelope formula at lambda={lam}")
    grid = discretize(entry.spec, lo, hi, h)
    env, _ = brute_force_all(grid, lam, collect=False)
    xs = grid.nodes
    formula = np.asarray(known.evaluator(xs), dtype=float)
    diff = np.abs(formula - env)
    k = int(np.argmax(diff))
    rows = []
    for x in probes:
        if lo <= x <= hi:
            i = grid.nearest_index(x)
            rows.append((float(xs[i]), float(formula[i]), float(env[i])))
    return AuditReport(name, lam, lo, hi, h, float(diff[k]), float(diff.mean()),
                       float(xs[k]), float(formula[k]), float(env[k]), tuple(rows))
