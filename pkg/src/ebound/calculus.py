"""Closed-form transfers between error-bound certificates.

Every rule is plain real arithmetic on ``(gamma, mu)``.  Side conditions are not
gates: each derived certificate carries a ledger saying which hypotheses were
verified by a checker, asserted by the caller, or left open, and is marked
``derived`` only when none is open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from .certify import UNIFORM, Certificate, base_kind, check_exponent
from .errors import (ConstantTooLarge, CoverIncomplete, ExponentOutOfRange,
                     HypothesisViolated, MissingModulus, NonConstantOnSet)
from .fnmodel import FunctionSpec, evaluate

__all__ = ["Transfer", "TransferRule", "DerivedCertificate", "RULES",
           "kl_to_lseb", "lseb_to_lheb", "lheb_to_lseb_proxreg", "lseb_to_kl_proxreg",
           "lseb_envelope_transfer", "lheb_envelope_transfer", "uniformize",
           "equivalence_chain", "apply_rule"]

DEFAULT_DELTA = 0.01
CONSTANT_TOL = 1e-9


class Transfer(NamedTuple):
    gamma: float
    mu: float
    open_bound: bool = False  # any mu strictly above the materialized one is admissible


@dataclass(frozen=True)
class TransferRule:
    name: str
    input_kind: str
    output_kind: str
    hypotheses: tuple


RULES = {
    "kl2lseb": TransferRule("kl2lseb", "KL", "LSEB", ()),
    "lseb2lheb": TransferRule("lseb2lheb", "LSEB", "LHEB", ()),
    "lheb2lseb": TransferRule("lheb2lseb", "LHEB", "LSEB", ("prox-regular with modulus rho",)),
    "lseb2kl": TransferRule("lseb2kl", "LSEB", "KL", ("prox-regular with modulus rho",)),
    "env-lseb": TransferRule("env-lseb", "LSEB", "LSEB",
                             ("lambda below the prox-boundedness threshold",
                              "0 in the subdifferential of the envelope at the point")),
    "env-lheb": TransferRule("env-lheb", "LHEB", "LHEB",
                             ("lambda below the prox-boundedness threshold",
                              "mu >= 2 lambda", "condition (iii)")),
}


@dataclass(frozen=True)
class DerivedCertificate:
    """A certificate plus the provenance of its side conditions.

    ``hypotheses`` maps each side condition to ``"verified"``, ``"asserted"``
    or ``"unverified"``.
    """

    cert: Certificate
    rule: str
    hypotheses: dict = field(default_factory=dict)
    open_bound: bool = False
    source: Optional[Certificate] = None

    @property
    def status(self) -> str:
        return "conditional" if "unverified" in self.hypotheses.values() else "derived"

    def to_json(self):
        out = {"rule": self.rule, "status": self.status, "certificate": self.cert.to_json(),
               "hypotheses": dict(self.hypotheses), "open_bound": self.open_bound}
        if self.source is not None:
            out["source"] = self.source.to_json()
        return out


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value}")


def kl_to_lseb(gamma1: float, mu1: float) -> Transfer:
    check_exponent("KL", gamma1, module="calculus")
    _positive("mu", mu1)
    g2 = gamma1 / (1.0 - gamma1)
    mu2 = (1.0 - gamma1) ** (-g2) * mu1 ** (1.0 / (1.0 - gamma1))
    return Transfer(g2, mu2)


def lseb_to_lheb(gamma2: float, mu2: float) -> Transfer:
    check_exponent("LSEB", gamma2, module="calculus")
    _positive("mu", mu2)
    g3 = gamma2 + 1.0
    # 0**0 is 1 in Python, the gamma2 -> 0 limit of the formula
    return Transfer(g3, g3 ** g3 / gamma2 ** gamma2 * mu2)


def lheb_to_lseb_proxreg(gamma3: float, mu3: float, rho: float,
                         delta: float = DEFAULT_DELTA) -> Transfer:
    """Reverse Hölder-to-level-set transfer for prox-regular functions.

    For ``1 <= gamma3 < 2`` the admissible constants form the open ray
    ``mu > mu3``; ``mu3 * (1 + delta)`` is returned with ``open_bound`` set.
    """
    _positive("mu", mu3)
    if not rho >= 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    if 1.0 <= gamma3 < 2.0:
        _positive("delta", delta)
        return Transfer(gamma3 - 1.0, mu3 * (1.0 + delta), True)
    if gamma3 == 2.0:
        if rho * mu3 >= 2.0:
            raise ConstantTooLarge(f"need rho*mu < 2, got {rho * mu3}", module="calculus")
        return Transfer(1.0, 2.0 * mu3 / (2.0 - rho * mu3))
    raise ExponentOutOfRange(f"exponent must lie in [1, 2], got {gamma3}", module="calculus")


def lseb_to_kl_proxreg(gamma2: float, mu2: float, rho: float) -> Transfer:
    _positive("mu", mu2)
    if not rho >= 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    if not 0.0 < gamma2 < 2.0:
        raise ExponentOutOfRange(f"exponent must lie in (0, 2), got {gamma2}", module="calculus")
    g1 = max(gamma2 / (1.0 + gamma2), gamma2 / 2.0)
    mu1 = (mu2 ** (1.0 / gamma2) + 0.5 * rho * mu2 ** (2.0 / gamma2)) ** g1
    return Transfer(g1, mu1)


def lseb_envelope_transfer(gamma: float, mu: float, lam: float) -> Transfer:
    check_exponent("LSEB", gamma, module="calculus")
    _positive("mu", mu)
    _positive("lambda", lam)
    if gamma == 0:
        return Transfer(1.0, mu + lam)
    g = max(1.0, gamma)
    return Transfer(g, lam * (1.0 + (mu / lam) ** (1.0 / gamma)) ** g)


def lheb_envelope_transfer(gamma: float, mu: float, lam: float) -> Transfer:
    check_exponent("LHEB", gamma, module="calculus")
    _positive("mu", mu)
    _positive("lambda", lam)
    if mu < 2.0 * lam:
        raise HypothesisViolated(f"needs mu >= 2*lambda, got mu={mu}, lambda={lam}",
                                 module="calculus")
    return Transfer(max(2.0, gamma), 2.0 ** max(1.0, gamma - 1.0) * mu)


def _ledger(rule, verified=(), asserted=()):
    out = {}
    for h in RULES[rule].hypotheses:
        out[h] = "verified" if h in verified else "asserted" if h in asserted else "unverified"
    return out


def apply_rule(rule: str, cert: Certificate, *, lam: Optional[float] = None,
               rho: Optional[float] = None, delta: float = DEFAULT_DELTA,
               verified: Sequence[str] = (), asserted: Sequence[str] = ()
               ) -> DerivedCertificate:
    """Apply one named rule to a certificate, keeping locality and radii."""
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    spec = RULES[rule]
    if base_kind(cert.kind) != spec.input_kind:
        raise ValueError(f"rule {rule} takes {spec.input_kind} certificates, got {cert.kind}")
    if rule in ("lheb2lseb", "lseb2kl") and rho is None:
        rho = cert.rho
        if rho is None:
            raise MissingModulus(f"rule {rule} needs the prox-regularity modulus rho",
                                 module="calculus")
    if rule.startswith("env-") and lam is None:
        raise ValueError(f"rule {rule} needs lambda")

    if rule == "kl2lseb":
        t = kl_to_lseb(cert.gamma, cert.mu)
    elif rule == "lseb2lheb":
        t = lseb_to_lheb(cert.gamma, cert.mu)
    elif rule == "lheb2lseb":
        t = lheb_to_lseb_proxreg(cert.gamma, cert.mu, rho, delta)
    elif rule == "lseb2kl":
        t = lseb_to_kl_proxreg(cert.gamma, cert.mu, rho)
    elif rule == "env-lseb":
        t = lseb_envelope_transfer(cert.gamma, cert.mu, lam)
    else:
        t = lheb_envelope_transfer(cert.gamma, cert.mu, lam)
        verified = tuple(verified) + ("mu >= 2 lambda",)

    out_kind = UNIFORM[spec.output_kind] if cert.uniform else spec.output_kind
    nu = cert.nu
    if spec.output_kind == "LHEB":
        nu = None
    elif nu is None:
        nu = math.inf  # Hölder bounds carry no level gap
    fbar = None if rule.startswith("env-") else cert.fbar
    out = Certificate(out_kind, t.gamma, t.mu, cert.locality, eta=cert.eta, nu=nu,
                      fbar=fbar, rho=rho if rho is not None else cert.rho)
    return DerivedCertificate(out, rule, _ledger(rule, verified, asserted), t.open_bound, cert)


def uniformize(certs: Sequence[Certificate], omega: Sequence[float],
               cover_radii: Optional[Sequence[float]] = None,
               f: Optional[FunctionSpec] = None
               ) -> Certificate:
    """Combine pointwise certificates covering a finite node set into a uniform one.

    Each certificate at ``z_i`` holds on ``B(z_i, eps_i)``; the half balls must
    cover ``omega``.  The result has the largest exponent and constant, tube
    radius ``min eps_i / 2`` and the smallest level gap.  Radii default to each
    certificate's ``eta``.  With ``f`` given, its
    values on ``omega`` must agree within 1e-9.
    """
    certs = list(certs)
    if not certs:
        raise ValueError("need at least one certificate")
    if cover_radii is None:
        cover_radii = [c.eta for c in certs]
        if None in cover_radii:
            raise ValueError("certificates without eta need explicit cover radii")
    if len(cover_radii) != len(certs):
        raise ValueError("one cover radius per certificate")
    omega = tuple(float(z) for z in omega)
    if not omega:
        raise ValueError("node set must be nonempty")
    kinds = {base_kind(c.kind) for c in certs}
    if len(kinds) != 1:
        raise ValueError(f"certificates of mixed kinds: {sorted(kinds)}")
    if any(c.uniform for c in certs):
        raise ValueError("uniformize takes pointwise certificates")
    for r in cover_radii:
        _positive("cover radius", r)
    for z in omega:
        if not any(abs(z - c.locality) < r / 2 for c, r in zip(certs, cover_radii)):
            raise CoverIncomplete(f"node {z!r} is not within half a radius of any certificate",
                                  module="calculus")
    fbar = None
    if f is not None:
        vals = [evaluate(f, z) for z in omega]
        if max(vals) - min(vals) > CONSTANT_TOL:
            raise NonConstantOnSet(f"f varies by {max(vals) - min(vals):.3g} on the node set",
                                   module="calculus")
        fbar = vals[0]
    kind = kinds.pop()
    nu = None
    if kind != "LHEB":
        nu = min(c.nu for c in certs)
    return Certificate(UNIFORM[kind], max(c.gamma for c in certs), max(c.mu for c in certs),
                       omega, eta=min(cover_radii) / 2, nu=nu, fbar=fbar)


def equivalence_chain(start: Certificate, rho: Optional[float] = None,
                      delta: float = DEFAULT_DELTA) -> list[DerivedCertificate]:
    """Every certificate reachable from a uniform one by the forward rules and,
    with ``rho``, the prox-regular reverse rules.

    Forward: KL -> LSEB -> Hölder.  Reverse: Hölder -> LSEB -> KL.  Each kind
    appears once, reached by the shortest path; the reverse Hölder -> LSEB step
    uses the equality form of the exponent-2 constant.
    """
    if not start.uniform:
        raise ValueError("the equivalence chain starts from a uniform certificate")
    if rho is not None and not rho >= 0:
        raise ValueError("rho must be nonnegative")
    asserted = ("prox-regular with modulus rho",) if rho is not None else ()
    seen = {base_kind(start.kind)}
    frontier = [start]
    out: list[DerivedCertificate] = []
    steps = {"KL": ["kl2lseb"], "LSEB": ["lseb2lheb"], "LHEB": []}
    if rho is not None:
        steps["LHEB"].append("lheb2lseb")
        steps["LSEB"].append("lseb2kl")
    while frontier:
        nxt = []
        for cert in frontier:
            for rule in steps[base_kind(cert.kind)]:
                target = RULES[rule].output_kind
                if target in seen:
                    continue
                try:
                    d = apply_rule(rule, cert, rho=rho, delta=delta, asserted=asserted)
                except (ExponentOutOfRange, ConstantTooLarge):
                    continue
                seen.add(target)
                out.append(d)
                nxt.append(d.cert)
        frontier = nxt
    return out
