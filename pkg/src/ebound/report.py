"""Batch reproduction of the worked examples as CSV/JSON files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, calculus, catalog, envelope
from .certify import Certificate, estimate, kl_failure_scan, stationary_scan, validate
from .fnmodel import SamplePlan, derivative, discretize
from .io import write_csv, write_json
from .varanalysis import check_condition_iii

__all__ = ["report_bundle", "envelope_rows", "ENVELOPE_HEADER", "kl_sequence"]

ENVELOPE_HEADER = ("x", "f", "env", "prox_count", "prox_min_x", "prox_max_x")
KL_ALPHAS = (0.0, 0.25, 0.5, 0.75)


def envelope_rows(res: envelope.EnvelopeResult):
    xs = res.grid.nodes
    for i, x in enumerate(xs):
        prox = res.prox_points(i)
        yield (float(x), float(res.grid.values[i]), float(res.env[i]), len(prox),
               float(prox.min()), float(prox.max()))


def kl_sequence(n_lo: int = 10, n_hi: int = 200, shift: float = 1e-9):
    """Points just left of the jumps ``1/(n-1)``, with their ``n``."""
    ns = np.arange(n_lo, n_hi + 1)
    return ns, 1.0 / (ns - 1.0) - shift


def _quotient_rows(scan, ns):
    for n, (x, gap, d, qs) in zip(ns, scan.rows):
        bounds = [2.0 * n ** a / (n - 1.0) for a in scan.alphas]
        yield (int(n), x, gap, d, *qs, *bounds)


def _quotient_header(alphas):
    return (("n", "x", "f_gap", "subgrad_dist")
            + tuple(f"q_{a:g}" for a in alphas) + tuple(f"bound_{a:g}" for a in alphas))


def _validation(f, cert, **kw):
    rep = validate(f, cert, **kw)
    return rep.to_json()


def _staircase(out: Path, files: list):
    entry = catalog.get("staircase")
    f = entry.spec
    lam = 0.5
    grid = discretize(f, -1.0, 1.0, 1e-4)
    res = envelope.envelope_grid(grid, lam)
    write_csv(out / "staircase_envelope_lam0.5.csv", ENVELOPE_HEADER, envelope_rows(res))
    files.append("staircase_envelope_lam0.5.csv")

    ns, pts = kl_sequence()
    scan = kl_failure_scan(f, 0.0, KL_ALPHAS, pts)
    write_csv(out / "staircase_kl_quotients.csv", _quotient_header(KL_ALPHAS),
              _quotient_rows(scan, ns))
    files.append("staircase_kl_quotients.csv")

    # the same scan on the computed envelope, at the nearest grid nodes
    env_grid = res.as_grid()
    idx = sorted({env_grid.nearest_index(x) for x in pts}, reverse=True)
    env_pts = [env_grid.node(i) for i in idx if 0 < i < len(env_grid) - 1]
    env_scan = kl_failure_scan(env_grid, 0.0, KL_ALPHAS[:3], env_pts)
    write_csv(out / "staircase_envelope_kl_quotients.csv",
              ("x", "f_gap", "subgrad_dist") + tuple(f"q_{a:g}" for a in env_scan.alphas),
              ((x, g, d, *qs) for x, g, d, qs in env_scan.rows))
    files.append("staircase_envelope_kl_quotients.csv")

    cert = Certificate("LSEB", 1.0, 0.501, 0.0, eta=0.2)
    fit, suggested = estimate(f, "LSEB", 0.0, SamplePlan(0.0, 0.2, count=200, seed=0))
    transfer = calculus.apply_rule("env-lseb", entry.known_certificates[0], lam=lam,
                                   verified=("0 in the subdifferential of the envelope at the point",)
                                   if envelope.envelope_stationary(grid, lam, grid.index_of(0.0),
                                                                   result=res) else ())
    write_json(out / "staircase_certificates.json", {
        "validation": _validation(f, cert, count=200, seed=0),
        "estimate": {"fit": fit.to_json(), "suggested": suggested.to_json(),
                     "tight_mu": suggested.mu / 1.05},
        "kl_scan": {"alphas": list(KL_ALPHAS),
                    "vanishing": {f"{a:g}": v for a, v in scan.vanishing.items()},
                    "decay_exponent": {f"{a:g}": s for a, s in scan.decay.items()}},
        "envelope_kl_scan": {"vanishing": {f"{a:g}": v for a, v in env_scan.vanishing.items()}},
        "envelope_transfer": transfer.to_json(),
    })
    files.append("staircase_certificates.json")

    audits = [catalog.audit_disputed_formula("staircase", lam),
              catalog.audit_disputed_formula("staircase", lam, lo=0.01, hi=1.0)]
    write_json(out / "staircase_audit.json", [a.to_json() for a in audits])
    files.append("staircase_audit.json")


def _oscillatory(out: Path, files: list):
    entry = catalog.get("oscillatory")
    f = entry.spec
    brackets = stationary_scan(f, (0.001, 0.1), 1e-6)
    write_csv(out / "oscillatory_stationary.csv", ("lo", "hi", "root"),
              ((b.lo, b.hi, b.root) for b in brackets))
    files.append("oscillatory_stationary.csv")

    rows = []
    for k in range(1, 21):
        x1 = 1.0 / (2 * k * math.pi)
        x2 = 1.0 / (2 * k * math.pi + 1.5 * math.pi)
        rows.append((k, x1, derivative(f, x1)[0], 3.0 / (k * math.pi),
                     x2, derivative(f, x2)[0], 4.0 / (2 * k * math.pi + 1.5 * math.pi) - 1.0))
    write_csv(out / "oscillatory_derivatives.csv",
              ("k", "x_pos", "deriv_pos", "expected_pos", "x_neg", "deriv_neg", "expected_neg"),
              rows)
    files.append("oscillatory_derivatives.csv")

    lam = 0.5
    cond = check_condition_iii(f, lam, 0.0, 0.3, mode="sufficient")
    verified = ("condition (iii)",) if cond.holds else ()
    transfer = calculus.apply_rule("env-lheb", entry.known_certificates[0], lam=lam,
                                   verified=verified)
    write_json(out / "oscillatory_certificates.json", {
        "stationary_count": len(brackets),
        "validation": _validation(f, Certificate("LHEB", 2.0, 1.0, 0.0, eta=0.3),
                                  count=500, seed=0),
        "condition_iii": cond.to_json(),
        "envelope_transfer": transfer.to_json(),
    })
    files.append("oscillatory_certificates.json")


def _closed_form(name: str, out: Path, files: list):
    entry = catalog.get(name)
    grid = discretize(entry.spec, -1.0, 1.0, 1e-3)
    summary = {}
    for known in entry.known_envelopes:
        res = envelope.envelope_grid(grid, known.lam)
        exact = known.evaluator(grid.nodes)
        fname = f"{name}_envelope_lam{known.lam:g}.csv"
        write_csv(out / fname, ENVELOPE_HEADER + ("closed_form",),
                  (row + (float(c),) for row, c in zip(envelope_rows(res), exact)))
        files.append(fname)
        summary[f"{known.lam:g}"] = {"max_error": float(np.abs(res.env - exact).max())}

    src = next(c for c in entry.known_certificates if c.kind == "LSEB")
    for lam in (0.25, 0.5):
        res = envelope.envelope_grid(grid, lam)
        stationary = envelope.envelope_stationary(grid, lam, grid.index_of(0.0), result=res)
        d = calculus.apply_rule(
            "env-lseb", src, lam=lam,
            verified=("0 in the subdifferential of the envelope at the point",) if stationary else (),
            asserted=("lambda below the prox-boundedness threshold",))
        rep = validate(res.as_grid(), d.cert, count=200, seed=0)
        summary.setdefault(f"{lam:g}", {})["derived_lseb"] = {
            "transfer": d.to_json(), "validation": rep.to_json()}
    write_json(out / f"{name}_envelopes.json", summary)
    files.append(f"{name}_envelopes.json")


def _neg_quadratic(out: Path, files: list):
    f = catalog.get("neg_quadratic").spec
    reps = [envelope.prox_bounded_probe(f, lam) for lam in (0.4, 0.6)]
    write_json(out / "neg_quadratic_prox.json", [r.to_json() for r in reps])
    files.append("neg_quadratic_prox.json")


def _two_well(out: Path, files: list):
    f = catalog.get("two_well").spec
    res = {mode: check_condition_iii(f, 1.0, -1.0, 0.5, mode=mode).to_json()
           for mode in ("direct", "sufficient")}
    write_json(out / "two_well_condition_iii.json", res)
    files.append("two_well_condition_iii.json")


def _transfers(out: Path, files: list):
    c = calculus
    rows = [
        ("kl2lseb", (0.5, 1.0), c.kl_to_lseb(0.5, 1.0)),
        ("kl2lseb", (2 / 3, 1.0), c.kl_to_lseb(2 / 3, 1.0)),
        ("lseb2lheb", (1.0, 0.5), c.lseb_to_lheb(1.0, 0.5)),
        ("lseb2lheb", (2.0, 1.0), c.lseb_to_lheb(2.0, 1.0)),
        ("lheb2lseb", (2.0, 1.0, 1.0), c.lheb_to_lseb_proxreg(2.0, 1.0, 1.0)),
        ("lheb2lseb", (1.5, 3.0, 0.0), c.lheb_to_lseb_proxreg(1.5, 3.0, 0.0)),
        ("lseb2kl", (1.0, 2.0, 2.0), c.lseb_to_kl_proxreg(1.0, 2.0, 2.0)),
        ("lseb2kl", (0.5, 1.0, 0.0), c.lseb_to_kl_proxreg(0.5, 1.0, 0.0)),
        ("env-lseb", (1.0, 0.5, 0.5), c.lseb_envelope_transfer(1.0, 0.5, 0.5)),
        ("env-lseb", (2.0, 2.0, 0.5), c.lseb_envelope_transfer(2.0, 2.0, 0.5)),
        ("env-lheb", (2.0, 1.0, 0.5), c.lheb_envelope_transfer(2.0, 1.0, 0.5)),
        ("env-lheb", (3.0, 4.0, 1.0), c.lheb_envelope_transfer(3.0, 4.0, 1.0)),
    ]
    write_csv(out / "transfer_instances.csv", ("rule", "inputs", "gamma", "mu", "open_bound"),
              ((r, " ".join(repr(float(v)) for v in args), t.gamma, t.mu, t.open_bound)
               for r, args, t in rows))
    files.append("transfer_instances.csv")


SECTIONS = {
    "staircase": _staircase,
    "oscillatory": _oscillatory,
    "quadratic": lambda out, files: _closed_form("quadratic", out, files),
    "absval": lambda out, files: _closed_form("absval", out, files),
    "neg_quadratic": _neg_quadratic,
    "two_well": _two_well,
}


def report_bundle(names: Sequence[str], out_dir, config=None) -> list[str]:
    """Write every table for ``names`` (plus the transfer instances) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    for name in names:
        if name not in SECTIONS:
            catalog.get(name)  # raises UnknownEntry for unknown names
            continue
        SECTIONS[name](out, files)
    _transfers(out, files)
    write_json(out / "manifest.json", {"version": __version__, "config": config or {},
                                       "names": list(names), "files": files})
    return files + ["manifest.json"]
