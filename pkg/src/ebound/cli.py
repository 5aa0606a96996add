"""``eb`` command-line front end.

Exit status: 0 on success, 2 when a certificate was checked and violated, 1 on
usage or input errors (the module-qualified error code goes to stderr).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field

from . import __version__, calculus, catalog, envelope, varanalysis
from .certify import Certificate, estimate, kl_failure_scan, stationary_scan, validate
from .errors import EBError
from .fnmodel import GridSpec, SamplePlan, evaluate
from .io import dumps, load_certificate, load_function, write_csv, write_json
from .report import ENVELOPE_HEADER, envelope_rows, kl_sequence, report_bundle


EXIT_OK, EXIT_INPUT, EXIT_VIOLATED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)

    def to_json(self):
        return {"command": self.command, **self.options}


def _positive(text):
    v = _real(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonneg(text):
    v = _real(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text!r}")
    return v


def _real(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _gap(text):
    if text.strip().lower() in ("inf", "unbounded"):
        return math.inf
    return _positive(text)


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _reals(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _emit(payload, out=None):
    if out:
        write_json(out, payload)
    else:
        sys.stdout.write(dumps(payload))


def _wrap(cfg: RunConfig, result):
    return {"tool": "eb", "version": __version__, "config": cfg.to_json(), "result": result}


# -- commands -----------------------------------------------------------------


def cmd_envelope(args, cfg):
    f = load_function(args.input)
    if not isinstance(f, GridSpec):
        if args.lo is None or args.hi is None:
            raise UsageError("analytic input needs --lo and --hi to build a grid")
        from .fnmodel import discretize
        f = discretize(f, args.lo, args.hi, args.h)
    res = envelope.envelope_grid(f, args.lam, args.tol_prox)
    write_csv(args.out, ENVELOPE_HEADER, envelope_rows(res))
    _emit(_wrap(cfg, {"nodes": len(f), "csv": args.out,
                      "min_env": float(res.env.min()),
                      "max_prox_count": max(len(s) for s in res.prox_sets)}))
    return EXIT_OK


def cmd_prox(args, cfg):
    f = load_function(args.input)
    rep = envelope.prox_bounded_probe(f, args.lam, args.radius, threshold=not args.no_threshold)
    _emit(_wrap(cfg, rep.to_json()), args.out)
    return EXIT_OK


def cmd_analyze(args, cfg):
    f = load_function(args.input)
    what = args.what
    if what == "subgrad":
        r = varanalysis.subgrad_distance(f, args.at)
        result = {"x": r.x, "value": r.value, "method": r.method, "spacing": r.spacing}
    elif what == "levdist":
        level = args.level if args.level is not None else evaluate(f, args.at)
        r = varanalysis.levelset_distance(f, level, args.at, args.window, args.anchors)
        result = {"x": r.x, "level": r.level, "value": r.value, "witness": r.witness}
    elif what == "proxreg":
        if args.eps is None:
            raise UsageError("--what proxreg needs --eps")
        r = varanalysis.prox_regularity_modulus(f, args.at, args.eps, args.samples, args.seed)
        result = {"center": r.center, "epsilon": r.epsilon, "rho_hat": r.rho_hat,
                  "sample_pairs": r.sample_pairs,
                  "worst_pair": None if r.worst_pair is None else list(r.worst_pair)}
    else:
        if args.lam is None or args.eps is None:
            raise UsageError("--what cond3 needs --lambda and --eps")
        result = varanalysis.check_condition_iii(f, args.lam, args.at, args.eps,
                                                 args.samples, args.mode, seed=args.seed).to_json()
    _emit(_wrap(cfg, result), args.out)
    return EXIT_OK


def cmd_estimate(args, cfg):
    f = load_function(args.input)
    plan = SamplePlan(args.at, args.eta, args.nu, args.samples, seed=args.seed)
    fit, cert = estimate(f, args.kind.upper(), args.at, plan)
    if args.cert_out:
        write_json(args.cert_out, cert.to_json())
    _emit(_wrap(cfg, {"fit": fit.to_json(), "suggested": cert.to_json(),
                      "tight_mu": cert.mu / 1.05}), args.out)
    return EXIT_OK


def cmd_validate(args, cfg):
    cert = load_certificate(args.cert)
    f = load_function(args.input)
    plan = None
    if args.eta is not None:
        nu = args.nu if args.nu is not None else (cert.nu if cert.nu is not None else math.inf)
        plan = SamplePlan(cert.points[0], args.eta, nu, args.samples, seed=args.seed)
    rep = validate(f, cert, plan, count=args.samples, seed=args.seed)
    out = rep.to_json()
    if args.rows:
        out["rows"] = [{"x": x, "lhs": l, "rhs": r} for x, l, r in rep.rows]
    _emit(_wrap(cfg, out), args.out)
    return EXIT_OK if rep.passed else EXIT_VIOLATED


_KIND = {"kl": "uKL", "lseb": "uLSEB", "lheb": "uHEB"}


def cmd_transfer(args, cfg):
    if args.gamma is None or args.mu is None:
        raise UsageError("--gamma and --mu are required")
    at = args.at
    if args.rule == "chain":
        start = Certificate(_KIND[args.kind], args.gamma, args.mu, (at,), eta=args.eta)
        chain = calculus.equivalence_chain(start, args.rho, args.delta)
        result = {"start": start.to_json(), "derived": [d.to_json() for d in chain]}
    else:
        kind = calculus.RULES[args.rule].input_kind
        if args.rule.startswith("env-") and args.lam is None:
            raise UsageError(f"rule {args.rule} needs --lambda")
        cert = Certificate(kind, args.gamma, args.mu, at, eta=args.eta,
                           nu=None if kind == "LHEB" else math.inf)
        result = calculus.apply_rule(args.rule, cert, lam=args.lam, rho=args.rho,
                                     delta=args.delta, asserted=tuple(args.assume)).to_json()
    _emit(_wrap(cfg, result), args.out)
    return EXIT_OK


def cmd_scan_kl(args, cfg):
    f = load_function(args.input)
    if args.points is not None:
        pts = args.points
    else:
        lo, _, hi = args.jump_sequence.partition(":")
        try:
            pts = kl_sequence(int(lo), int(hi), args.shift)[1].tolist()
        except ValueError:
            raise UsageError("--jump-sequence takes N0:N1 with integers N0 >= 3") from None
    if isinstance(f, GridSpec) and args.snap:
        idx = sorted({f.nearest_index(x) for x in pts}, key=lambda i: -i)
        pts = [f.node(i) for i in idx if 0 < i < len(f) - 1]
    scan = kl_failure_scan(f, args.at, args.alphas, pts)
    if args.csv:
        header = ("x", "f_gap", "subgrad_dist") + tuple(f"q_{a:g}" for a in scan.alphas)
        write_csv(args.csv, header, ((x, g, d, *qs) for x, g, d, qs in scan.rows))
    result = {"alphas": list(scan.alphas),
              "vanishing": {f"{a:g}": v for a, v in scan.vanishing.items()},
              "decay_exponent": {f"{a:g}": s for a, s in scan.decay.items()},
              "rows": [{"x": x, "f_gap": g, "subgrad_dist": d, "quotients": list(q)}
                       for x, g, d, q in scan.rows]}
    _emit(_wrap(cfg, result), args.out)
    return EXIT_OK


def cmd_scan_stationary(args, cfg):
    f = load_function(args.input)
    brackets = stationary_scan(f, (args.start, args.stop), args.step)
    _emit(_wrap(cfg, {"count": len(brackets),
                      "brackets": [{"lo": b.lo, "hi": b.hi, "root": b.root} for b in brackets]}),
          args.out)
    return EXIT_OK


def cmd_uniformize(args, cfg):
    certs = [load_certificate(p) for p in args.certs]
    f = load_function(args.input) if args.input else None
    cert = calculus.uniformize(certs, args.omega, args.radii, f)
    _emit(_wrap(cfg, cert.to_json()), args.out)
    return EXIT_OK


def _entry_json(name):
    e = catalog.get(name)
    return {"name": name, "params": dict(e.spec.params), "notes": e.notes, "tags": list(e.tags),
            "breakpoints": list(e.spec.breakpoints),
            "known_certificates": [c.to_json() for c in e.known_certificates],
            "known_envelopes": [{"lambda": k.lam, "provenance": k.provenance}
                                for k in e.known_envelopes]}


def cmd_catalog(args, cfg):
    if args.action == "list":
        result = [{"name": n, "notes": catalog.get(n).notes} for n in catalog.names()]
    else:
        if not args.name:
            raise UsageError("catalog show needs a NAME")
        result = _entry_json(args.name)
    _emit(_wrap(cfg, result), args.out)
    return EXIT_OK


def cmd_audit(args, cfg):
    rep = catalog.audit_disputed_formula(args.name, args.lam, args.lo, args.hi, args.h,
                                      tuple(args.probe))
    _emit(_wrap(cfg, rep.to_json()), args.out)
    return EXIT_OK


def cmd_report(args, cfg):
    names = args.names or list(catalog.names())
    files = report_bundle(names, args.out, cfg.to_json())
    _emit(_wrap(cfg, {"out": args.out, "files": files}))
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eb", description="Moreau envelopes and error-bound certificates.")
    p.add_argument("--version", action="version", version=f"eb {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    def inp(sp, required=True):
        sp.add_argument("--input", required=required, help="function JSON (grid or catalog name)")

    def out(sp):
        sp.add_argument("--out", help="write the JSON report here instead of stdout")

    sp = add("envelope", cmd_envelope, "Moreau envelope and proximal sets on a grid")
    inp(sp)
    sp.add_argument("--lambda", dest="lam", type=_positive, required=True)
    sp.add_argument("--out", required=True, help="CSV output path")
    sp.add_argument("--tol-prox", type=_nonneg, default=envelope.DEFAULT_TOL_PROX)
    sp.add_argument("--lo", type=_real, help="grid start for analytic input")
    sp.add_argument("--hi", type=_real, help="grid end for analytic input")
    sp.add_argument("--h", type=_positive, default=1e-3, help="grid spacing for analytic input")

    sp = add("prox", cmd_prox, "prox-boundedness probe")
    inp(sp)
    sp.add_argument("--lambda", dest="lam", type=_positive, required=True)
    sp.add_argument("--radius", type=_positive, default=1e8)
    sp.add_argument("--no-threshold", action="store_true")
    out(sp)

    sp = add("analyze", cmd_analyze, "variational quantities at a point")
    inp(sp)
    sp.add_argument("--at", type=_real, required=True)
    sp.add_argument("--what", choices=("subgrad", "levdist", "proxreg", "cond3"), required=True)
    sp.add_argument("--lambda", dest="lam", type=_positive)
    sp.add_argument("--eps", type=_positive)
    sp.add_argument("--level", type=_real, help="level c (default f(at))")
    sp.add_argument("--window", type=_positive, default=1.0)
    sp.add_argument("--anchors", type=_reals, default=[],
                    help="points known to lie in the level set (e.g. isolated minimizers)")
    sp.add_argument("--mode", choices=("direct", "sufficient"), default="direct")
    sp.add_argument("--samples", type=_count, default=200)
    sp.add_argument("--seed", type=int, default=0)
    out(sp)

    sp = add("estimate", cmd_estimate, "fit an exponent and suggest a certificate")
    inp(sp)
    sp.add_argument("--kind", choices=("kl", "lseb", "lheb"), required=True)
    sp.add_argument("--at", type=_real, required=True)
    sp.add_argument("--eta", type=_positive, required=True)
    sp.add_argument("--nu", type=_gap, default=math.inf)
    sp.add_argument("--samples", type=_count, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cert-out", help="also write the suggested certificate JSON")
    out(sp)

    sp = add("validate", cmd_validate, "check a certificate on samples")
    sp.add_argument("--cert", required=True)
    inp(sp)
    sp.add_argument("--eta", type=_positive, help="sampling radius (default: the certificate's)")
    sp.add_argument("--nu", type=_gap)
    sp.add_argument("--samples", type=_count, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rows", action="store_true", help="include every sample row")
    out(sp)

    sp = add("transfer", cmd_transfer, "apply a certificate transfer rule")
    sp.add_argument("--rule", required=True, choices=tuple(calculus.RULES) + ("chain",))
    sp.add_argument("--gamma", type=_real)
    sp.add_argument("--mu", type=_real)
    sp.add_argument("--rho", type=_nonneg)
    sp.add_argument("--lambda", dest="lam", type=_positive)
    sp.add_argument("--delta", type=_positive, default=calculus.DEFAULT_DELTA)
    sp.add_argument("--kind", choices=tuple(_KIND), default="kl", help="start kind for chain")
    sp.add_argument("--at", type=_real, default=0.0)
    sp.add_argument("--eta", type=_positive)
    sp.add_argument("--assume", action="append", default=[], metavar="HYPOTHESIS",
                    help="record a side condition as asserted (repeatable)")
    out(sp)

    sp = add("scan-kl", cmd_scan_kl, "KL quotient table along a point sequence")
    inp(sp)
    sp.add_argument("--at", type=_real, default=0.0)
    sp.add_argument("--alphas", type=_reals, default=[0.0, 0.25, 0.5, 0.75])
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--points", type=_reals)
    g.add_argument("--jump-sequence", metavar="N0:N1",
                   help="points 1/(n-1) - shift for n = N0..N1")
    sp.add_argument("--shift", type=_nonneg, default=1e-9)
    sp.add_argument("--snap", action="store_true", help="snap points to grid nodes")
    sp.add_argument("--csv", help="also write the table as CSV")
    out(sp)

    sp = add("scan-stationary", cmd_scan_stationary, "sign changes of the derivative")
    inp(sp)
    sp.add_argument("--from", dest="start", type=_real, required=True)
    sp.add_argument("--to", dest="stop", type=_real, required=True)
    sp.add_argument("--step", type=_positive, default=1e-4)
    out(sp)

    sp = add("uniformize", cmd_uniformize, "combine pointwise certificates over a node set")
    sp.add_argument("--certs", nargs="+", required=True)
    sp.add_argument("--omega", type=_reals, required=True)
    sp.add_argument("--radii", type=_reals, help="cover radius per certificate (default: eta)")
    inp(sp, required=False)
    out(sp)

    sp = add("catalog", cmd_catalog, "list or show built-in functions")
    sp.add_argument("action", choices=("list", "show"))
    sp.add_argument("name", nargs="?")
    out(sp)

    sp = add("audit", cmd_audit, "compare a disputed closed-form envelope with brute force")
    sp.add_argument("--name", required=True)
    sp.add_argument("--lambda", dest="lam", type=_positive, default=0.5)
    sp.add_argument("--lo", type=_real, default=-1.0)
    sp.add_argument("--hi", type=_real, default=1.0)
    sp.add_argument("--h", type=_positive, default=1e-4)
    sp.add_argument("--probe", type=_reals, default=[0.4])
    out(sp)

    sp = add("report", cmd_report, "regenerate every worked-example table")
    sp.add_argument("--names", nargs="*", help="catalog names (default: all)")
    sp.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    opts = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    cfg = RunConfig(args.command, opts)
    try:
        return args.func(args, cfg)
    except EBError as exc:
        print(f"eb: error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"eb: usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError, OverflowError) as exc:
        print(f"eb: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
