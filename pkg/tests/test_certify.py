import math
from dataclasses import replace

import numpy as np
import pytest

from ebound import catalog
from ebound.certify import (Certificate, estimate, kl_failure_scan, stationary_scan,
                            validate)
from ebound.errors import (DegenerateFit, EmptyRegion, ExponentOutOfRange,
                           InvalidCertificate, NonConstantOnSet, PlanMismatch)
from ebound.fnmodel import AnalyticSpec, SamplePlan, discretize


def test_kl_quadratic_exact_case(quadratic):
    rep = validate(quadratic, Certificate("KL", 0.5, 0.5, 0.0, eta=1.0, nu=1.0))
    assert rep.passed
    assert rep.tight_mu == pytest.approx(0.5, rel=1e-12)
    assert rep.cert.fbar == 0.0


def test_staircase_lseb(staircase):
    rep = validate(staircase, Certificate("LSEB", 1.0, 0.501, 0.0, eta=0.2))
    assert rep.passed and rep.samples == 200


def test_oscillatory_lheb(oscillatory):
    rep = validate(oscillatory, Certificate("LHEB", 2.0, 1.0, 0.0, eta=0.3), count=300)
    assert rep.passed


def test_violation_is_reported(quadratic):
    rep = validate(quadratic, Certificate("KL", 0.5, 0.4, 0.0, eta=1.0, nu=1.0), count=50)
    assert not rep.passed
    assert rep.worst_violation > 0
    x, lhs, rhs = rep.failures[0]
    assert lhs - 0.4 * rhs > 0


@pytest.mark.parametrize("kind,gamma", [("KL", 1.0), ("KL", -0.1), ("uKL", 1.2),
                                        ("LHEB", 0.0), ("LSEB", -1.0)])
def test_exponent_range_guard(kind, gamma):
    with pytest.raises(ExponentOutOfRange):
        Certificate(kind, gamma, 1.0, (0.0,) if kind.startswith("u") else 0.0)


def test_certificate_invariants():
    with pytest.raises(InvalidCertificate):
        Certificate("XYZ", 0.5, 1.0)
    with pytest.raises(InvalidCertificate):
        Certificate("KL", 0.5, 0.0)
    with pytest.raises(InvalidCertificate):
        Certificate("uKL", 0.5, 1.0, ())
    with pytest.raises(InvalidCertificate):
        Certificate("KL", 0.5, 1.0, (0.0, 1.0))
    assert Certificate("LHEB", 2.0, 1.0, nu=3.0).nu is None
    assert Certificate("uLSEB", 1.0, 1.0, 0.5).locality == (0.5,)


@pytest.mark.parametrize("cert", [
    Certificate("KL", 0.5, 1.0, 0.0, eta=1.0, nu=0.5, fbar=0.0),
    Certificate("LHEB", 2.0, 1.0, 0.3, eta=0.1),
    Certificate("uLSEB", 1.0, 2.0, (0.0, 0.5), eta=0.2, nu=math.inf, rho=1.0),
])
def test_certificate_json_round_trip(cert):
    assert Certificate.from_json(cert.to_json()) == cert


def test_uniform_requires_constant_value(quadratic):
    cert = Certificate("uLSEB", 1.0, 1.0, (0.0, 0.5), eta=0.1)
    with pytest.raises(NonConstantOnSet):
        validate(quadratic, cert)


def test_uniform_validation_samples_each_node(absval):
    f = AnalyticSpec("plateau", lambda x: np.maximum(np.abs(np.asarray(x, float)) - 1, 0),
                     deriv=lambda x: (np.sign(x) * (np.abs(x) > 1),) * 2, breakpoints=(-1.0, 1.0))
    cert = Certificate("uHEB", 1.0, 1.0, (-1.0, 1.0), eta=0.5)
    rep = validate(f, cert, count=40)
    xs = [r[0] for r in rep.rows]
    assert any(x < -1 for x in xs) and any(x > 1 for x in xs)
    assert rep.passed


def test_plan_mismatch(quadratic):
    cert = Certificate("KL", 0.5, 0.5, 0.0, eta=0.5, nu=0.1)
    with pytest.raises(PlanMismatch):
        validate(quadratic, cert, SamplePlan(0.0, 1.0, 0.1))
    with pytest.raises(PlanMismatch):
        validate(quadratic, cert, SamplePlan(0.0, 0.5, 0.2))
    with pytest.raises(PlanMismatch):
        validate(quadratic, replace(cert, eta=None))


def test_empty_region_propagates(quadratic):
    f = catalog.get("neg_quadratic").spec
    with pytest.raises(EmptyRegion):
        validate(f, Certificate("LHEB", 2.0, 1.0, 0.0, eta=0.5))


def test_mu_monotonicity(staircase):
    rep = validate(staircase, Certificate("LSEB", 1.0, 0.3, 0.0, eta=0.2), count=80)
    assert not rep.passed
    passed = [all(lhs - mu * rhs <= 1e-9 * (1 + abs(lhs)) for _, lhs, rhs in rep.rows)
              for mu in (0.3, 0.5, 0.6, 1.0)]
    assert passed == sorted(passed)
    assert passed[-1]
    assert rep.tight_mu == pytest.approx(0.5, abs=0.01)


def test_shrinking_eta_keeps_pass(oscillatory):
    cert = Certificate("LHEB", 2.0, 1.0, 0.0, eta=0.3)
    for eta in (0.3, 0.1, 0.01):
        assert validate(oscillatory, cert, SamplePlan(0.0, eta, count=80)).passed


def test_estimate_kl_quadratic(quadratic):
    fit, cert = estimate(quadratic, "KL", 0.0, SamplePlan(0.0, 1.0, 1.0, count=100))
    assert 0.48 <= fit.gamma_hat <= 0.52
    assert cert.gamma == 0.5
    assert cert.mu / 1.05 == pytest.approx(0.5, rel=1e-9)


def test_estimate_lseb_staircase(staircase):
    fit, cert = estimate(staircase, "LSEB", 0.0, SamplePlan(0.0, 0.2, count=100))
    assert 0.9 <= fit.gamma_hat <= 1.1
    assert cert.mu / 1.05 == pytest.approx(0.5, abs=0.05)


def test_estimate_lheb_oscillatory(oscillatory):
    fit, cert = estimate(oscillatory, "LHEB", 0.0, SamplePlan(0.0, 0.3, count=150))
    assert 1.9 <= fit.gamma_hat <= 2.1
    assert 1 / 3 <= cert.mu / 1.05 <= 1.0


def test_estimate_degenerate():
    f = AnalyticSpec("sign", lambda x: (np.asarray(x, float) > 0).astype(float),
                     deriv=lambda x: (np.zeros_like(np.asarray(x, float)),) * 2,
                     breakpoints=(0.0,))
    with pytest.raises(DegenerateFit):
        estimate(f, "KL", 0.0, SamplePlan(0.0, 1.0, count=40))


@pytest.mark.parametrize("name", ["staircase", "oscillatory", "quadratic", "absval"])
def test_estimate_then_validate(name):
    entry = catalog.get(name)
    known = entry.known_certificates[-1]
    eta = known.eta
    nu = known.nu if known.nu is not None else math.inf
    _, cert = estimate(entry.spec, known.kind, 0.0, SamplePlan(0.0, eta, nu))
    assert validate(entry.spec, cert, count=100, seed=5).passed


def test_kl_scan_staircase(staircase):
    ns = np.arange(10, 201)
    scan = kl_failure_scan(staircase, 0.0, [0.5], 1 / (ns - 1) - 1e-9)
    bound = 2 * ns ** 0.5 / (ns - 1)
    assert np.all(scan.quotients(0.5) <= bound * (1 + 1e-6))
    assert scan.vanishing[0.5]


def test_kl_scan_quadratic_constant(quadratic):
    pts = 2.0 ** -np.arange(1, 20)
    scan = kl_failure_scan(quadratic, 0.0, [0.5], pts)
    assert np.allclose(scan.quotients(0.5), 2.0, rtol=1e-12)
    assert not scan.vanishing[0.5]


def test_kl_scan_on_staircase_envelope(staircase):
    from ebound.envelope import envelope_grid
    g = envelope_grid(discretize(staircase, -1, 1, 1e-4), 0.5).as_grid()
    ns = np.arange(10, 201)
    pts = sorted({g.node(g.nearest_index(x)) for x in 1 / (ns - 1) - 1e-9}, reverse=True)
    scan = kl_failure_scan(g, 0.0, [0.0, 0.25, 0.5], pts)
    assert len(scan.rows) == len(pts)
    assert set(scan.vanishing) == {0.0, 0.25, 0.5}


def test_kl_scan_rejects_points_at_level(quadratic):
    with pytest.raises(ValueError):
        kl_failure_scan(quadratic, 0.0, [0.5], [0.0])
    with pytest.raises(ExponentOutOfRange):
        kl_failure_scan(quadratic, 0.0, [1.0], [0.5])


def test_stationary_scan_oscillatory(oscillatory):
    brackets = stationary_scan(oscillatory, (0.001, 0.1), 1e-6)
    assert len(brackets) >= 10
    for b in brackets[:20]:
        assert b.hi - b.lo < 1e-12


def test_stationary_scan_quadratic(quadratic):
    brackets = stationary_scan(quadratic, (-1.0, 1.0), 1e-4)
    assert len(brackets) == 1
    assert brackets[0].root == pytest.approx(0.0, abs=1e-12)


def test_stationary_scan_cubic():
    f = AnalyticSpec("cube", lambda x: np.asarray(x, float) ** 3,
                     deriv=lambda x: (3 * np.asarray(x, float) ** 2,) * 2)
    assert stationary_scan(f, (0.1, 1.0), 1e-4) == []


def test_stationary_scan_grid(quadratic):
    g = discretize(quadratic, -1, 1, 1e-2)
    brackets = stationary_scan(g, (-1.0, 1.0), 1e-2)
    assert [b.root for b in brackets] == [pytest.approx(0.0, abs=1e-12)]


def test_threads_do_not_change_results(staircase, monkeypatch):
    cert = Certificate("LSEB", 1.0, 0.501, 0.0, eta=0.2)
    serial = validate(staircase, cert, count=40)
    monkeypatch.setenv("EB_THREADS", "4")
    threaded = validate(staircase, cert, count=40)
    assert serial.rows == threaded.rows
