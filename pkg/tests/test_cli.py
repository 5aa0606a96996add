import csv
import json

import pytest

from ebound import __version__
from ebound.certify import Certificate
from ebound.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_transfer_env_lseb(capsys):
    code, out, _ = run(capsys, "transfer", "--rule", "env-lseb", "--gamma", "1", "--mu", "0.5",
                       "--lambda", "0.5")
    assert code == 0
    rep = json.loads(out)
    assert rep["version"] == __version__
    assert rep["config"]["rule"] == "env-lseb" and rep["config"]["lam"] == 0.5
    cert = rep["result"]["certificate"]
    assert (cert["gamma"], cert["mu"]) == (1.0, 1.0)


def test_transfer_chain(capsys):
    code, out, _ = run(capsys, "transfer", "--rule", "chain", "--kind", "lheb", "--gamma", "2",
                       "--mu", "1", "--rho", "1")
    assert code == 0
    derived = json.loads(out)["result"]["derived"]
    assert [(d["certificate"]["kind"], d["certificate"]["mu"]) for d in derived] == [
        ("uLSEB", 2.0), ("uKL", 2.0)]


def test_transfer_domain_error(capsys):
    code, _, err = run(capsys, "transfer", "--rule", "lheb2lseb", "--gamma", "3", "--mu", "1",
                       "--rho", "0")
    assert code == 1
    assert "calculus.ExponentOutOfRange" in err


def test_validate_bad_exponent(capsys, write_json):
    cert = write_json("bad.json", {"kind": "KL", "gamma": 1.2, "mu": 1.0, "eta": 1.0})
    fn = write_json("f.json", {"name": "quadratic"})
    code, _, err = run(capsys, "validate", "--cert", cert, "--input", fn)
    assert code == 1
    assert "ExponentOutOfRange" in err


def test_validate_pass_and_fail(capsys, write_json):
    fn = write_json("f.json", {"name": "quadratic"})
    good = write_json("good.json", Certificate("KL", 0.5, 0.5, 0.0, eta=1.0, nu=1.0).to_json())
    bad = write_json("bad.json", Certificate("KL", 0.5, 0.3, 0.0, eta=1.0, nu=1.0).to_json())
    code, out, _ = run(capsys, "validate", "--cert", good, "--input", fn, "--samples", "30")
    assert code == 0 and json.loads(out)["result"]["passed"]
    code, out, _ = run(capsys, "validate", "--cert", bad, "--input", fn, "--samples", "30")
    assert code == 2 and not json.loads(out)["result"]["passed"]


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "transfer", "--rule", "env-lseb", "--gamma", "1", "--mu", "1")[0] == 1
    assert run(capsys, "envelope", "--input", "x.json", "--lambda", "-1", "--out", "o")[0] == 1
    assert run(capsys, "nonsense")[0] == 1


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "prox", "--input", str(tmp_path / "nope.json"), "--lambda", "1")
    assert code == 1 and "nope.json" in err


def test_envelope_csv(capsys, tmp_path, write_json):
    fn = write_json("grid.json", {"x0": -1.0, "h": 0.5, "values": [1.0, 0.25, 0.0, "inf", 1.0]})
    out = tmp_path / "env.csv"
    code, _, _ = run(capsys, "envelope", "--input", fn, "--lambda", "0.5", "--out", str(out))
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x", "f", "env", "prox_count", "prox_min_x", "prox_max_x"]
    assert rows[4][1] == "inf"
    assert float(rows[4][2]) == 0.25
    assert rows[3][2] == "0.0"


def test_envelope_is_byte_identical(capsys, tmp_path, write_json):
    fn = write_json("f.json", {"name": "staircase"})
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        run(capsys, "envelope", "--input", fn, "--lambda", "0.5", "--lo", "-1", "--hi", "1",
            "--h", "0.001", "--out", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_audit(capsys):
    code, out, _ = run(capsys, "audit", "--name", "staircase", "--lambda", "0.5")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["max_discrepancy"] >= 0.14
    assert res["probes"][0]["bruteforce"] <= 0.160001


def test_audit_nothing(capsys):
    code, _, err = run(capsys, "audit", "--name", "quadratic")
    assert code == 1 and "catalog.NothingToAudit" in err


def test_catalog(capsys):
    code, out, _ = run(capsys, "catalog", "list")
    assert code == 0 and len(json.loads(out)["result"]) == 6
    code, out, _ = run(capsys, "catalog", "show", "staircase")
    entry = json.loads(out)["result"]
    assert entry["known_envelopes"] == [{"lambda": 0.5, "provenance": "disputed"}]
    code, _, err = run(capsys, "catalog", "show", "banana")
    assert code == 1 and "catalog.UnknownEntry" in err


def test_analyze(capsys, write_json):
    fn = write_json("f.json", {"name": "quadratic"})
    code, out, _ = run(capsys, "analyze", "--input", fn, "--at", "1", "--what", "subgrad")
    assert json.loads(out)["result"]["value"] == 2.0
    code, out, _ = run(capsys, "analyze", "--input", fn, "--at", "0.3", "--what", "levdist",
                       "--level", "0", "--anchors", "0")
    assert json.loads(out)["result"]["value"] == pytest.approx(0.3, abs=1e-12)
    code, out, _ = run(capsys, "analyze", "--input", fn, "--at", "0", "--what", "proxreg",
                       "--eps", "0.5")
    assert json.loads(out)["result"]["rho_hat"] == 0.0
    code, out, _ = run(capsys, "analyze", "--input", fn, "--at", "0", "--what", "cond3",
                       "--lambda", "0.5", "--eps", "0.3")
    assert json.loads(out)["result"]["holds"] is True
    assert run(capsys, "analyze", "--input", fn, "--at", "0", "--what", "cond3")[0] == 1


def test_estimate_writes_certificate(capsys, tmp_path, write_json):
    fn = write_json("f.json", {"name": "quadratic"})
    cert_path = tmp_path / "cert.json"
    code, out, _ = run(capsys, "estimate", "--kind", "kl", "--input", fn, "--at", "0",
                       "--eta", "1", "--nu", "1", "--samples", "50", "--cert-out", str(cert_path))
    assert code == 0
    suggested = json.loads(out)["result"]["suggested"]
    assert Certificate.from_json(json.loads(cert_path.read_text())) == \
        Certificate.from_json(suggested)
    code, _, _ = run(capsys, "validate", "--cert", str(cert_path), "--input", fn,
                     "--samples", "50", "--seed", "9")
    assert code == 0


def test_scan_kl(capsys, tmp_path, write_json):
    fn = write_json("f.json", {"name": "staircase"})
    table = tmp_path / "q.csv"
    code, out, _ = run(capsys, "scan-kl", "--input", fn, "--jump-sequence", "10:200",
                       "--csv", str(table))
    assert code == 0
    res = json.loads(out)["result"]
    assert all(res["vanishing"].values())
    assert len(table.read_text().splitlines()) == 192


def test_scan_stationary(capsys, write_json):
    fn = write_json("f.json", {"name": "oscillatory"})
    code, out, _ = run(capsys, "scan-stationary", "--input", fn, "--from", "0.001", "--to", "0.1",
                       "--step", "1e-6")
    assert code == 0 and json.loads(out)["result"]["count"] >= 10


def test_uniformize(capsys, write_json):
    a = write_json("a.json", Certificate("LSEB", 1.0, 1.0, 0.0, eta=0.4, nu=0.2).to_json())
    b = write_json("b.json", Certificate("LSEB", 2.0, 3.0, 0.25, eta=0.2, nu=0.1).to_json())
    code, out, _ = run(capsys, "uniformize", "--certs", a, b, "--omega", "0,0.1,0.25")
    res = json.loads(out)["result"]
    assert code == 0
    assert (res["gamma"], res["mu"], res["eta"], res["nu"]) == (2.0, 3.0, 0.1, 0.1)
    code, _, err = run(capsys, "uniformize", "--certs", a, "--omega", "0,0.5")
    assert code == 1 and "calculus.CoverIncomplete" in err


def test_prox(capsys, write_json):
    fn = write_json("f.json", {"name": "neg_quadratic"})
    code, out, _ = run(capsys, "prox", "--input", fn, "--lambda", "0.6")
    res = json.loads(out)["result"]
    assert code == 0 and not res["finite_everywhere"]
    assert res["threshold_estimate"] == pytest.approx(0.5, abs=0.01)


def test_report_bundle_is_reproducible(capsys, tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert run(capsys, "report", "--names", "quadratic", "absval", "neg_quadratic",
                   "--out", str(d))[0] == 0
    manifest = json.loads((dirs[0] / "manifest.json").read_text())
    assert "quadratic_envelope_lam0.5.csv" in manifest["files"]
    for name in manifest["files"]:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
    quad = json.loads((dirs[0] / "quadratic_envelopes.json").read_text())
    assert quad["0.5"]["max_error"] < 1e-5
    assert not any(p.suffix == ".png" for p in dirs[0].iterdir())
