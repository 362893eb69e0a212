import json
import math

import pytest

from hawkes_limits import cli
from hawkes_limits.calibrate import fit_exp
from hawkes_limits.core import ExponentialKernel, Linear
from hawkes_limits.simulate import SimConfig, simulate

SIM = {"rate": {"family": "Linear", "nu": 1.0}, "kernel": {"family": "Exponential", "a": 1.0, "b": 2.0},
       "horizon": 200.0, "seed": 3}


def _cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_simulate_is_deterministic(tmp_path):
    c = _cfg(tmp_path, SIM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.run(["simulate", "--config", c, "--out", str(a), "--seed", "7"]) == 0
    assert cli.run(["simulate", "--config", c, "--out", str(b), "--seed", "7"]) == 0
    assert a.read_text() == b.read_text()
    assert a.read_text().startswith("time\n")
    cli.run(["simulate", "--config", c, "--out", str(b), "--seed", "8"])
    assert a.read_text() != b.read_text()


def test_missing_config_exit_two(tmp_path, capsys):
    assert cli.run(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
    assert capsys.readouterr().err.startswith("config: ")
    assert cli.run(["simulate"]) == 2


def test_unknown_keys_are_errors(tmp_path, capsys):
    doc = dict(SIM, horizn=5.0)
    assert cli.run(["simulate", "--config", _cfg(tmp_path, doc)]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("config: ") and "horizn" in err
    assert err.count("config: ") == 1
    doc = dict(SIM, kernel={"family": "Exponential", "a": 1.0, "b": 2.0, "c": 1.0})
    assert cli.run(["simulate", "--config", _cfg(tmp_path, doc)]) == 2


def test_unknown_subcommand_and_bad_flag():
    assert cli.run(["frobnicate"]) == 2
    assert cli.run(["ldp", "gamma", "--bogus"]) == 2


def test_domain_error_exit_one(tmp_path, capsys):
    doc = dict(SIM, method="cluster", kernel={"family": "Exponential", "a": 3.0, "b": 1.0})
    assert cli.run(["simulate", "--config", _cfg(tmp_path, doc)]) == 1
    line = capsys.readouterr().err.strip()
    assert len(line.splitlines()) == 1
    code, _, msg = line.partition(": ")
    assert code and msg


def test_ldp_gamma_csv(capsys):
    assert cli.run(["ldp", "gamma", "--mark-exp", "4", "--nu", "1", "--theta-max", "0.22"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "theta,gamma"
    last_theta, last_gamma = map(float, lines[-1].split(","))
    assert last_theta == pytest.approx(0.22)
    assert last_theta < math.log(25 / 16)
    assert math.isfinite(last_gamma)
    assert not any(row.endswith(",inf") for row in lines[1:])


def test_ldp_gamma_flags_infinite_rows(capsys):
    assert cli.run(["ldp", "gamma", "--mark-exp", "4", "--theta-max", "0.6", "--n", "13"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    for row in rows:
        th, g = row.split(",")
        assert (g == "inf") == (float(th) > math.log(25 / 16))


def test_ldp_rate_and_mgf(tmp_path, capsys):
    assert cli.run(["ldp", "rate", "--mark-det", "0.5", "--x-max", "4", "--n", "5"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "x,rate"
    assert float(rows[1].split(",")[1]) == pytest.approx(1.0)
    doc = {"nu": 1.0, "kernel": {"family": "Exponential", "a": 1.0, "b": 2.0}, "theta": 0.0, "t": 10.0}
    out = tmp_path / "m.json"
    assert cli.run(["ldp", "mgf", "--config", _cfg(tmp_path, doc), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["log_mgf"] == 0.0


def test_json_reports_carry_schema_and_config(tmp_path):
    doc = {"rate": {"family": "Linear", "nu": 1.0}, "kernel": {"family": "Exponential", "a": 3.0, "b": 1.0}}
    out = tmp_path / "a.json"
    assert cli.run(["analyze", "--config", _cfg(tmp_path, doc), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["schema_version"] == 1
    assert rep["config"] == doc
    assert rep["regime"]["regime"] == "SuperCritical"
    assert rep["functionals"]["malthusian"] == 2.0
    text = out.read_text()
    keys = [k for k in rep]
    assert keys == sorted(keys)
    assert '"l1_norm": 3' in text


def test_analyze_spectrum_and_covariance(tmp_path):
    doc = {"rate": {"family": "Linear", "nu": 1.0}, "kernel": {"family": "Exponential", "a": 1.0, "b": 2.0},
           "n_omega": 3, "n_tau": 3}
    spec, cov = tmp_path / "s.csv", tmp_path / "c.csv"
    assert cli.run(["analyze", "--config", _cfg(tmp_path, doc), "--out", str(tmp_path / "o.json"),
                    "--spectrum", str(spec), "--covariance", str(cov)]) == 0
    s_rows = spec.read_text().splitlines()
    assert s_rows[0] == "omega,density"
    assert float(s_rows[1].split(",")[1]) == pytest.approx(1 / (2 * math.pi * 0.5 * 0.25))
    c_rows = cov.read_text().splitlines()
    assert float(c_rows[1].split(",")[1]) == pytest.approx(3.0)


def test_risk_outputs(tmp_path):
    doc = {"rho": 1.375, "nu": 1.0, "h_law": {"family": "Exponential", "rate": 4.0},
           "claim_law": {"family": "Exponential", "rate": 2.0}, "u": 10.0, "z": 100.0}
    out = tmp_path / "r.json"
    assert cli.run(["risk", "--config", _cfg(tmp_path, doc), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["theta_dagger"] == pytest.approx(0.6335254961926, abs=1e-10)
    assert rep["w_z"] == rep["theta_dagger"]
    heavy = {"rho": 1.0, "nu": 1.0, "h_law": {"family": "Exponential", "rate": 4.0},
             "claim_law": {"family": "RegularlyVarying", "alpha": 3.0, "scale": 1.5}, "tail": "claim_law"}
    assert cli.run(["risk", "--config", _cfg(tmp_path, heavy), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["heavy_tail"]["infinite_constant"] == pytest.approx(2.0)
    bad = dict(doc, rho=0.5)
    assert cli.run(["risk", "--config", _cfg(tmp_path, bad)]) == 1


def test_mc_lln(tmp_path):
    doc = {"experiment": "lln", "sim": SIM, "replicas": 20}
    out, csv = tmp_path / "m.json", tmp_path / "m.csv"
    assert cli.run(["mc", "--config", _cfg(tmp_path, doc), "--out", str(out), "--csv", str(csv)]) == 0
    rep = json.loads(out.read_text())
    assert rep["experiment"] == "lln" and rep["schema_version"] == 1
    assert rep["comparisons"][0]["theory"] == 2.0
    assert len(csv.read_text().splitlines()) == 21
    assert cli.run(["mc", "--config", _cfg(tmp_path, {"experiment": "nope"})]) == 2


def test_simulate_replica_summary(tmp_path):
    out = tmp_path / "s.json"
    assert cli.run(["simulate", "--config", _cfg(tmp_path, SIM), "--replicas", "10", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["summary"]["n_replicas"] == 10


def test_round_trip_simulate_calibrate(tmp_path):
    doc = dict(SIM, horizon=3000.0, seed=11)
    ev, fit_out = tmp_path / "ev.csv", tmp_path / "fit.json"
    assert cli.run(["simulate", "--config", _cfg(tmp_path, doc), "--out", str(ev)]) == 0
    assert cli.run(["calibrate", "--events", str(ev), "--horizon", "3000", "--out", str(fit_out)]) == 0
    disk = json.loads(fit_out.read_text())
    mem = fit_exp(simulate(SimConfig(Linear(1.0), ExponentialKernel(1.0, 2.0), horizon=3000.0, seed=11)))
    assert disk["n_events"] == mem.n_events
    assert disk["loglik"] == mem.loglik
    assert [disk["params"][k] for k in ("nu", "a", "b")] == list(mem.params)


def test_calibrate_errors(tmp_path):
    assert cli.run(["calibrate"]) == 2
    ev = tmp_path / "few.csv"
    ev.write_text("time\n0.1\n0.2\n0.3\n0.4\n0.5\n")
    assert cli.run(["calibrate", "--events", str(ev), "--horizon", "10"]) == 1
    ev.write_text("t\n0.1\n")
    assert cli.run(["calibrate", "--events", str(ev)]) == 2


def test_to_json_non_finite():
    text = cli.to_json({"b": math.inf, "a": math.nan, "c": 0.1})
    assert json.loads(text) == {"a": "nan", "b": "inf", "c": 0.1}
    assert text.index('"a"') < text.index('"b"')
