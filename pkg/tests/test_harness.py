import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gstar.cli import main
from gstar.core import Ball
from gstar.harness import (ConfigError, ExperimentReport, ReportRow, build_instance, load_report,
                           parse_config, report_csv, report_json, run_experiment)
from gstar.harness.report import AggregateAudit, COLUMNS, emit_report
from gstar.harness.runner import audit_trace
from gstar.hindsight import solve_hindsight


def _cfg(**over):
    doc = {"instance": {"kind": "lp_regression", "params": {"sigma": 0.1, "p": 4}}, "T": 60, "seeds": [0, 1],
           "algorithm": [{"name": "ogd"}, {"name": "adagrad_norm"}, {"name": "adaftrl"}]}
    doc.update(over)
    return doc


# -- config -----------------------------------------------------------------


@pytest.mark.parametrize("bad, where", [
    ({"T": 0}, "T"),
    ({"seeds": []}, "seeds"),
    ({"algorithm": {"name": "sgd"}}, "algorithm"),
    ({"instance": {"kind": "nope"}}, "instance/kind"),
    ({"extra": 1}, "<root>"),
])
def test_schema_errors_carry_path(bad, where):
    with pytest.raises(ConfigError, match=f"at {where}"):
        parse_config(_cfg(**bad))


def test_set_dimension_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        parse_config(_cfg(set={"type": "ball", "center": [0, 0, 0], "radius": 1.0}))
    with pytest.raises(ConfigError):
        parse_config(_cfg(set={"type": "box", "lower": [0, 0], "upper": [1]}))


def test_config_round_trip():
    cfg = parse_config(_cfg(set={"type": "ball", "radius": 0.5}))
    assert parse_config(cfg.to_dict()) == cfg
    assert isinstance(cfg.build_set(), Ball) and cfg.build_set().radius == 0.5
    assert cfg.with_T([5, 9]).T == (5, 9)


def test_bundled_lp_config_loads():
    import gstar.harness as h
    cfg = h.load_config(Path(h.__file__).with_name("lp_fig.json"))
    assert cfg.T == (100, 500, 5000, 10000) and cfg.instance_params == {"sigma": 0.1, "p": 4}


# -- instances --------------------------------------------------------------


def test_lp_noise_free_interpolates():
    inst = build_instance("lp_regression", {"sigma": 0.0, "p": 4}, 80, 3)
    x_bar = np.array(inst.meta["x_bar"])
    S = Ball([0, 0], 2.0)
    assert S.contains(x_bar)
    assert np.all(inst.losses.values(x_bar) <= 1e-30)
    rep = solve_hindsight(inst.losses, S)
    assert rep.converged
    # flat quartic minimum: a 1e-10 gradient-mapping stop leaves ~1e-10 of L*
    assert rep.L_star <= 1e-8 and rep.G_star <= 1e-10


def test_instance_seed_reproducibility():
    for kind in ("lp_regression", "cross_entropy", "lower_bound", "stochastic_noisy_ls"):
        a = build_instance(kind, {}, 30, 5)
        b = build_instance(kind, {}, 30, 5)
        c = build_instance(kind, {}, 30, 6)
        x = np.array([0.1, -0.2])
        assert np.array_equal(a.losses.values(x), b.losses.values(x)), kind
        assert not np.array_equal(a.losses.values(x), c.losses.values(x)), kind


def test_cross_entropy_smoothness_and_sign():
    inst = build_instance("cross_entropy", {"delta": 0.9}, 200, 0, dim=4)
    S = Ball(np.zeros(4), 1.0)
    assert np.all(inst.losses.smoothness(S) <= 4 / 4 + 1e-12)
    assert np.all(inst.losses.values(S.sample(np.random.default_rng(0), 50)) >= 0)


def test_unknown_kind():
    with pytest.raises(ValueError):
        build_instance("stochastic_other", {}, 5, 0)


@pytest.mark.parametrize("T", [50, 200, 800])
def test_lp_measures_monotone_in_T(T):
    # prefixes of one stream: the comparator moves but min over x of a growing sum cannot shrink
    inst = build_instance("lp_regression", {"sigma": 0.1}, 2 * T, 0)
    S = Ball([0, 0], 1.0)
    short = solve_hindsight(type(inst.losses)(inst.losses.losses[:T]), S)
    full = solve_hindsight(inst.losses, S)
    assert full.L_star >= short.L_star


# -- runner and reports ------------------------------------------------------


def test_case3_report_reproduces_rationals():
    rep = run_experiment(parse_config({"instance": {"kind": "prop1_case3"}, "T": 7, "seeds": [0],
                                       "algorithm": {"name": "ogd"}}), workers=1)
    (row,) = rep.rows
    assert row.L_star == pytest.approx(56 / 17, rel=1e-8)
    assert row.audit_pass is True
    assert rep.passed


def test_run_experiment_rows_sorted_and_passing():
    rep = run_experiment(parse_config(_cfg(T=[40, 20])), workers=1)
    keys = [(r.T, r.seed, r.algorithm) for r in rep.rows]
    assert keys == sorted(keys) and len(keys) == 12
    assert rep.passed and not rep.failures()
    assert any(a.name == "gstar_le_2L_lstar_violations" and a.measured == 0 for a in rep.aggregates)


def test_parallel_matches_serial(monkeypatch):
    cfg = parse_config(_cfg(T=[30, 50]))
    serial = run_experiment(cfg, workers=1)
    monkeypatch.setenv("GSTAR_THREADS", "2")
    par = run_experiment(cfg)
    strip = lambda rep: [{k: v for k, v in r.__dict__.items() if k != "wall_ms"} for r in rep.rows]
    assert strip(serial) == strip(par)
    assert serial.aggregates == par.aggregates


def test_bandit_rows_are_expectation_only():
    cfg = parse_config({"instance": {"kind": "stochastic_consistent_ls",
                                     "params": {"x_star": [0.2, 0.1] + [0.0] * 6}},
                        "T": 200, "dim": 8, "seeds": [0, 1, 2], "algorithm": [{"name": "bgd_adanorm"}]})
    rep = run_experiment(cfg, workers=1)
    assert all(r.audit_pass is None for r in rep.rows)
    assert [a.name for a in rep.aggregates if a.name.startswith("mean_regret_upper")] == [
        "mean_regret_upper[bgd_adanorm,T=200]"]


def test_bandit_on_linear_losses_rejected():
    cfg = parse_config({"instance": {"kind": "lower_bound"}, "T": 10, "seeds": [0],
                        "algorithm": {"name": "bgd_constant"}})
    with pytest.raises(ConfigError):
        run_experiment(cfg, workers=1)


def _row(**over):
    base = dict(seed=0, T=7, algorithm="ogd", rho_T=0.1, L_star=56 / 17, G_star=1 / 3, bound_gstar=2.0,
                bound_lstar=None, audit_pass=True, wall_ms=1.5)
    base.update(over)
    return ReportRow(**base)


def test_golden_csv_bytes():
    text = report_csv(ExperimentReport([_row()]))
    assert text == ("seed,T,algorithm,rho_T,L_star,G_star,bound_gstar,bound_lstar,audit_pass,wall_ms\n"
                    "0,7,ogd,0.10000000000000001,3.2941176470588234,0.33333333333333331,2,,true,1.5\n")


def test_empty_report_csv_is_header_only():
    assert report_csv(ExperimentReport()) == ",".join(COLUMNS) + "\n"


def test_csv_floats_round_trip_exactly():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, 50)
    rows = [_row(rho_T=float(v)) for v in vals]
    lines = report_csv(ExperimentReport(rows)).splitlines()[1:]
    back = [float(l.split(",")[3]) for l in lines]
    assert back == [float(v) for v in vals]


def test_json_round_trip(tmp_path):
    rep = ExperimentReport([_row(), _row(seed=1, audit_pass=None, L_star=None, rho_T=math.nan)],
                           [AggregateAudit("x", 1.0, 2.0, True, "d")], {"k": 1})
    emit_report(rep, "json", tmp_path / "sub" / "r.json")
    back = load_report(tmp_path / "sub" / "r.json")
    assert back.rows[0] == rep.rows[0] and math.isnan(back.rows[1].rho_T)
    assert back.aggregates == rep.aggregates and back.config == {"k": 1}
    assert report_json(back) == report_json(rep)
    with pytest.raises(ValueError):
        emit_report(rep, "xml", tmp_path / "r.xml")
    bad = json.loads(report_json(rep))
    bad["schema_version"] = 99
    with pytest.raises(ValueError):
        ExperimentReport.from_dict(bad)


# -- traces and CLI -----------------------------------------------------------


def _traced(tmp_path, **over):
    cfg = parse_config(_cfg(outputs={"traces": str(tmp_path / "tr")}, T=40, seeds=[0], **over))
    run_experiment(cfg, workers=1)
    return sorted((tmp_path / "tr").glob("*.json"))


def test_trace_audit_consistent(tmp_path):
    paths = _traced(tmp_path)
    assert len(paths) == 3
    for p in paths:
        res = audit_trace(p)
        assert res.consistent and res.passed, res.messages


def test_trace_audit_detects_tampering(tmp_path):
    p = _traced(tmp_path)[0]
    doc = json.loads(p.read_text())
    doc["row"]["rho_T"] += 1.0
    p.write_text(json.dumps(doc))
    assert not audit_trace(p).consistent
    doc["row"]["rho_T"] -= 1.0
    doc["iterates"][3] = [5.0, 5.0]
    p.write_text(json.dumps(doc))
    res = audit_trace(p)
    assert not res.consistent and any("leave" in m for m in res.messages)


def test_cli_run_and_audit(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_cfg(T=30, seeds=[0], outputs={"traces": str(tmp_path / "tr")})))
    assert main(["run", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(COLUMNS) and len(out.splitlines()) == 4
    assert main(["sweep", str(cfg), "--T-grid", "20,25", "--csv", str(tmp_path / "s.csv")]) == 0
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 7
    traces = [str(p) for p in (tmp_path / "tr").glob("*.json")]
    assert main(["audit", *traces]) == 0
    doc = json.loads(Path(traces[0]).read_text())
    doc["row"]["audit_pass"] = False
    Path(traces[0]).write_text(json.dumps(doc))
    assert main(["audit", traces[0]]) == 1


def test_cli_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"T": 3}))
    assert main(["run", str(bad)]) == 2
    assert "config invalid" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "junk.json").write_text("{")
    assert main(["run", str(tmp_path / "junk.json")]) == 2


def test_cli_fixtures_and_schema(tmp_path, capsys):
    assert main(["fixtures", "--out", str(tmp_path / "f.json")]) == 0
    fx = json.loads((tmp_path / "f.json").read_text())
    assert fx["prop1_case3"]["exact"]["x_star"] == "14/17"
    assert fx["prop1_case3"]["exact"]["L_star"] == "56/17"
    assert fx["prop1_case4"]["G_star"] == 0.0
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["title"] == "ExperimentConfig"


def test_console_module_entry():
    r = subprocess.run([sys.executable, "-m", "gstar.cli", "schema"], capture_output=True, text=True)
    assert r.returncode == 0 and "ExperimentConfig" in r.stdout
