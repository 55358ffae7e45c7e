import json
import os

import numpy as np
import pytest

from gec.errors import ConfigError
from gec.harness import check_suite, load_records, parse_config, report, run_experiment, summary_text
from gec.harness.cli import main
from gec.harness.config import load_config
from gec.harness.report import write_csv


def _cfg(tmp_path, **over):
    data = {
        "problem": {"class": "slr", "n": 40, "m": 30, "prior": "bernoulli_gaussian",
                    "prior_params": {"rho": 0.5}, "gamma_w": 10.0},
        "gec": {"mode": "mmse", "diagonalizer": "uniform", "init_gamma1": 1e-3},
        "run": {"seeds": [2, 0, 1]},
        "oracles": {"replica": True},
        "output": {"dir": str(tmp_path / "out")},
        "report": {"formats": ["csv", "jsonl", "text"]},
    }
    for k, v in over.items():
        data[k] = {**data.get(k, {}), **v}
    return data


def _write_toml(path, text):
    path.write_text(text)
    return str(path)


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_cfg(tmp_path, gec={"tolerance": 1e-3}))
    bad = _cfg(tmp_path)
    bad["plots"] = {}
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_empty_seeds_rejected_without_output(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_cfg(tmp_path, run={"seeds": []}))
    with pytest.raises(ConfigError):
        parse_config(_cfg(tmp_path, run={"seeds": [1, 1]}))
    assert not (tmp_path / "out").exists()


def test_bad_values_rejected(tmp_path):
    for over in ({"problem": {"n": 0}}, {"gec": {"diagonalizer": "median"}}, {"report": {"formats": ["xml"]}},
                 {"gec": {"diagonalizer": "block"}}, {"oracles": {"replica": "yes"}}):
        with pytest.raises(ConfigError):
            parse_config(_cfg(tmp_path, **over))


def test_workers_env(monkeypatch, tmp_path):
    monkeypatch.setenv("GEC_WORKERS", "3")
    assert parse_config(_cfg(tmp_path)).workers == 3
    monkeypatch.setenv("GEC_WORKERS", "many")
    with pytest.raises(ConfigError):
        parse_config(_cfg(tmp_path))


def test_glm_block_default(tmp_path):
    cfg = parse_config(_cfg(tmp_path, problem={"class": "glm", "likelihood": "probit", "prior": "gaussian", "prior_params": {}},
                            gec={"diagonalizer": "block"}))
    assert cfg.gec_config(70).diagonalizer.blocks == (40, 30)


def test_run_sorted_outputs_and_determinism(tmp_path):
    cfg = parse_config(_cfg(tmp_path))
    recs = run_experiment(cfg)
    assert [r["seed"] for r in recs] == [0, 1, 2]
    out = tmp_path / "out"
    for name in ("results.csv", "results.jsonl", "summary.txt", "trace-0.jsonl"):
        assert (out / name).exists()
    first = [json.loads(line) for line in open(out / "trace-0.jsonl")]
    assert first[-1]["termination"] == "converged"
    write_csv(recs, out / "a.csv", include_timing=False)
    cfg2 = parse_config(_cfg(tmp_path, output={"dir": str(tmp_path / "again")}, run={"workers": 2}))
    write_csv(run_experiment(cfg2), out / "b.csv", include_timing=False)
    assert (out / "a.csv").read_bytes() == (out / "b.csv").read_bytes()


def test_jsonl_round_trip(tmp_path):
    recs = run_experiment(parse_config(_cfg(tmp_path, run={"seeds": [5]})), write=False)
    report(recs, "jsonl", tmp_path / "r.jsonl")
    back = load_records(tmp_path / "r.jsonl")
    assert back == [{k: recs[0][k] for k in back[0]}]
    assert back[0]["nmse"] == recs[0]["nmse"]


def test_single_record_csv(tmp_path):
    recs = run_experiment(parse_config(_cfg(tmp_path, run={"seeds": [7]})), write=False)
    report(recs, "csv", tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0].startswith("seed,status")
    assert load_records(tmp_path / "r.csv")[0]["seed"] == 7
    with pytest.raises(ValueError):
        report([], "csv", tmp_path / "x.csv")


def test_gaussian_sanity_config(tmp_path):
    cfg = parse_config({
        "problem": {"class": "slr", "n": 300, "m": 300, "prior": "gaussian", "matrix": "row_orthogonal",
                    "gamma_w": 1.0},
        "gec": {"mode": "mmse", "diagonalizer": "uniform"},
        "run": {"seeds": [0, 1, 2]},
        "oracles": {"exact_gaussian": True},
        "output": {"dir": str(tmp_path / "g")},
    })
    for rec in run_experiment(cfg, write=False):
        assert rec["status"] == "ok" and rec["converged"]
        assert rec["exact_mean_dev"] < 1e-8
        assert rec["xhat_residual"] < 1e-8 and rec["eta_residual"] < 1e-8
        # A orthogonal, unit noise and prior: posterior variance 1/2 everywhere
        assert rec["predicted_mse"] == pytest.approx(0.5, abs=1e-10)
        assert rec["nmse"] == pytest.approx(0.5, rel=0.2)


def test_failed_seed_recorded(tmp_path):
    cfg = parse_config(_cfg(tmp_path, gec={"max_iters": 1, "mode": "map", "diagonalizer": "vector"},
                            problem={"prior": "bernoulli_gaussian"}))
    recs = run_experiment(cfg, write=False)
    assert all(r["status"] in ("ok", "failed") for r in recs)


def test_summary_with_check_table():
    rep = check_suite("admm", n_instances=4)
    text = summary_text([{"seed": 0, "status": "ok", "converged": True}], checks=[rep])
    assert "gec_admm_deviation" in text and "FAIL" not in text


def test_unknown_suite():
    with pytest.raises(ConfigError):
        check_suite("everything")


def test_fixed_points_suite_gaussian():
    rep = check_suite("fixed_points", n_gaussian=5, n_map=0)
    assert rep.passed


def test_cli_exit_codes(tmp_path, capsys):
    path = _write_toml(tmp_path / "c.toml", f"""
[problem]
class = "slr"
n = 30
m = 20
[run]
seeds = [0]
[output]
dir = "{tmp_path / 'cli'}"
""")
    assert main(["run", path]) == 0
    assert (tmp_path / "cli" / "results.csv").exists()
    assert main(["report", str(tmp_path / "cli" / "results.csv"), "--format", "text"]) == 0
    assert "records: 1" in capsys.readouterr().out
    assert main(["report", str(tmp_path / "cli" / "results.csv"), "--format", "jsonl",
                 "--output", str(tmp_path / "r.jsonl")]) == 0
    assert load_records(tmp_path / "r.jsonl")[0]["seed"] == 0
    assert main(["check", "admm", "--quick"]) == 0
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    assert lines and all(v["passed"] for v in lines)
    assert main(["check", "nosuch"]) == 2
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    bad = _write_toml(tmp_path / "bad.toml", "[run]\nseeds = []\n")
    assert main(["run", bad]) == 2
    assert main([]) == 2


def test_load_config_toml_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write_toml(tmp_path / "x.toml", "[run\nseeds = 1"))
