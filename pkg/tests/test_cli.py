import json
import logging

import pytest

from flowlab import cli


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(p)


SMALL_PAIR = {
    "scenario": "comparison-pair",
    "domain": {"kind": "disk", "n_r": 32},
    "boundary": {"mode": "dirichlet", "schedule": "constant", "params": {"value": 0.0}},
    "time": {"t_end": 1.0, "output_step": 0.25, "du_max": 0.01},
}


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    names = [line.split()[0] for line in out]
    assert len(names) >= 7
    for n in ("ln-disk", "cd-lowspeed", "cd-fastgrowth", "divergence-sec2",
              "steady-counterexample-sec3", "comparison-pair", "main-theorem-window"):
        assert n in names
    assert all(len(line.split(maxsplit=1)) == 2 for line in out)


@pytest.mark.parametrize("name", sorted(cli.SCENARIOS))
def test_builtin_configs_run(name, tmp_path):
    assert cli.main(["run", name, "--out-dir", str(tmp_path), "--quiet"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["scenario"] == name
    assert summary["verdicts"]
    for f in summary["files"]:
        assert f.startswith(name + ".") and (tmp_path / f).exists()


def test_divergence_summary_reports_status_and_slope(tmp_path):
    cli.main(["run", "divergence-sec2", "--out-dir", str(tmp_path), "--quiet"])
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["status"] in ("BlowDown", "StepCollapse")
    assert "slope_window" in s["metrics"] and "slope_overall" in s["metrics"]


def test_malformed_json(tmp_path, caplog):
    p = write(tmp_path, '{"scenario": "ln-disk",\n "domain": {"kind": "disk" "n_r": 32}}')
    with caplog.at_level(logging.ERROR, logger="flowlab"):
        assert cli.main(["run", p]) == 2
    assert "line 2, column 28" in caplog.text


def test_unknown_scenario(tmp_path):
    p = write(tmp_path, {"scenario": "nope", "domain": {"kind": "disk", "n_r": 32}})
    assert cli.main(["run", p]) == 2


def test_unknown_keys_rejected(tmp_path, caplog):
    cfg = dict(SMALL_PAIR, domain={"kind": "disk", "n_r": 32, "extra": 1})
    with caplog.at_level(logging.ERROR, logger="flowlab"):
        assert cli.main(["run", write(tmp_path, cfg)]) == 2
    assert "extra" in caplog.text
    # a block the scenario does not use is an unknown key too
    cfg = {"scenario": "ln-disk", "domain": {"kind": "disk", "n_r": 32}, "time": {"t_end": 1}}
    assert cli.main(["run", write(tmp_path, cfg)]) == 2
    cfg = dict(SMALL_PAIR, experiment={"bogus": 1})
    assert cli.main(["run", write(tmp_path, cfg)]) == 2


def test_bad_parameter_values(tmp_path):
    cfg = dict(SMALL_PAIR, boundary={"mode": "dirichlet", "schedule": "low_speed",
                                     "params": {"kind": "Power", "alpha": 1.5}})
    assert cli.main(["run", write(tmp_path, cfg)]) == 2
    cfg = {"scenario": "divergence-sec2", "domain": {"kind": "cylinder", "n_r": 32}}
    assert cli.main(["run", write(tmp_path, cfg)]) == 2


def test_missing_config():
    assert cli.main(["run", "/nonexistent/config.json"]) == 2


def test_solver_failure(tmp_path):
    cfg = {"scenario": "ln-disk", "domain": {"kind": "disk", "n_r": 32},
           "experiment": {"N_max": 2, "stop_delta": 1e-12}}
    assert cli.main(["run", write(tmp_path, cfg), "--out-dir", str(tmp_path)]) == 3


def test_strict_violated_pair(tmp_path):
    cfg = dict(SMALL_PAIR, experiment={"swap": True})
    p = write(tmp_path, cfg)
    out = str(tmp_path / "o")
    assert cli.main(["run", p, "--out-dir", out, "--quiet"]) == 0
    assert cli.main(["run", p, "--out-dir", out, "--strict", "--quiet"]) == 1
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["verdicts"]["ordered"] is False
    cfg = dict(SMALL_PAIR, experiment={"swap": False})
    assert cli.main(["run", write(tmp_path, cfg), "--out-dir", out, "--strict", "--quiet"]) == 0


def test_output_directory_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("FLOWLAB_OUT", str(tmp_path / "env"))
    p = write(tmp_path, SMALL_PAIR)
    cli.main(["run", p, "--quiet"])
    assert (tmp_path / "env" / "summary.json").exists()
    cfg = dict(SMALL_PAIR, output={"directory": str(tmp_path / "cfg")})
    p = write(tmp_path, cfg, "c2.json")
    cli.main(["run", p, "--quiet"])
    assert (tmp_path / "cfg" / "summary.json").exists()
    cli.main(["run", p, "--quiet", "--out-dir", str(tmp_path / "flag")])
    assert (tmp_path / "flag" / "summary.json").exists()


def test_several_configs_and_jobs(tmp_path):
    a = write(tmp_path, SMALL_PAIR, "a.json")
    b = write(tmp_path, dict(SMALL_PAIR, experiment={"offset": 0.3}), "b.json")
    assert cli.main(["run", a, b, "--out-dir", str(tmp_path / "o"), "--jobs", "2", "--quiet"]) == 0
    assert (tmp_path / "o" / "a" / "summary.json").exists()
    assert (tmp_path / "o" / "b" / "summary.json").exists()


def test_initial_from_file(tmp_path):
    from flowlab import diagnostics
    from flowlab.geometry import make_disk

    bg = make_disk(32)
    diagnostics.write_csv(bg.as_field(0.0), tmp_path / "u0.csv", bg)
    cfg = dict(SMALL_PAIR, initial={"file": "u0.csv"})
    assert cli.main(["run", write(tmp_path, cfg), "--out-dir", str(tmp_path / "o"), "--quiet"]) == 0
    cfg = dict(SMALL_PAIR, domain={"kind": "disk", "n_r": 16}, initial={"file": "u0.csv"})
    assert cli.main(["run", write(tmp_path, cfg), "--quiet"]) == 2


def test_deterministic_outputs(tmp_path):
    p = write(tmp_path, SMALL_PAIR)
    for d in ("x", "y"):
        cli.main(["run", p, "--out-dir", str(tmp_path / d), "--quiet"])
    for f in (tmp_path / "x").iterdir():
        assert f.read_bytes() == (tmp_path / "y" / f.name).read_bytes()
