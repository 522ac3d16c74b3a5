import csv
import json
from pathlib import Path

import numpy as np
import pytest

import finslerforge
from finslerforge import cli

SAMPLES = Path(finslerforge.__file__).parent / "samples"


def run(tmp_path, command, cfg, *extra, name="cfg.json"):
    if isinstance(cfg, dict):
        tmp_path.mkdir(parents=True, exist_ok=True)
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
    else:
        path = cfg
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(path), "--out", str(out), *extra])
    report = out / f"{command}-report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None), out


FLAT = json.loads((SAMPLES / "verify-flat.json").read_text())


def test_flat_sample_passes(tmp_path):
    code, rep, out = run(tmp_path, "verify-solution", SAMPLES / "verify-flat.json")
    assert code == 0 and rep["pass"]
    assert rep["n_checks"] == len(rep["checks"]) > 0
    assert all(c["max_residual"] == 0 for c in rep["checks"])
    assert (out / "verify-solution.csv").exists()


def test_mdr_sample_low_p_negative(tmp_path):
    code, rep, out = run(tmp_path, "mdr", SAMPLES / "mdr-sweep.json")
    assert code == 0
    with open(out / "mdr.csv") as fh:
        rows = list(csv.DictReader(fh))
    low = [float(r["omega2"]) for r in rows if r["branch"] == "scalar-low-p"]
    assert len(low) == 3 * 2 * 2 * 6 * 31
    assert max(low) < 0


def test_undeclared_coordinate_exit_and_message(tmp_path, capsys):
    cfg = dict(FLAT, grid={"y9": [0, 1, 3]})
    code, rep, _ = run(tmp_path, "verify-solution", cfg)
    assert code == cli.EXIT_CONFIG and rep is None
    assert "y9" in capsys.readouterr().err


def test_undeclared_variable_in_expression(tmp_path, capsys):
    code, _, _ = run(tmp_path, "verify-solution", dict(FLAT, h5="1 + y9"))
    assert code != 0
    assert "y9" in capsys.readouterr().err


def test_empty_check_list_warns(tmp_path, capsys):
    cfg = json.loads((SAMPLES / "curvature-dmetric.json").read_text())
    del cfg["expect"]
    code, rep, _ = run(tmp_path, "curvature", cfg)
    assert code == 0 and rep["pass"] and rep["n_checks"] == 0
    assert any("no checks" in w for w in rep["warnings"])
    assert "no checks" in capsys.readouterr().err


def test_failing_check_exit_1(tmp_path):
    code, rep, _ = run(tmp_path, "verify-solution", dict(FLAT, upsilon2=0.5))
    assert code == cli.EXIT_FAIL and not rep["pass"]
    failed = {c["name"] for c in rep["checks"] if not c["pass"]}
    # Upsilon2 feeds every vertical source but not the horizontal one
    assert failed == {"residual.R33", "residual.R55", "residual.R77"}


def test_tol_override_recorded(tmp_path):
    code, rep, _ = run(tmp_path, "verify-solution", dict(FLAT, upsilon2=0.5), "--tol", "10")
    assert code == 0
    assert rep["config"]["overrides"]["tol"] == 10.0
    assert all(c["tol"] == 10.0 for c in rep["checks"] if c["name"].startswith("residual."))


def test_numeric_error_exit_3(tmp_path, capsys):
    cfg = json.loads((SAMPLES / "generate-exp.json").read_text())
    cfg["phi_hat"] = "(y3 - 0.5)^2"
    cfg["grid"] = {"y3": [0.0, 1.0, 3]}
    code, _, _ = run(tmp_path, "generate-solution", cfg)
    assert code == cli.EXIT_NUMERIC
    assert "numeric error" in capsys.readouterr().err


def test_bad_json_is_config_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(tmp_path, "mdr", p)[0] == cli.EXIT_CONFIG
    assert run(tmp_path, "mdr", tmp_path / "missing.json")[0] == cli.EXIT_CONFIG


def test_command_mismatch(tmp_path):
    assert run(tmp_path, "mdr", SAMPLES / "verify-flat.json")[0] == cli.EXIT_CONFIG


def test_emit_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        code, _, out = run(tmp_path / str(k), "brane", SAMPLES / "brane.json")
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]


def test_timing_only_on_request(tmp_path):
    _, rep, _ = run(tmp_path, "hessian", SAMPLES / "hessian-randers.json")
    assert "wall_time_s" not in rep
    _, rep, _ = run(tmp_path, "hessian", SAMPLES / "hessian-randers.json", "--timing")
    assert rep["wall_time_s"] >= 0


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    cfg = dict(FLAT, upsilon2=0.5)
    _, _, out1 = run(tmp_path / "a", "verify-solution", cfg)
    monkeypatch.setenv("FINSLERFORGE_THREADS", "4")
    _, _, out4 = run(tmp_path / "b", "verify-solution", cfg)
    for name in ("verify-solution-report.json", "verify-solution.csv"):
        assert (out1 / name).read_bytes() == (out4 / name).read_bytes()
    monkeypatch.setenv("FINSLERFORGE_THREADS", "zero")
    assert run(tmp_path / "c", "verify-solution", cfg)[0] == cli.EXIT_CONFIG


def test_grid_scale_changes_point_count(tmp_path):
    _, rep1, out1 = run(tmp_path / "a", "verify-solution", FLAT)
    _, rep2, out2 = run(tmp_path / "b", "verify-solution", FLAT, "--grid-scale", "2")
    n1 = len((out1 / "verify-solution.csv").read_text().splitlines())
    n2 = len((out2 / "verify-solution.csv").read_text().splitlines())
    assert n2 > n1
    assert run(tmp_path / "c", "verify-solution", FLAT, "--grid-scale", "0")[0] == cli.EXIT_CONFIG


def test_report_text_non_finite():
    rep = cli.Report("x", {"file": {}, "overrides": {}})
    rep.measurements["v"] = float("nan")
    rep.measurements["w"] = np.float64(0.1)
    text = cli.report_text(rep)
    assert '"NaN"' in text or '"nan"' in text
    assert '"w": 0.1' in text


@pytest.mark.parametrize("sample", sorted(p.name for p in SAMPLES.glob("*.json")))
def test_every_sample_passes(tmp_path, sample):
    command = json.loads((SAMPLES / sample).read_text())["command"]
    code, rep, _ = run(tmp_path, command, SAMPLES / sample)
    assert code == 0 and rep["pass"] and rep["n_checks"] > 0
