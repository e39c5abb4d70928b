import json
import subprocess
import sys
from argparse import Namespace

import pytest

from circlemaps.cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, RunConfig, load_spec, main, resolve_config, spec_hash
from circlemaps.errors import SpecError

BP2 = '{"kind": "blaschke_power", "degree": 2, "r": 0.3333333333333333}'


def run(argv, tmp_path):
    out = tmp_path / "report.json"
    code = main(argv + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_analyze_trig_lift(tmp_path):
    code, rep = run(["analyze", '{"kind": "trig_lift", "degree": 2}'], tmp_path)
    assert code == EXIT_OK
    assert rep["result"]["certified"] and rep["result"]["parabolic"] == []
    assert rep["command"] == "analyze"
    assert rep["map_sha256"] == spec_hash({"kind": "trig_lift", "degree": 2})


def test_analyze_blaschke_and_hd(tmp_path):
    code, rep = run(["analyze", BP2], tmp_path)
    assert code == EXIT_OK and len(rep["result"]["parabolic"]) == 1
    code, rep = run(["analyze", '{"kind": "hd", "degree": 3}', "--max-period", "3"], tmp_path)
    (par,) = rep["result"]["parabolic"]
    assert code == EXIT_OK and abs(par["points"][0]) < 1e-12


def test_analyze_attracting_orbit_fails(tmp_path):
    code, rep = run(["analyze", '{"kind": "trig_lift", "degree": 2, "sin": [-0.25]}'], tmp_path)
    assert code == EXIT_FAIL
    assert rep["status"] == "failed" and rep["result"]["witness"]["class"] == "Attracting"


def test_metrize_writes_csv(tmp_path):
    csv_path = tmp_path / "m.csv"
    code, rep = run(["metrize", BP2, "--grid", "4096", "--check-points", "500", "--csv", str(csv_path)], tmp_path)
    assert code == EXIT_OK and rep["result"]["certified"]
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "x,Dh,Dg_phi_x" and len(lines) == 501


def test_normalize(tmp_path):
    code, rep = run(["normalize", BP2, "--N", "2"], tmp_path)
    assert code == EXIT_OK
    assert rep["result"]["N"] == 2 and rep["result"]["ok"]


def test_verify_core(tmp_path):
    code, rep = run(["verify", "core"], tmp_path)
    assert code == EXIT_OK
    assert all(c["passed"] for c in rep["result"]["checks"])


def test_reports_are_reproducible(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    main(["analyze", BP2, "--out", str(a)])
    main(["analyze", BP2, "--out", str(b)])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    ja["config"].pop("out")
    jb["config"].pop("out")
    assert ja == jb


def test_bad_json_reports_position(tmp_path, capsys):
    code = main(["analyze", '{"kind": "hd",\n "degree": }'])
    assert code == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(SpecError):
        load_spec('{"kind": ')


def test_unknown_kind_is_an_error(capsys):
    assert main(["analyze", '{"kind": "spiral"}']) == EXIT_ERROR
    assert "spiral" in capsys.readouterr().err


def test_grid_must_be_power_of_two(capsys):
    assert main(["analyze", BP2, "--grid", "1000"]) == EXIT_ERROR
    assert "power of two" in capsys.readouterr().err


def test_config_precedence():
    env = {"CIRCLEMAPS_GRID": "2048", "CIRCLEMAPS_EPS_PAR": "0.01", "CIRCLEMAPS_SEED": "4"}
    cfg = resolve_config(Namespace(grid=1024, seed=None), env)
    assert cfg.grid == 1024 and cfg.eps_par == 0.01 and cfg.seed == 4
    assert resolve_config(Namespace(), {}) == RunConfig()


def test_config_json_round_trip():
    cfg = RunConfig(grid=512, seed=3)
    assert RunConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_spec_from_file(tmp_path, capsys):
    path = tmp_path / "map.json"
    path.write_text(BP2)
    assert main(["analyze", str(path), "--max-period", "2"]) == EXIT_OK
    assert "1 parabolic" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "circlemaps", "verify", "core"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("verify core: passed")
