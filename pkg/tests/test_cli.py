import json

import pytest

from lortz_euler.cli import main


def _cfg(tmp_path, **domain):
    cfg = {"domain": {"m": 8, "grid": {"n_s": 16, "n_theta": 64, "n_z": 16}, **domain},
           "iteration": {"max_iters": 3, "tol": 1e-6},
           "diagnostics": {"n_orbits": 3},
           "output": {"directory": str(tmp_path / "out")}, "seed": 5}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    assert main(["run", "--config", str(_cfg(tmp, epsilon=0.0))]) == 0
    return tmp / "out"


def test_run_writes_outputs(run_dir):
    for name in ("report.json", "convergence.csv", "u.lfld", "H.lfld", "T.lfld",
                 "convergence.png", "H_section.png", "mode_energy.png"):
        assert (run_dir / name).exists(), name
    rep = json.loads((run_dir / "report.json").read_text())
    assert rep["status"] == "converged" and rep["seed"] == 5
    assert rep["thresholds_exceeded"] == []


def test_verify_trace_export(run_dir, capsys):
    assert main(["verify", str(run_dir), "--n-orbits", "3"]) == 0
    assert "failed=none" in capsys.readouterr().out
    assert main(["trace", str(run_dir / "u.lfld"), "--points", "0.5,0,1;0.3,0,2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("x,y,z,period") and len(out) == 3
    assert main(["export", str(run_dir), "--format", "vtk"]) == 0
    text = (run_dir / "solution.vtk").read_text()
    assert "VECTORS u double" in text and "SCALARS H double 1" in text and "SCALARS T double 1" in text


def test_physics_failure_exit_code(tmp_path, capsys):
    cfg = json.loads(_cfg(tmp_path, epsilon=0.1).read_text())
    cfg["iteration"]["max_iters"] = 6
    p = tmp_path / "bad_eps.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(p)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["status"] != "converged"


def test_usage_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown": 1}')
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 2


def test_sweep_m(tmp_path, capsys):
    cfg = json.loads(_cfg(tmp_path, epsilon=0.01).read_text())
    cfg["iteration"]["max_iters"] = 4
    p = tmp_path / "sweep.json"
    p.write_text(json.dumps(cfg))
    code = main(["sweep-m", "--config", str(p), "--m", "8", "--out", str(tmp_path / "sw")])
    assert code in (0, 1)
    rep = json.loads((tmp_path / "sw" / "contraction.json").read_text())
    assert rep["m"] == [8] and rep["rho"]["8"] > 1.0
    assert (tmp_path / "sw" / "contraction.png").exists()
    assert "rho_8=" in capsys.readouterr().out
