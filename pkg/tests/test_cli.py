import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from edident.cf import EmpiricalCF
from edident.cli import main
from edident.config import parse_config
from edident.identify import lemma1_estimate
from edident.simulate import generate_panel

MIX = {"family": "mixture", "p": 0.25, "mu": 1.5, "sd1": 0.5, "sd2": 0.5}
LEMMA1 = {
    "model": {
        "T": 4,
        "q": 1,
        "a": [0.5],
        "initial": MIX,
        "pairs": {"kind": "independent", "eta": {"family": "gaussian", "var": 1.0}, "xi": MIX},
    },
    "simulate": {"n": 50000, "seed": 4},
    "estimate": {"method": "lemma1", "u_half_width": 1.0, "search_interval": [0.0, 1.0], "grid_step": 0.02},
}
GAUSS = {
    "model": {
        "T": 5,
        "q": 1,
        "a": [0.5],
        "initial": {"family": "gaussian", "var": 1.0},
        "pairs": {"kind": "gaussian", "var_eta": 1.0, "var_xi": 1.0, "cov": 0.0},
    },
    "simulate": {"n": 20000, "seed": 2},
    "estimate": {"method": "theorem1", "u_half_width": 1.0, "search_box": [[0.05, 0.95]], "grid_step": 0.05},
    "equivalence": {"candidate_a1": 0.5},
    "montecarlo": {"procedure": "theorem2-demo", "n": 100, "replications": 1},
}


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def _diag(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_then_estimate_matches_library(tmp_path):
    cfg = _write(tmp_path, "l1.yaml", LEMMA1)
    panel, out = str(tmp_path / "p.csv"), str(tmp_path / "est.json")
    assert main(["simulate", "--config", cfg, "--out", panel]) == 0
    assert main(["estimate", "--config", cfg, "--panel", panel, "--out", out, "--curve-csv", str(tmp_path / "c.csv")]) == 0
    got = json.loads(open(out).read())
    assert got["manifest"]["command"] == "estimate" and got["manifest"]["schema_version"]
    rc = parse_config(LEMMA1)
    spec = rc.model.to_spec()
    e = rc.estimate
    lib = lemma1_estimate(EmpiricalCF(generate_panel(spec, 50000, 4)), 1, 4, e.grid(), e.search_interval, e.grid_step)
    assert got["result"]["a_hat"] == list(lib.a_hat)
    assert abs(lib.a_hat[0] - 0.5) < 0.2
    assert (tmp_path / "c.csv.manifest.json").exists()


def test_equivalence_identity(tmp_path):
    cfg = _write(tmp_path, "g.yaml", GAUSS)
    out = tmp_path / "eq.json"
    assert main(["equivalence", "--config", cfg, "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    r = d["results"][0]
    assert r["residual"] == 0 and r["pd_ok"] and r["tilde"] == d["truth"]


def test_theorem1_on_gaussian_panel_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path, "g.yaml", GAUSS)
    panel = str(tmp_path / "g.csv")
    assert main(["simulate", "--config", cfg, "--out", panel]) == 0
    assert main(["estimate", "--config", cfg, "--panel", panel, "--out", str(tmp_path / "t1.json")]) == 3
    d = _diag(capsys)
    assert d["exit_code"] == 3 and d["status"] == "unidentified"
    assert json.loads((tmp_path / "t1.json").read_text())["result"]["identified"] is False


def test_validation_exit_2(tmp_path, capsys):
    bad = _write(tmp_path, "bad.yaml", {**GAUSS, "estimate": {"flat_tol": 1e-9, "typo_key": 1}})
    assert main(["simulate", "--config", bad, "--out", str(tmp_path / "x.csv")]) == 2
    assert "typo_key" in _diag(capsys)["message"]
    # panel with the wrong number of columns
    cfg = _write(tmp_path, "l1.yaml", LEMMA1)
    (tmp_path / "p3.csv").write_text("y1,y2,y3\n1,2,3\n")
    assert main(["estimate", "--config", cfg, "--panel", str(tmp_path / "p3.csv"), "--out", str(tmp_path / "o.json")]) == 2
    assert "T = 4" in _diag(capsys)["message"]
    (tmp_path / "p4.csv").write_text("y1,y2,y3,y4\n1,2,3,4\n1,2,x,4\n")
    assert main(["estimate", "--config", cfg, "--panel", str(tmp_path / "p4.csv"), "--out", str(tmp_path / "o.json")]) == 2
    assert "line 3" in _diag(capsys)["message"]
    # equivalence on a nongaussian spec
    assert main(["equivalence", "--config", cfg, "--out", str(tmp_path / "e.json"), "--candidate", "0.6"]) == 2


def test_equivalence_rank_deficient_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path, "g.yaml", GAUSS)
    assert main(["equivalence", "--config", cfg, "--out", str(tmp_path / "e.json"), "--candidate", "1.0"]) == 3
    assert _diag(capsys)["status"] == "unidentified"


def test_analytic_estimate_and_moments(tmp_path):
    dep = {
        "model": {
            "T": 4,
            "q": 1,
            "a": [0.5],
            "initial": MIX,
            "pairs": {"kind": "factor", "factors": [MIX, {"family": "gamma", "shape": 2.0, "scale": 0.5}], "loadings": [[1, 0.3], [0.6, 1]]},
        },
        "estimate": {"method": "theorem1", "backend": "analytic", "search_box": [[0.05, 0.95]], "grid_step": 0.01},
    }
    cfg = _write(tmp_path, "d.yaml", dep)
    out = tmp_path / "t1.json"
    assert main(["estimate", "--config", cfg, "--out", str(out), "--conditioning-csv", str(tmp_path / "cond.csv")]) == 0
    assert json.loads(out.read_text())["result"]["a_hat"][0] == pytest.approx(0.5, abs=1e-6)
    cond = np.loadtxt(tmp_path / "cond.csv", delimiter=",", skiprows=1)
    assert cond.shape[1] == 5 and np.all(cond[:, -1] > 0)
    assert main(["moments", "--config", cfg, "--out-prefix", str(tmp_path / "m_")]) == 0
    C = np.loadtxt(tmp_path / "m_covariance.csv", delimiter=",", skiprows=1)
    assert C.shape == (4, 4)


def test_montecarlo_command(tmp_path):
    cfg = _write(tmp_path, "g.yaml", GAUSS)
    out = tmp_path / "mc.json"
    assert main(["montecarlo", "--config", cfg, "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["records"][0]["residual"] <= 1e-10 and d["manifest"]["command"] == "montecarlo"
    assert (tmp_path / "mc.csv").exists()


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "edident.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
