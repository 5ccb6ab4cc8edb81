import json
import subprocess
import sys

import numpy as np
import pytest

from qudit_control.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_OK, main
from qudit_control.results import LayoutError, load_alpha, read_csv, save_alpha
from qudit_control.config import build_problem, load_config


def write_cfg(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


RESTING = {
    "model": {"levels": 2, "essential": 2, "omega_a_ghz": 4.8, "xi_a_ghz": 0.0},
    "controls": {"splines_per_carrier": 4, "carriers_ghz": [0.0]},
    "grid": {"duration_ns": 10.0, "steps": 50},
    "target": {"builtin": "identity"},
    "output": {"artifacts": ["breakdown", "populations", "history", "alpha", "summary"]},
}


def test_simulate_resting_identity(tmp_path):
    cfg = write_cfg(tmp_path, RESTING)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "breakdown.json").read_text())
    assert rep["J1h"] == 0.0 and rep["J2h"] == 0.0 and rep["steps"] == 50
    header, rows = read_csv(out / "populations.csv")
    assert header[0] == "t_ns" and rows.shape[1] == 1 + 2 * 2


def test_missing_target_file(tmp_path, capsys):
    data = dict(RESTING, target={"file": "absent_gate.json"})
    assert main(["simulate", "--config", write_cfg(tmp_path, data), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "absent_gate.json" in capsys.readouterr().err


def test_bad_usage_and_config(tmp_path, capsys):
    assert main(["simulate"]) == EXIT_CONFIG
    assert main(["frobnicate", "--config", "x"]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    bad = dict(RESTING, model={"levels": 2, "essential": 3, "omega_a_ghz": 4.8, "xi_a_ghz": 0.0})
    assert main(["simulate", "--config", write_cfg(tmp_path, bad)]) == EXIT_CONFIG
    assert "model.essential" in capsys.readouterr().err


def test_verify_small_passes(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--config", "builtin:small", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "verify.json").read_text())
    assert rep["pass"] and set(rep["checks"]) == {"adjoint_vs_sensitivity", "adjoint_vs_fd", "reversibility"}
    header, rows = read_csv(out / "gradients.csv")
    assert rows.shape == (24, 4)


def test_verify_detects_corrupted_gradient(tmp_path):
    code = main(["verify", "--config", "builtin:small", "--out", str(tmp_path), "--corrupt-gradient", "1e-3"])
    assert code == EXIT_CHECK
    assert not json.loads((tmp_path / "verify.json").read_text())["pass"]


def test_verify_zero_steps(tmp_path):
    data = load_config("builtin:small").to_dict()
    data["grid"]["steps"] = 0
    out = tmp_path / "v0"
    assert main(["verify", "--config", write_cfg(tmp_path, data), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "verify.json").read_text())
    assert rep["steps"] == 0 and rep["checks"]["reversibility"]["value"] == 0.0


def _optimize(tmp_path, data, sub, *extra):
    out = tmp_path / sub
    code = main(["optimize", "--config", write_cfg(tmp_path, data, f"{sub}.json"), "--out", str(out), *extra])
    return code, out


def test_optimize_infinite_tolerance(tmp_path):
    data = load_config("builtin:small").to_dict()
    data["optimizer"]["tol"] = "inf"
    code, out = _optimize(tmp_path, data, "inf")
    assert code == EXIT_OK
    s = json.loads((out / "summary.json").read_text())
    assert s["iterations"] == 0 and s["status"] == "converged"


def test_optimize_writes_artifacts_and_is_reproducible(tmp_path):
    data = load_config("builtin:small").to_dict()
    data["optimizer"]["max_iter"] = 15
    code_a, a = _optimize(tmp_path, data, "a", "--seed", "3")
    code_b, b = _optimize(tmp_path, data, "b", "--seed", "3")
    assert code_a == code_b
    for f in ("history.csv", "alpha.json", "breakdown.json", "summary.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    header, hist = read_csv(a / "history.csv")
    assert header[:6] == ["iteration", "J1h", "J2h", "total", "pg_norm", "step"]
    assert np.all(np.diff(hist[:, 3]) <= 0)
    prob = build_problem(load_config("builtin:small"))
    alpha = load_alpha(a / "alpha.json", prob.controls)
    assert alpha.shape == (prob.num_params,)


def test_optimize_not_converged_exit(tmp_path):
    data = load_config("builtin:small").to_dict()
    data["optimizer"]["max_iter"] = 2
    code, out = _optimize(tmp_path, data, "cap")
    assert code == EXIT_NOT_CONVERGED
    assert json.loads((out / "summary.json").read_text())["status"] == "max_iter"
    assert (out / "alpha.json").exists()


def test_probe_quadratic_hook(tmp_path):
    rng = np.random.default_rng(0)
    B = rng.normal(size=(5, 5))
    A = B @ B.T
    (tmp_path / "A.json").write_text(json.dumps(A.tolist()))
    out = tmp_path / "p"
    args = ["probe", "--config", "builtin:small", "--out", str(out), "--test-quadratic", str(tmp_path / "A.json")]
    assert main(args) == EXIT_OK
    header, tab = read_csv(out / "probe_asymmetry.csv")
    assert header == ["eps", "norm_symmetric", "norm_antisymmetric", "ratio"]
    assert tab.shape[0] == 4
    np.testing.assert_allclose(tab[:, 1], np.linalg.norm(A), rtol=1e-8)
    _, eig = read_csv(out / "probe_eigenvalues.csv")
    np.testing.assert_allclose(eig[:, 1], np.linalg.eigvalsh(A)[::-1], rtol=1e-8)


def test_probe_needs_alpha(tmp_path):
    assert main(["probe", "--config", "builtin:small", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_spectrum_and_layout_checks(tmp_path):
    prob = build_problem(load_config("builtin:small"))
    a = np.random.default_rng(1).uniform(-0.05, 0.05, prob.num_params)
    save_alpha(tmp_path / "a.json", prob.controls, a)
    out = tmp_path / "s"
    assert main(["spectrum", "--config", "builtin:small", "--alpha", str(tmp_path / "a.json"), "--out", str(out)]) == EXIT_OK
    header, rows = read_csv(out / "spectrum.csv")
    assert header == ["frequency_ghz", "magnitude"] and rows.shape == (4096 // 2 + 1, 2)
    info = json.loads((out / "spectrum_peaks.json").read_text())
    assert info["parseval_error"] <= 1e-10
    # simulate with the stored alpha reproduces the in-memory objective
    assert main(["simulate", "--config", "builtin:small", "--alpha", str(tmp_path / "a.json"), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "breakdown.json").read_text())["J1h"] == pytest.approx(prob.objective(a).J1h, rel=1e-14)

    other = build_problem(load_config("builtin:cnot"))
    with pytest.raises(LayoutError):
        load_alpha(tmp_path / "a.json", other.controls)
    doc = json.loads((tmp_path / "a.json").read_text())
    doc["layout"]["order"] = "spline,carrier,component"
    (tmp_path / "b.json").write_text(json.dumps(doc))
    assert main(["spectrum", "--config", "builtin:small", "--alpha", str(tmp_path / "b.json"), "--out", str(out)]) == EXIT_CONFIG
    (tmp_path / "c.json").write_text(json.dumps(a.tolist()))
    with pytest.raises(LayoutError, match="layout"):
        load_alpha(tmp_path / "c.json", prob.controls)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qudit_control", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "optimize", "verify", "probe", "spectrum"):
        assert cmd in r.stdout
