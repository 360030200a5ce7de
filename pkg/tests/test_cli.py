import json
import subprocess
import sys

import numpy as np
import pytest

from weaktime.cli import config_hash, main, resolve_threads
from weaktime.config import config_from_dict, load_config
from weaktime.errors import ConfigError
from weaktime.grid import TemporalGrid
from weaktime.records import RecordTable
from weaktime.states import gaussian_pulse, load_state, save_state


def _cfg(tmp_path, **over):
    cfg = {
        "schema_version": 1,
        "mode": "forward",
        "seed": 1,
        "output_dir": str(tmp_path / "out"),
        "grid": {"n_points": 64, "dt": 0.3},
        "state": {"family": "gaussian", "peak_time": 0.6, "width": 1.0, "chirp": 0.2},
        "settings": {"thetas": [0.7853981633974483], "n_phi": 4},
    }
    cfg.update(over)
    return cfg


def _write(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=1))
    return str(p)


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_forward_smoke(tmp_path):
    assert main(["--config", _write(tmp_path, _cfg(tmp_path)), "-q"]) == 0
    out = tmp_path / "out"
    rec = RecordTable.from_csv(out / "rates.csv", TemporalGrid(64, 0.3))
    assert len(rec) == 4 * 64 * 64
    m = _manifest(out)
    assert m["config_sha256"] == config_hash(m["config"])
    assert {"python", "numpy", "weaktime"} <= set(m["versions"])
    assert m["outputs"] == ["rates.csv"]


def test_reconstruct_kirkwood_reports_fidelity(tmp_path):
    cfg = _cfg(tmp_path, mode="reconstruct-kirkwood")
    assert main(["--config", _write(tmp_path, cfg), "-q"]) == 0
    m = _manifest(tmp_path / "out")["metrics"]
    assert m["fidelity"] >= 1 - 1e-8
    assert m["normalization_residual"] < 1e-8
    assert m["time_marginal_residual"] < 1e-8 and m["frequency_marginal_residual"] < 1e-8


def test_forward_then_reconstruct_from_csv(tmp_path):
    assert main(["--config", _write(tmp_path, _cfg(tmp_path)), "--out", str(tmp_path / "fw"),
                 "-q"]) == 0
    cfg = _cfg(tmp_path, mode="reconstruct-kirkwood", input_records="fw/rates.csv")
    assert main(["--config", _write(tmp_path, cfg), "-q"]) == 0
    assert _manifest(tmp_path / "out")["metrics"]["fidelity"] >= 1 - 1e-8


def test_mixed_state_kirkwood_purity(tmp_path):
    pulse = {"width": 1.0, "peak_time": -1.0}
    state = {"family": "mixture", "components": [
        {"pulse": pulse, "probability": 0.5},
        {"pulse": {"width": 0.8, "peak_time": 1.2, "chirp": 0.3}, "probability": 0.5}]}
    cfg = _cfg(tmp_path, mode="reconstruct-kirkwood", state=state,
               grid={"n_points": 96, "dt": 0.25})
    assert main(["--config", _write(tmp_path, cfg), "-q"]) == 0
    m = _manifest(tmp_path / "out")["metrics"]
    assert m["purity_error"] < 1e-6 and m["purity"] < 0.9


def test_wavefunction_mode(tmp_path):
    state = {"family": "superposition", "pulses": [
        {"width": 0.7, "peak_time": 2.1, "weight": [1.0, 0.0]},
        {"width": 0.7, "peak_time": -1.8, "weight": [0.3, 0.4]}]}
    cfg = _cfg(tmp_path, mode="reconstruct-wavefunction", state=state)
    assert main(["--config", _write(tmp_path, cfg), "-q"]) == 0
    m = _manifest(tmp_path / "out")["metrics"]
    assert m["time_error"] < 1e-6 and m["frequency_error"] < 1e-6
    assert m["basis_consistency_error"] < 1e-6
    data = np.loadtxt(tmp_path / "out" / "wavefunction_time.csv", delimiter=",", skiprows=1)
    assert data.shape == (64, 3)


def test_sample_mode_deterministic(tmp_path):
    cfg = _cfg(tmp_path, mode="sample",
               noise={"total_pairs": 100000, "n_trials": 100, "thetas": [0.1, 0.7]})
    path = _write(tmp_path, cfg)
    assert main(["--config", path, "--out", str(tmp_path / "a"), "-q", "--threads", "1"]) == 0
    assert main(["--config", path, "--out", str(tmp_path / "b"), "-q", "--threads", "3"]) == 0
    assert main(["--config", path, "--out", str(tmp_path / "c"), "-q", "--seed", "2"]) == 0
    a = (tmp_path / "a" / "counts.csv").read_text()
    assert a == (tmp_path / "b" / "counts.csv").read_text()
    assert a != (tmp_path / "c" / "counts.csv").read_text()
    assert ((tmp_path / "a" / "estimator_sweep.csv").read_text()
            == (tmp_path / "b" / "estimator_sweep.csv").read_text())
    table = _manifest(tmp_path / "a")["metrics"]["estimator_table"]
    assert table[0]["std"] > table[1]["std"]


def test_sample_mode_requires_noise(tmp_path):
    assert main(["--config", _write(tmp_path, _cfg(tmp_path)), "--mode", "sample", "-q"]) == 2


def test_two_photon_schmidt_table(tmp_path):
    cfg = _cfg(tmp_path, mode="two-photon", grid={"n_points": 32, "dt": 0.5},
               state={"family": "entangled_gaussian", "sigma_minus": 1.0, "sigma_plus": 1.4})
    assert main(["--config", _write(tmp_path, cfg), "-q"]) == 0
    m = _manifest(tmp_path / "out")["metrics"]
    assert m["max_schmidt_error"] < 1e-4
    rows = (tmp_path / "out" / "schmidt.csv").read_text().splitlines()
    assert rows[0] == "index,input,reconstructed" and len(rows) == 17


def test_manifest_replays_run(tmp_path):
    save_state(gaussian_pulse(TemporalGrid(64, 0.3), 0.3, 1.0, chirp=-0.1), tmp_path / "s.json")
    cfg = _cfg(tmp_path, mode="reconstruct-kirkwood", state={"family": "file", "path": "s.json"})
    assert main(["--config", _write(tmp_path, cfg), "-q"]) == 0
    first = _manifest(tmp_path / "out")
    assert first["config"]["state"]["family"] == "inline"
    (tmp_path / "s.json").unlink()        # the manifest alone must suffice
    replay = tmp_path / "replay"
    assert main(["--config", str(tmp_path / "out" / "manifest.json"), "--out", str(replay),
                 "-q"]) == 0
    second = _manifest(replay)
    assert second["metrics"] == first["metrics"]
    assert load_state(replay / "density.json").rho.tolist() == \
        load_state(tmp_path / "out" / "density.json").rho.tolist()


def test_config_errors_name_the_key(tmp_path, capsys):
    cfg = _cfg(tmp_path)
    cfg["grid"]["bogus"] = 1
    cfg["settings"]["thetas"] = [2.0]
    cfg["state"]["width"] = -1
    assert main(["--config", _write(tmp_path, cfg)]) == 2
    err = capsys.readouterr().err
    assert "'grid'" in err and "bogus" in err
    assert "settings.thetas[0]" in err
    assert "state.width" in err


def test_config_syntax_error_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema_version": 1,\n  "mode": "forward",,\n}')
    assert main(["--config", str(p)]) == 2
    assert "bad.json:3:" in capsys.readouterr().err


def test_unknown_family_and_version(tmp_path):
    with pytest.raises(ConfigError, match="state.family"):
        config_from_dict(_cfg(tmp_path, state={"family": "square", "width": 1}))
    with pytest.raises(ConfigError, match="schema_version"):
        config_from_dict(_cfg(tmp_path, schema_version=2))
    with pytest.raises(ConfigError, match="not both"):
        config_from_dict(_cfg(tmp_path, settings={"n_phi": 4, "phis": [0, 1, 2]}))


def test_numerical_error_exit_code(tmp_path, capsys):
    cfg = _cfg(tmp_path, state={"family": "gaussian", "width": 2.5})
    assert main(["--config", _write(tmp_path, cfg)]) == 3
    assert "weaktime.errors.AliasingError" in capsys.readouterr().err


def test_precondition_error_exit_code(tmp_path, capsys):
    cfg = _cfg(tmp_path, mode="reconstruct-kirkwood", settings={"n_phi": 2})
    assert main(["--config", _write(tmp_path, cfg)]) == 3
    assert "InsufficientFringeError" in capsys.readouterr().err


def test_thread_resolution(monkeypatch):
    monkeypatch.setenv("WEAKTIME_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    assert resolve_threads(0) >= 1
    monkeypatch.setenv("WEAKTIME_THREADS", "x")
    with pytest.raises(ConfigError):
        resolve_threads(None)


def test_load_config_relative_paths(tmp_path):
    save_state(gaussian_pulse(TemporalGrid(64, 0.3), 0.0, 1.0), tmp_path / "s.json")
    cfg = load_config(_write(tmp_path, _cfg(tmp_path, state={"family": "file",
                                                             "path": "s.json"})))
    assert cfg.build_state().grid == TemporalGrid(64, 0.3)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "weaktime", "--config",
                        _write(tmp_path, _cfg(tmp_path)), "--quiet"], capture_output=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "weaktime", "--config",
                        str(tmp_path / "missing.json")], capture_output=True, text=True)
    assert r.returncode == 2 and "cannot read" in r.stderr
