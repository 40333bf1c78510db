import json
import math
import subprocess
import sys
from pathlib import Path

import pytest


def run_cli(*args: str) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "transport_spectra.cli", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


def run_pkg(*args: str) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "transport_spectra", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


CONST_PHI = {"space": {"kind": "constant", "value": 1.0},
             "velocity": {"kind": "constant", "value": 1.0}}

BAND_PHI = {"space": {"kind": "constant", "value": 1.0},
            "velocity": {"kind": "speed_bump", "a": 1.0, "b": 2.0}}


def interval_config(**extra):
    cfg = {
        "domain": {"kind": "interval", "a": -1.0, "b": 1.0},
        "sigma": {"kind": "constant", "value": 1.0},
        "gamma": 0.5,
        "space": {"n_cells": 12},
        "velocity": {"a": 1.0, "b": 2.0, "n_speeds": 3, "n_angles": 1},
        "evolve": {"t": 0.5, "phi": CONST_PHI},
    }
    cfg.update(extra)
    return cfg


def disk_config(**extra):
    cfg = {
        "domain": {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0},
        "sigma": {"kind": "constant", "value": 1.0},
        "gamma": 0.5,
        "kernel": {
            "a": 1.0, "b": 2.0,
            "terms": [{
                "alpha": {"kind": "bump", "center": [0.0, 0.0],
                          "radius": 0.8, "amplitude": 0.1},
                "beta": {"kind": "speed_bump", "a": 1.0, "b": 2.0},
                "theta": {"kind": "speed_bump", "a": 1.0, "b": 2.0},
            }],
        },
        "space": {"n_radial": 6, "n_angular": 8},
        "velocity": {"a": 1.0, "b": 2.0, "n_speeds": 2, "n_angles": 4},
        "scan": {"n_radial": 6, "n_angular": 8, "a": 1.0, "b": 2.0,
                 "n_speeds": 2, "n_angles": 4, "k_max": 1},
    }
    cfg.update(extra)
    return cfg


def write_config(tmp_path: Path, cfg: dict, name: str = "config.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_help():
    cp = run_cli("--help")
    assert cp.returncode == 0, cp.stderr
    assert "bounce-back transport" in cp.stdout


def test_pkg_main_help():
    cp = run_pkg("--help")
    assert cp.returncode == 0, cp.stderr
    assert "bounce-back transport" in cp.stdout


def test_selftest_passes():
    cp = run_cli("selftest")
    assert cp.returncode == 0, cp.stderr
    assert "selftest: done" in cp.stdout
    assert "ok -" in cp.stdout
    assert "FAIL" not in cp.stdout


def test_evolve_outputs(tmp_path: Path):
    config = write_config(tmp_path, interval_config())
    out = tmp_path / "out"
    cp = run_cli("evolve", "--config", config, "--out", str(out))
    assert cp.returncode == 0, cp.stderr

    lines = (out / "evolve.csv").read_text().splitlines()
    assert lines[0] == "# schema: transport-spectra phase-function v1"
    assert lines[1] == "x0,v0,re,im,weight"
    # 12 cells x 6 velocity nodes, plus the two header lines
    assert len(lines) == 2 + 12 * 6

    run = json.loads((out / "run.json").read_text())
    assert run["command"] == "evolve"
    assert run["outputs"] == ["evolve.csv"]
    assert run["seed"] == 0 and run["threads"] == 1
    assert 0.0 < run["norm_final"] < run["norm_initial"]
    assert list(run) == sorted(run)


def test_spectrum_hits_the_diametral_chord(tmp_path: Path):
    config = write_config(tmp_path, disk_config())
    out = tmp_path / "out"
    cp = run_cli("spectrum", "--config", config, "--out", str(out))
    assert cp.returncode == 0, cp.stderr

    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "# schema: transport-spectra spectrum v1"
    assert lines[1].startswith("re,im,k,tau,theta")
    # first phase node is radially aligned at the slowest speed, so the
    # first sample sits on the full-diameter chord
    first = lines[2].split(",")
    assert first[0] == "-1.346573590280e+00"
    assert first[2] == "-1"

    run = json.loads((out / "run.json").read_text())
    assert run["spectral_bound"] == pytest.approx(math.log(0.5) / 2.0 - 1.0,
                                                  rel=1e-12)


def test_outputs_are_byte_deterministic(tmp_path: Path):
    config = write_config(tmp_path, disk_config())
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        cp = run_cli("spectrum", "--config", config, "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        outs.append(out)
    first, second = outs
    assert (first / "spectrum.csv").read_bytes() == (second / "spectrum.csv").read_bytes()
    assert (first / "run.json").read_bytes() == (second / "run.json").read_bytes()


def test_dyson_outputs_and_determinism(tmp_path: Path):
    cfg = interval_config(
        kernel={
            "a": 1.0, "b": 2.0,
            "terms": [{
                "alpha": {"kind": "constant", "value": 0.2},
                "beta": {"kind": "speed_bump", "a": 1.0, "b": 2.0},
                "theta": {"kind": "speed_bump", "a": 1.0, "b": 2.0},
            }],
        },
        dyson={"t": 0.5, "j_max": 2, "nodes_per_unit": 8, "phi": BAND_PHI},
    )
    config = write_config(tmp_path, cfg)
    csvs = []
    for name in ("one", "two"):
        out = tmp_path / name
        cp = run_cli("dyson", "--config", config, "--out", str(out))
        assert cp.returncode == 0, cp.stderr
        csvs.append((out / "dyson.csv").read_bytes())
        run = json.loads((out / "run.json").read_text())
        assert run["command"] == "dyson"
        assert run["j_max"] == 2
        assert len(run["term_norms"]) == 3
        assert run["residual"] < 1e-3
    assert csvs[0] == csvs[1]


def test_resolvent_verify_outputs(tmp_path: Path):
    cfg = disk_config(
        resolvent={
            "lambdas": [[0.3, 0.7], [1.0, 0.0]],
            "phi": CONST_PHI,
            "n_points": 3,
            "n_boundary": 12,
            "n_offsets": 3,
            "n_speeds": 2,
            "speed_range": [1.0, 2.0],
        }
    )
    config = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    cp = run_cli("resolvent-verify", "--config", config, "--out", str(out))
    assert cp.returncode == 0, cp.stderr

    lines = (out / "resolvent.csv").read_text().splitlines()
    assert lines[0] == "# schema: transport-spectra resolvent-verify v1"
    assert lines[1] == "lam_re,lam_im,identity,residual"
    assert len(lines) == 2 + 4  # two lambdas, two identities each

    run = json.loads((out / "run.json").read_text())
    assert run["worst_laplace"] < 1e-4
    assert run["worst_boundary"] < 1e-8


def test_rl_scan_outputs(tmp_path: Path):
    cfg = disk_config(
        rl={"alpha": 0.0, "betas": [0.0, 30.0], "n": 0,
            "n_radial": 10, "n_angular": 10},
    )
    config = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    cp = run_cli("rl-scan", "--config", config, "--out", str(out))
    assert cp.returncode == 0, cp.stderr

    lines = (out / "rl_scan.csv").read_text().splitlines()
    assert lines[0] == "# schema: transport-spectra rl-scan v1"
    assert lines[1] == "beta,estimate,envelope,bound"
    assert len(lines) == 2 + 2

    run = json.loads((out / "run.json").read_text())
    assert 0.0 < run["ratio"] < 1.0
    assert run["outputs"] == ["rl_scan.csv"]


def test_missing_config_or_out_is_a_usage_error(tmp_path: Path):
    cp = run_cli("evolve", "--out", str(tmp_path / "x"))
    assert cp.returncode == 2
    assert "config" in cp.stderr

    config = write_config(tmp_path, interval_config())
    cp = run_cli("evolve", "--config", config)
    assert cp.returncode == 2
    assert "--out" in cp.stderr


def test_bad_gamma_is_a_config_error(tmp_path: Path):
    config = write_config(tmp_path, interval_config(gamma=1.5))
    cp = run_cli("evolve", "--config", config, "--out", str(tmp_path / "out"))
    assert cp.returncode == 2
    assert "gamma" in cp.stderr


def test_unknown_domain_kind_is_a_config_error(tmp_path: Path):
    cfg = interval_config(domain={"kind": "triangle", "a": 0.0, "b": 1.0})
    config = write_config(tmp_path, cfg)
    cp = run_cli("evolve", "--config", config, "--out", str(tmp_path / "out"))
    assert cp.returncode == 2
    assert "triangle" in cp.stderr


def test_unknown_field_is_a_config_error(tmp_path: Path):
    cfg = disk_config()
    cfg["scan"]["k_maxx"] = 3
    config = write_config(tmp_path, cfg)
    cp = run_cli("spectrum", "--config", config, "--out", str(tmp_path / "out"))
    assert cp.returncode == 2
    assert "k_maxx" in cp.stderr


def test_malformed_json_is_a_config_error(tmp_path: Path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    cp = run_cli("evolve", "--config", str(path), "--out", str(tmp_path / "out"))
    assert cp.returncode == 2
    assert "JSON" in cp.stderr


def test_missing_file_is_a_config_error(tmp_path: Path):
    cp = run_cli("evolve", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "out"))
    assert cp.returncode == 2


def test_thread_count_validation():
    cp = run_cli("selftest", "--threads", "0")
    assert cp.returncode == 2
    assert "threads" in cp.stderr


def test_oversized_series_request_is_a_resource_error(tmp_path: Path):
    cfg = disk_config(
        space={"n_radial": 64, "n_angular": 64},
        velocity={"a": 1.0, "b": 2.0, "n_speeds": 8, "n_angles": 16},
        dyson={"t": 1.0, "j_max": 3, "nodes_per_unit": 256, "phi": BAND_PHI},
    )
    config = write_config(tmp_path, cfg)
    cp = run_cli("dyson", "--config", config, "--out", str(tmp_path / "out"))
    assert cp.returncode == 3
    assert "resource limit" in cp.stderr
