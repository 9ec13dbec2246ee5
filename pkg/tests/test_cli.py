from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from conftest import REFERENCE_CFG
from sonicpatch.cli import main
from sonicpatch.config import load_config


def test_all_writes_every_artifact(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["all", "--config", REFERENCE_CFG, "--out", str(out), "--strict"]) == 0
    names = {"trace.csv", "mesh.csv", "field.csv", "diagnostics.json", "verify.json",
             "verify.csv", "manifest.txt", "timestamp.txt"}
    assert names <= set(os.listdir(out))
    doc = json.loads((out / "verify.json").read_text())
    assert doc["summary"]["all_converge"] and doc["summary"]["all_canaries_detected"]
    manifest = (out / "manifest.txt").read_text()
    assert f"config_hash = {load_config(REFERENCE_CFG).hash()}" in manifest
    for n in names - {"manifest.txt", "timestamp.txt"}:
        assert n in manifest
    printed = capsys.readouterr().out.split()
    assert len(printed) == 6


def test_malformed_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_plus = 16\nt0 = zero\n")
    assert main(["trace", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:2:" in err and "t0" in err


def test_bad_refine_exits_2(tmp_path):
    assert main(["trace", "--refine", "0", "--out", str(tmp_path)]) == 2


def test_solver_failure_exits_3_with_location(tmp_path, capsys):
    cfg = tmp_path / "tight.cfg"
    cfg.write_text("tol = 1e-300\nmax_iter = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "MeshError" in err and "(i=" in err and "j=" in err


def test_strict_thresholds(tmp_path, capsys):
    ok = tmp_path / "ok"
    assert main(["diagnose", "--config", REFERENCE_CFG, "--out", str(ok), "--strict"]) == 0
    cfg = tmp_path / "narrow.cfg"
    cfg.write_text("rate_lo = 1.2\nrate_hi = 1.3\n")
    # without --strict a violation is only recorded
    assert main(["diagnose", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["diagnose", "--config", str(cfg), "--out", str(tmp_path / "b"),
                 "--strict"]) == 4
    assert "rate_exponent" in capsys.readouterr().err
    doc = json.loads((tmp_path / "b" / "diagnostics.json").read_text())
    assert doc["checks"]["rate_exponent"]["pass"] is False


def test_runs_are_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["diagnose", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "manifest.txt").read_bytes()
    b = (tmp_path / "b" / "manifest.txt").read_bytes()
    assert a == b
    assert ((tmp_path / "a" / "diagnostics.json").read_bytes()
            == (tmp_path / "b" / "diagnostics.json").read_bytes())


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "sonicpatch.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("trace", "solve", "march", "diagnose", "verify", "all"):
        assert cmd in res.stdout


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["plot"])
    assert exc.value.code == 2
