import subprocess
import sys

import pytest

from tfpack.expcli.cli import EXIT_CONFIG, main

CFG = """
system = "NyquistWDM"
modulation = "QPSK"
n_carriers = 1
bit_rate = 140e9
pulse.kind = "RRC"
F = 1.25
B = 3.0
B_R = 3.0
L_r = 1
link.preset = "uniform100"
link.n_spans = 1
link.gamma = 0.0
power.dbm = [-20.0]
sequence.n_symbols = 20000
sequence.training_symbols = 5000
sequence.block_symbols = 5000
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(CFG)
    return p


def test_run_writes_files_and_nothing_to_stdout(cfg_path, tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "tfpack", "run", str(cfg_path), "--profile", "desk",
                           "--out", str(out), "--seed", "5"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == ""
    assert "operating points" in proc.stderr
    assert (out / "results.csv").exists() and (out / "manifest.json").exists()
    assert '"seed": 5' in (out / "manifest.json").read_text()


def test_rerun_results_byte_identical(cfg_path, tmp_path):
    for d in ("a", "b"):
        assert main(["-q", "run", str(cfg_path), "--profile", "desk", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_override_and_bad_config(cfg_path, tmp_path, caplog):
    assert main(["run", str(cfg_path), "--override", "F=0.8", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "F >= 1/T" in caplog.text
    assert main(["run", str(tmp_path / "missing.toml")]) == EXIT_CONFIG


def test_all_points_failing_is_fatal(cfg_path, tmp_path):
    rc = main(["-q", "run", str(cfg_path), "--profile", "desk", "--out", str(tmp_path),
               "--override", "coded.enabled=true", "--override", f"coded.alist={tmp_path / 'x.alist'}"])
    assert rc != 0
    assert (tmp_path / "results.csv").exists()


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    assert "tfp_qpsk" in capsys.readouterr().out
