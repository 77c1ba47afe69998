import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from semispec import __version__
from semispec.cli import main
from semispec.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(cmd, cfg, out, *extra):
    args = [cmd, "--out", str(out)] + list(extra)
    if cfg is not None:
        args[1:1] = ["--config", str(cfg)]
    return main(args)


def write_cfg(tmp_path, text, name="run.cfg"):
    shutil.copytree(CONFIGS / "symbols", tmp_path / "symbols", dirs_exist_ok=True)
    p = tmp_path / name
    p.write_text(text)
    return p


def test_spectrum_harmonic(tmp_path):
    cfg = CONFIGS / "harmonic_spectrum.cfg"
    assert run("spectrum", cfg, tmp_path) == 0
    doc = json.loads((tmp_path / "match.json").read_text())
    assert doc["passed"] and doc["max_rel_error"] < 1e-12
    assert doc["version"] == __version__ and doc["config_hash"] == load_config(cfg).digest()
    for name in ("lattice.csv", "numerical.csv"):
        head = (tmp_path / name).read_text().splitlines()[0]
        assert head == f"# semispec {__version__} config_hash={doc['config_hash']} seed=0"


def test_spectrum_davies(tmp_path):
    assert run("spectrum", CONFIGS / "davies_spectrum.cfg", tmp_path) == 0
    doc = json.loads((tmp_path / "match.json").read_text())
    assert doc["max_rel_error"] < 1e-6 and len(doc["pairs"]) == 10


def test_spectrum_non_elliptic(tmp_path, capsys):
    assert run("spectrum", CONFIGS / "nonelliptic_spectrum.cfg", tmp_path) == 2
    assert "ellipticity check failed" in capsys.readouterr().err


def test_pseudospec_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, 'symbol = "symbols/davies.json"\nh = 0.1\nN = 32\n'
                              'grid = {"re": [-0.2, 0.6], "im": [-0.2, 0.6], "n": [5, 4]}\n')
    assert run("pseudospec", cfg, tmp_path / "a") == 0
    assert run("pseudospec", cfg, tmp_path / "b", "--threads", "3") == 0
    a = (tmp_path / "a" / "pseudospec.csv").read_bytes()
    assert a == (tmp_path / "b" / "pseudospec.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[1] == "re_z,im_z,resnorm,converged,N" and len(lines) == 2 + 20


def test_pseudospec_in_spectrum_row(tmp_path):
    cfg = write_cfg(tmp_path, 'symbol = "symbols/harmonic.json"\nh = 1.0\nN = 16\n'
                              'grid = {"re": [3, 3], "im": [0, 0], "n": [1, 1]}\n')
    assert run("pseudospec", cfg, tmp_path) == 0
    row = (tmp_path / "pseudospec.csv").read_text().splitlines()[-1]
    assert row.split(",")[2] == "inf"


def test_scaling_admissible_polynomial(tmp_path):
    assert run("scaling", CONFIGS / "davies_scaling_admissible.cfg", tmp_path) == 0
    doc = json.loads((tmp_path / "scaling.json").read_text())
    assert doc["verdict"] == "polynomial"
    assert doc["slope_fits"]["global"] <= 1 + 0.1 + 0.3
    assert {"h", "z", "resnorm", "N"} <= set(doc["records"][0])


def test_scaling_sqrt_superpolynomial(tmp_path):
    assert run("scaling", CONFIGS / "davies_scaling_sqrt.cfg", tmp_path) == 0
    doc = json.loads((tmp_path / "scaling.json").read_text())
    s = doc["slope_fits"]["windows"]
    assert doc["verdict"] == "superpolynomial" and s[0] < s[1] < s[2] and s[2] > 2


def test_scaling_empty_h_list(tmp_path):
    cfg = write_cfg(tmp_path, 'symbol = "symbols/davies.json"\nh_list = []\n')
    assert run("scaling", cfg, tmp_path) == 2


def test_admissible_report(tmp_path):
    assert run("admissible", CONFIGS / "davies_admissible.cfg", tmp_path) == 0
    doc = json.loads((tmp_path / "admissible.json").read_text())
    assert doc["config_hash"] and doc["version"] == __version__


def test_verify_rejects_gamma(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "gamma = 0.2\n")
    assert run("verify", cfg, tmp_path) == 2
    assert "gamma" in capsys.readouterr().err


def test_missing_symbol_file_is_io_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, 'symbol = "symbols/absent.json"\nh = 0.1\n')
    assert run("spectrum", cfg, tmp_path) == 2
    assert "I/O error" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main(["bogus"]) == 2
    assert main([]) == 2
    cfg = write_cfg(tmp_path, "mystery = 1\n")
    assert run("verify", cfg, tmp_path) == 2
    assert run("spectrum", None, tmp_path, "--threads", "0") == 2


def test_certify_and_verify_small(tmp_path):
    cfg = write_cfg(tmp_path, "det_trials = 20\nzero_trials = 20\n")
    assert run("certify", cfg, tmp_path) == 0
    assert run("verify", cfg, tmp_path) == 0
    doc = json.loads((tmp_path / "verify.json").read_text())
    names = {s["suite"] for s in doc["suites"]}
    assert {"symbol_core", "quantize", "resolvent_lab", "bounds_certify", "bargmann_side"} <= names
    assert doc["passed"]


def test_bargmann_verify(tmp_path):
    assert run("bargmann-verify", CONFIGS / "bargmann.cfg", tmp_path) == 0
    doc = json.loads((tmp_path / "bargmann.json").read_text())
    assert doc["passed"] and doc["fbi_constant"] == pytest.approx(0.2996557, abs=5e-8)


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "semispec.cli", "spectrum", "--config",
                          str(CONFIGS / "harmonic_spectrum.cfg"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "max rel error" in out.stdout
