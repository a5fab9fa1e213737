import json
import subprocess
import sys

import pytest

from qpj.cli import EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, main
from qpj.config import default_config_text


def _cfg(tmp_path, old=None, new=None):
    text = default_config_text()
    if old is not None:
        assert old in text
        text = text.replace(old, new)
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def _error_payload(capsys, out):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert payload["status"] == "error"
    assert json.loads((out / "error.json").read_text()) == payload
    return payload


def test_polarization_csv_is_deterministic(tmp_path):
    cfg = _cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["polarization", "--config", cfg, "--out", str(a), "--seed", "3"]) == EXIT_OK
    assert main(["polarization", "--config", cfg, "--out", str(b), "--seed", "3"]) == EXIT_OK
    text = (a / "polarization.csv").read_text()
    assert text == (b / "polarization.csv").read_text()
    head = [ln for ln in text.splitlines() if ln.startswith("#")]
    assert "# task polarization" in head and "# seed 3" in head
    assert any(ln.startswith("# config_hash ") for ln in head)


def test_spectrum_metadata(tmp_path):
    out = tmp_path / "s"
    assert main(["spectrum", "--out", str(out)]) == EXIT_OK
    lines = (out / "spectrum.csv").read_text().splitlines()
    meta = dict(ln[2:].split(" ", 1) for ln in lines if ln.startswith("#"))
    assert float(meta["linewidth_hz"]) > 0
    assert 4.5e9 < float(meta["stark_freq_hz"]) < 5.5e9
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header == "omega,im_gr,re_gr,abs_s21"


def test_validation_error_exit_code(tmp_path, capsys):
    out = tmp_path / "bad"
    cfg = _cfg(tmp_path, "capacitance_ff = 637", "capacitance_ff = -1")
    assert main(["admittance", "--config", cfg, "--out", str(out)]) == EXIT_VALIDATION
    payload = _error_payload(capsys, out)
    assert payload["exit_code"] == EXIT_VALIDATION and payload["error"] == "ValidationError"
    assert any("capacitance_ff" in p for p in payload["problems"])


def test_unreadable_config(tmp_path, capsys):
    out = tmp_path / "o"
    out.mkdir()
    assert main(["admittance", "--config", str(tmp_path / "nope.ini"), "--out", str(out)]) == EXIT_VALIDATION
    assert _error_payload(capsys, out)["error"] == "ConfigError"


def test_thread_count_from_environment(tmp_path, capsys, monkeypatch):
    out = tmp_path / "t"
    out.mkdir()
    monkeypatch.setenv("QPJ_THREADS", "many")
    assert main(["admittance", "--out", str(out)]) == EXIT_VALIDATION
    assert "QPJ_THREADS" in _error_payload(capsys, out)["message"]
    monkeypatch.setenv("QPJ_THREADS", "0")
    assert main(["admittance", "--out", str(out)]) == EXIT_VALIDATION


def test_numeric_failure_exit_code(tmp_path, capsys):
    out = tmp_path / "mc"
    cfg = _cfg(tmp_path, "seed = 0", "seed = 0\nmc_dt = 5")
    assert main(["montecarlo", "--config", cfg, "--out", str(out)]) == EXIT_NUMERIC
    payload = _error_payload(capsys, out)
    assert payload["error"] in ("UnstableStep", "KernelNotCausal")
    assert payload["exit_code"] == EXIT_NUMERIC


def test_console_script_usage_error(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qpj.cli", "nonsense", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_VALIDATION
    assert json.loads(proc.stderr)["error"] == "ValidationError"


@pytest.mark.slow
def test_polarization_cases_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["polarization-cases", "--out", str(a)]) == EXIT_OK
    assert main(["polarization-cases", "--out", str(b)]) == EXIT_OK
    assert (a / "polarization_cases.csv").read_bytes() == (b / "polarization_cases.csv").read_bytes()
