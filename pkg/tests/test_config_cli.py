import numpy as np
import pytest

from asgsflow import cli
from asgsflow.config import DEFAULT_GRIDS, ConfigError, StudyConfig, default_dts, parse_config, read_config_file
from asgsflow.study import CSV_FIELDS

SMALL = ["--case", "I-a", "--grids", "3,6", "--T", "0.2"]


def test_defaults():
    cfg = parse_config()
    assert cfg.case == "I-a" and cfg.grids == DEFAULT_GRIDS
    np.testing.assert_allclose(cfg.dts, [0.1, 0.05, 0.025, 0.0125])
    assert cfg.theta == 1 and cfg.T == 1.0 and cfg.methods == ("galerkin", "asgs")
    assert cfg.stab.c1 == 4.0 and cfg.stab.subscale_mode == "dynamic" and cfg.stab.subscale_history == "tracked"
    assert cfg.solver.method == "direct" and not cfg.timing
    assert default_dts(2) == (0.1, 0.05)


def test_overrides_and_file(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text("# comment\ncase = II-b\nstab.c1 = 8\ngrids = 5,10\ntime.theta = 0\n")
    assert read_config_file(path)["stab.c1"] == "8"
    cfg = parse_config(path, {"stab.c1": "12", "methods": "asgs"})
    assert cfg.case == "II-b" and cfg.stab.c1 == 12.0 and cfg.theta == 0
    assert cfg.grids == (5, 10) and cfg.dts == (0.1, 0.05) and cfg.methods == ("asgs",)


@pytest.mark.parametrize("overrides", [
    {"grids": "10,20", "dts": "0.1"},
    {"grids": "10,30"},
    {"case": "III"},
    {"bogus.key": "1"},
    {"stab.c1": "abc"},
    {"stab.subscale_mode": "frozen"},
    {"time.theta": "0.5"},
    {"time.T": "0.25", "grids": "10", "dts": "0.1"},
    {"solver.method": "gmres"},
    {"jobs": "0"},
])
def test_invalid_configs(overrides):
    with pytest.raises(ConfigError):
        parse_config(None, overrides)


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("case I-a\n")
    with pytest.raises(ConfigError):
        parse_config(path)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.cfg")


def test_study_config_direct_construction():
    with pytest.raises(ConfigError, match="length mismatch"):
        StudyConfig(grids=(10, 20), dts=(0.1,))


def test_cli_converge_writes_deterministic_csv(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["converge", *SMALL, "--out", str(a)]) == 0
    assert cli.main(["converge", *SMALL, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 5
    assert "galerkin" in capsys.readouterr().out


def test_cli_converge_to_stdout_and_timing(capsys):
    assert cli.main(["converge", *SMALL, "--methods", "asgs", "--timing", "--estimate"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    for row in rows:
        fields = row.split(",")
        assert float(fields[-1]) > 0 and float(fields[-2]) > 0


def test_cli_run_and_compare(capsys):
    assert cli.main(["run", "--case", "II-a", "--n", "4", "--dt", "0.1", "--T", "0.2", "--estimate"]) == 0
    out = capsys.readouterr().out
    assert "total error" in out and "eta" in out
    assert cli.main(["compare", *SMALL, "--set", "stab.c2=3"]) == 0
    assert "asgs error" in capsys.readouterr().out


def test_cli_config_errors_exit_2(capsys):
    assert cli.main(["converge", "--grids", "10,20", "--dts", "0.1"]) == 2
    assert cli.main(["converge", "--set", "nonsense"]) == 2
    assert cli.main(["converge", "--set", "stab.c9=1"]) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        cli.main(["converge", "--no-such-flag"])
    assert info.value.code == 2


def test_cli_numerical_failure_exit_3(monkeypatch, capsys):
    def boom(config):
        raise FloatingPointError("non-finite state")

    monkeypatch.setattr(cli, "run_study", boom)
    assert cli.main(["converge", *SMALL]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_cli_selftest_exit_code(monkeypatch):
    from asgsflow import selftest
    from asgsflow.selftest import CheckResult

    monkeypatch.setattr(selftest, "run_all", lambda echo=print: [CheckResult("x", True, "")])
    assert cli.main(["selftest"]) == 0
    monkeypatch.setattr(selftest, "run_all", lambda echo=print: [CheckResult("x", False, "")])
    assert cli.main(["selftest"]) == 3


def test_console_script_exit_codes():
    import subprocess
    import sys

    ok = subprocess.run([sys.executable, "-m", "asgsflow", "converge", *SMALL, "--methods", "asgs"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and ok.stdout.startswith("case,method")
    bad = subprocess.run([sys.executable, "-m", "asgsflow", "converge", "--grids", "10,20", "--dts", "0.1"],
                         capture_output=True, text=True)
    assert bad.returncode == 2
