import json
import subprocess
import sys

import pytest

from aoimec.cli import main
from aoimec.config import desk_config, dumps


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(dumps(desk_config()))
    return path


def test_simulate(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_file), "--scheme", "greedy", "--epochs", "50",
                 "--seed", "2", "--out", str(out)]) == 0
    assert "greedy: 50 epochs" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 2 and summary["epochs"] == 50


def test_experiment(tmp_path):
    assert main(["experiment", "--kind", "channels", "--out", str(tmp_path), "--grid", "1,2",
                 "--schemes", "local,server", "--epochs", "20"]) == 0
    assert len((tmp_path / "channels.csv").read_text().splitlines()) == 5


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("num_mus = 3\nnot a line\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["simulate", "--epochs", "0", "--out", str(tmp_path)]) == 2
    assert main(["experiment", "--kind", "lambda", "--grid", "2.0", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scheme", "psychic", "--out", str(tmp_path)])
    assert exc.value.code != 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "aoimec", "simulate", "--scheme", "local",
                           "--epochs", "5", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "metrics.csv").exists()


@pytest.mark.slow
def test_oracle_check(capsys):
    assert main(["oracle-check", "--steps", "200000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all(line.startswith("PASS") for line in lines)
