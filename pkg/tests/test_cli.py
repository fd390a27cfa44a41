import csv
import hashlib
import os
import stat
import sys

import pytest

from gossipdual import artifacts
from gossipdual.cli import child_seed, main
from gossipdual.config import load_config

SMALL = """
[grid]
width = 6
height = 6
slip_prob = 0.1

[agents]
count = 3
starts = [[0, 0], [3, 3], [5, 5]]

[[zones]]
id = 1
rect = [0, 0, 1, 1]
c = 0.3

[[zones]]
id = 2
rect = [4, 4, 5, 5]
c = 0.3

[graph]
kind = "path"

[dual]
eta = 0.1
t_zero = 10
rollouts = 30

[run]
seed = 7
"""

DISCONNECTED = SMALL.replace('kind = "path"', 'kind = "edges"\nedges = [[0, 1], [1, 2]]').replace(
    "count = 3\nstarts = [[0, 0], [3, 3], [5, 5]]", "count = 4\nstarts = [[0, 0], [3, 3], [5, 5], [2, 2]]")


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_check_ok(cfg, capsys):
    assert main(["check", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "delta_c:" in out and "condition met:   yes" in out


def test_check_desk_config(capsys):
    assert main(["check", "configs/monitoring.toml"]) == 0
    out = capsys.readouterr().out
    assert "delta_c:         0.275" in out
    assert "condition lhs:   0.029" in out


def test_threshold_at_least_one_rejected(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL.replace("c = 0.3", "c = 1.2", 1))
    assert main(["check", str(path)]) == 2
    err = capsys.readouterr().err
    assert "zones[0].c" in err and "threshold must be < 1" in err


def test_disconnected_graph_rejected(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(DISCONNECTED)
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "graph not connected: no path 0↔3" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("edit, fragment", [
    (("[run]", "[runs]"), "unknown section [runs]"),
    (("eta = 0.1", "eta = 0.1\netaa = 1.0"), "dual.etaa: unknown key"),
    (("eta = 0.1", "eta = -0.1"), "dual.eta"),
    (("t_zero = 10", "t_zero = 1"), "t_zero >= d"),
    (("width = 6", 'width = "six"'), "grid.width: expected int"),
    (("[[zones]]\nid = 1", "[[zones]]\nid = 3"), "zone ids"),
])
def test_config_errors_exit_2(tmp_path, capsys, edit, fragment):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL.replace(*edit, 1))
    assert main(["check", str(path)]) == 2
    assert fragment in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert main(["check", str(tmp_path / "nope.toml")]) == 2


def test_run_writes_artifacts(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    assert "feasible:" in capsys.readouterr().out
    for name in (artifacts.TRAJECTORY, artifacts.MULTIPLIERS, artifacts.DIAGNOSTICS, artifacts.RUNNING_AVERAGES,
                 artifacts.LAMBDA_SERIES, artifacts.MISMATCH, artifacts.CONFIG_ECHO):
        assert (out / name).exists(), name
    assert not (out / artifacts.MESSAGES).exists()
    with open(out / artifacts.TRAJECTORY) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "agent_id", "x", "y", "action", "r_1", "r_2"]
    assert len(rows) == 1 + 300 * 3
    assert rows[1][:4] == ["0", "0", "0", "0"]
    with open(out / artifacts.MULTIPLIERS) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == artifacts.MULTIPLIER_HEADER
    assert len(rows) == 1 + 30 * 3 * 2
    assert rows[1][3] == "0.0" and rows[1][5] == ""


def test_run_is_reproducible(cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert main(["run", str(cfg), "--out", str(b)]) == 0
    for name in (artifacts.TRAJECTORY, artifacts.MULTIPLIERS, artifacts.DIAGNOSTICS):
        assert sha(a / name) == sha(b / name), name


def test_config_echo_reproduces_run(cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    echo = a / artifacts.CONFIG_ECHO
    config, doc = load_config(echo)
    assert config.d == 2 and config.seed == 7 and doc["links"]["kind"] == "static"
    assert main(["run", str(echo), "--out", str(b)]) == 0
    assert sha(a / artifacts.TRAJECTORY) == sha(b / artifacts.TRAJECTORY)
    assert sha(a / artifacts.MULTIPLIERS) == sha(b / artifacts.MULTIPLIERS)


def test_trace_messages(cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--trace-messages"]) == 0
    lines = (out / artifacts.MESSAGES).read_text().splitlines()
    assert len(lines) == 301 * 3
    time, sender, payload = lines[0].split()
    assert (time, sender) == ("0", "0")
    bytes.fromhex(payload)


def test_sweep_t_zero(cfg, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", str(cfg), "--param", "t_zero", "--values", "10,20,50", "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["10", "20", "50"]
    assert list(rows[0]) == ["param", "value", "seed", "gap_1", "gap_2", "max_gap", "mismatch_max",
                             "abs_mismatch_max", "mismatch_bound", "deadline_violations", "feasible"]
    for r in rows:
        assert float(r["abs_mismatch_max"]) <= float(r["mismatch_bound"]) + 1e-12
        assert float(r["mismatch_bound"]) == pytest.approx(0.1 * 2 / float(r["value"]))
        assert r["deadline_violations"] == "0"
        assert int(r["seed"]) == child_seed(7, float(r["value"]))
        assert (out / f"t_zero={r['value']}" / artifacts.TRAJECTORY).exists()


def test_singleton_sweep_matches_run(cfg, tmp_path):
    sweep_out = tmp_path / "sweep"
    assert main(["sweep", str(cfg), "--param", "eta", "--values", "0.2", "--out", str(sweep_out)]) == 0
    child = sweep_out / "eta=0.2"
    rerun = tmp_path / "rerun"
    assert main(["run", str(child / artifacts.CONFIG_ECHO), "--out", str(rerun)]) == 0
    for name in (artifacts.TRAJECTORY, artifacts.MULTIPLIERS):
        assert sha(child / name) == sha(rerun / name)


def test_sweep_parallel_matches_serial(cfg, tmp_path):
    args = ["sweep", str(cfg), "--param", "p_up", "--values", "0.5,1.0"]
    assert main(args + ["--out", str(tmp_path / "s")]) == 0
    assert main(args + ["--out", str(tmp_path / "p"), "--jobs", "2"]) == 0
    assert sha(tmp_path / "s" / "sweep.csv") == sha(tmp_path / "p" / "sweep.csv")


def test_sweep_bad_key(cfg, tmp_path, capsys):
    assert main(["sweep", str(cfg), "--param", "gamma", "--values", "1", "--out", str(tmp_path)]) == 2
    assert "cannot sweep 'gamma'" in capsys.readouterr().err


def test_sweep_bad_values(cfg, tmp_path):
    assert main(["sweep", str(cfg), "--param", "eta", "--values", "a,b", "--out", str(tmp_path)]) == 2
    assert main(["sweep", str(cfg), "--param", "t_zero", "--values", "1", "--out", str(tmp_path)]) == 2


@pytest.mark.skipif(sys.platform == "win32" or os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_output_permissions(cfg, tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(stat.S_IRUSR | stat.S_IXUSR)
    assert main(["run", str(cfg), "--out", str(locked / "out")]) == 2


def test_output_path_is_a_file(cfg, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", str(cfg), "--out", str(blocker / "out")]) == 2
    assert "cannot write artifacts" in capsys.readouterr().err
    assert main(["sweep", str(cfg), "--param", "eta", "--values", "0.1", "--out", str(blocker)]) == 2
