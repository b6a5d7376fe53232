import csv
import json

import pytest

from specproj.cli import main

SMALL = {
    "project": "[model]\nname = \"h5\"\n",
    "born": "[model]\nname = \"h5\"\n[born]\nruns = 30\n",
    "anneal": "[anneal]\nmodel = \"xzy\"\nnq = 4\ndg = 0.25\nsteps_per_g = 20\nreplicas = 3\n",
    "noise": "[model]\nname = \"tfi\"\nnq = 3\n[criteria]\nmax_steps = 40\n[noise]\nepsilon = 0.01\nperiod = 10\n",
    "imagtime": "[model]\nname = \"random\"\ndim = 4\n[imagtime]\ntrials = 500\nn_max = 10\n",
    "spectrum": "[model]\nname = \"random\"\ndim = 4\nseed = 2\n",
    "validate-trotter": "[trotter]\nformulas = [\"strang2\"]\nnq = 4\n",
}


def run(tmp_path, command, text, *extra):
    cfg = tmp_path / f"{command}.toml"
    cfg.write_text(text)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def snapshot(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_commands_succeed_and_rerun_byte_identically(tmp_path, command):
    (tmp_path / "a").mkdir()
    code, out = run(tmp_path / "a", command, SMALL[command], "--seed", "3")
    assert code == 0
    first = snapshot(out)
    assert first and not any(name.startswith(".") for name in first)
    (tmp_path / "b").mkdir()
    code, out2 = run(tmp_path / "b", command, SMALL[command], "--seed", "3")
    assert code == 0 and snapshot(out2) == first


@pytest.mark.parametrize("command", ["born", "anneal"])
def test_outputs_do_not_depend_on_workers(tmp_path, command):
    snaps = []
    for workers in ("1", "2"):
        (tmp_path / workers).mkdir()
        code, out = run(tmp_path / workers, command, SMALL[command], "--workers", workers)
        assert code == 0
        snaps.append(snapshot(out))
    assert snaps[0] == snaps[1]


def test_trace_columns_and_summary_key_order(tmp_path):
    code, out = run(tmp_path, "project", SMALL["project"])
    assert code == 0
    with open(out / "trace.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["step", "bit", "p0", "energy", "variance", "dt", "phi"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is True
    assert list(summary)[0] == "command"


def test_plots_are_deterministic(tmp_path):
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        code, _ = run(tmp_path / name, "project", SMALL["project"], "--plot")
        assert code == 0
    a, b = snapshot(tmp_path / "a" / "out"), snapshot(tmp_path / "b" / "out")
    assert "energy.svg" in a and a == b


def test_unconverged_run_exits_two(tmp_path):
    code, out = run(tmp_path, "project", SMALL["project"] + "[criteria]\nmax_steps = 2\n[schedule]\nkind = \"I\"\ndt = 0.0001\n")
    assert code == 2
    assert json.loads((out / "summary.json").read_text())["converged"] is False


@pytest.mark.parametrize("text", [
    "[model]\nname = \"h5\"\ncolour = 1\n",
    "[schedule]\nkind = \"VII\"\n",
    "[model]\nname = \"h5\"\n[noise]\nepsilon = 0.1\n",
    "[run]\nworkers = 0\n",
])
def test_config_errors_exit_one_without_outputs(tmp_path, text, capsys):
    command = "noise" if "noise" in text else "project"
    code, out = run(tmp_path, command, text)
    assert code == 1
    assert not out.exists() or not any(out.iterdir())
    assert "error" in capsys.readouterr().err


def test_missing_config_file_exits_one(tmp_path):
    assert main(["project", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 1
