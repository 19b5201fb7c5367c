import json
import math
import os
import subprocess
import sys

import pytest

from sparse_ergodic.cli import main

SMOKE = [
    ["blocks", "plan", "--K", "5"],
    ["blocks", "tempelman", "--K", "5"],
    ["blocks", "diverge", "--kmax", "3"],
    ["blocks", "count-en", "--n", "100"],
    ["random", "speckled", "sample", "--j", "3"],
    ["random", "speckled", "profile", "--jmin", "2", "--jmax", "4"],
    ["random", "speckled", "sweep", "--jmin", "1", "--jmax", "2"],
    ["random", "speckled", "enumerate", "--count", "20"],
    ["random", "plaid", "sample", "--j", "2"],
    ["random", "plaid", "profile", "--jmin", "1", "--jmax", "3"],
    ["arith", "schedule", "--count", "5"],
    ["arith", "build", "--count", "3", "--k", "2"],
    ["arith", "weil", "--p", "11", "--m", "3"],
    ["arith", "psi", "--pmin", "11", "--pmax", "31"],
    ["arith", "transfer", "--p", "7", "--q", "1", "--d", "2", "--n-freq", "10"],
    ["arith", "osc", "--d", "1", "--q", "2", "--count", "4", "--grid", "32"],
    ["arith", "product", "--primes", "5,7", "--m", "2"],
    ["group", "ball", "--group", "z2", "--N", "6"],
    ["group", "blocks", "--group", "z1", "--K", "3"],
    ["group", "random", "--group", "heis3", "--j", "2"],
    ["group", "ttstar", "--group", "z2", "--j", "2", "--M", "1"],
    ["group", "gaps", "--source", "cantor", "--count", "255"],
    ["group", "banach", "--N-list", "8,16"],
    ["dyn", "run", "--sequence", "lattice", "--Nmax", "2000"],
    ["dyn", "maximal", "--radii", "0,1,2"],
    ["dyn", "transfer", "--L", "48", "--K", "8"],
]


@pytest.mark.parametrize("argv", SMOKE, ids=[" ".join(a[:3]) for a in SMOKE])
def test_every_leaf_runs(argv, capsys):
    code = main(argv + ["--format", "json"])
    out = capsys.readouterr().out
    assert code in (0, 1), out
    doc = json.loads(out)
    assert doc["op"] == argv[: len(doc["op"])]
    assert isinstance(doc["rows"], list)


def test_weil_example(capsys):
    assert main(["arith", "weil", "--p", "7", "--m", "2", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"]
    assert doc["summary"]["max"] == pytest.approx(7 ** -0.5, abs=1e-12)
    assert doc["summary"]["bound"] == pytest.approx(7 ** -0.5, abs=1e-12)


def test_count_example(capsys):
    assert main(["blocks", "count-en", "--n", "4"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1].split(",")[:2] == ["4", "8"]


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert main(["--config", str(empty)]) == 2
    assert main(["arith", "weil"]) == 2                 # missing --p
    assert main(["arith", "weil", "--p", "3", "--m", "3"]) == 2   # theorem hypothesis p > m
    assert main(["blocks", "count-en", "--n", "0"]) == 2
    capsys.readouterr()


def test_out_dir_and_reproducibility(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["random", "speckled", "profile", "--jmin", "2", "--jmax", "4", "--seed", "5"]
    assert main(argv + ["--out", str(a)]) in (0, 1)
    assert main(argv + ["--out", str(b)]) in (0, 1)
    for name in ("report.json", "series.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert man["seed"] == 5 and len(man["config_hash"]) == 64
    assert {"numpy", "scipy", "python"} <= set(man["versions"])
    capsys.readouterr()


def test_seed_precedence(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": ["random", "speckled", "sample"], "args": {"j": 2}, "seed": 3,
                               "format": "json"}))

    def seed_of(*extra):
        assert main(["--config", str(cfg), *extra]) in (0, 1)
        return json.loads(capsys.readouterr().out)["seed"]

    monkeypatch.delenv("SPARSE_ERGODIC_SEED", raising=False)
    assert seed_of() == 3
    monkeypatch.setenv("SPARSE_ERGODIC_SEED", "11")
    assert seed_of() == 11
    assert seed_of("--seed", "2") == 2


def test_config_run_writes_manifest(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    out = tmp_path / "o"
    cfg.write_text(json.dumps({"command": ["arith", "weil"], "args": {"p": 13, "m": 3}, "out": str(out)}))
    assert main(["--config", str(cfg)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["command"] == ["arith", "weil"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["summary"]["max"] <= 2 / math.sqrt(13)
    capsys.readouterr()


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": ["arith", "weil"], "colour": "red"}))
    assert main(["--config", str(cfg)]) == 2
    capsys.readouterr()


def test_module_entry_point():
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "sparse_ergodic", "blocks", "count-en", "--n", "4"],
                       capture_output=True, text=True, env=env, timeout=120)
    assert r.returncode == 0 and ",8," in r.stdout


def test_acceptance_subset(capsys):
    assert main(["all-acceptance", "--ids", "2,12"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") >= 2
