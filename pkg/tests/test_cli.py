import csv
import json
import os
import subprocess
import sys

import pytest

from gigaqbx.cli import build_parser, run


def files(d):
    return sorted(f for f in os.listdir(d) if f != "manifest.json")


def test_no_args_is_usage_error(capsys):
    assert run([]) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["green-test", "--bogus"], ["translation-test"],
                                  ["translation-test", "--kind", "m2m"], ["nope"],
                                  ["fmm-eval", "--pfmm", "ten"]])
def test_bad_flags_are_usage_errors(argv, tmp_path):
    assert run(argv + ["--out", str(tmp_path)] if argv[0] != "nope" else argv) == 2


def test_bad_geometry_is_usage_error(tmp_path):
    assert run(["gen-mesh", "--geometry", "cube:1", "--out", str(tmp_path)]) == 2


def test_all_subcommands_registered():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == {"gen-mesh", "refine", "associate", "fmm-eval", "direct-eval",
                                "green-test", "translation-test", "scaling", "cost-compare"}


def test_gen_mesh_and_refine(tmp_path, capsys):
    out = str(tmp_path)
    assert run(["gen-mesh", "--geometry", "sphere:1", "--out", out]) == 0
    assert {"mesh.gqbx", "elements.csv"} <= set(files(out))
    assert run(["refine", "--mesh", os.path.join(out, "mesh.gqbx"), "--out", out]) == 0
    rep = json.load(open(os.path.join(out, "report.json")))
    assert rep
    assert capsys.readouterr().out.strip().splitlines()[-1].startswith("refine")


def test_associate(tmp_path):
    assert run(["associate", "--geometry", "sphere:1", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "association.csv")))
    assert len(rows) > 1


def test_green_test(tmp_path, capsys):
    out = str(tmp_path)
    code = run(["green-test", "--geometry", "sphere:1", "--pqbx", "5", "--pfmm", "10", "--out", out])
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("green-test:") and "residual" in line
    rows = list(csv.DictReader(open(tmp_path / "green.csv")))
    assert rows
    man = json.load(open(tmp_path / "manifest.json"))
    assert man["command"] == "green-test" and man["exit_code"] == 0
    assert man["config"]["pfmm"] == 10 and man["config"]["tcf"] == 0.9
    assert man["deterministic"] is True


def test_translation_test(tmp_path):
    assert run(["translation-test", "--kind", "m2p", "--out", str(tmp_path)]) == 0
    man = json.load(open(tmp_path / "manifest.json"))
    assert man["results"]["C"] <= 1.01


def test_scaling_and_cost_compare(tmp_path):
    out = str(tmp_path)
    code = run(["scaling", "--geometries", "sphere:0,sphere:1", "--quad-order", "11",
                "--nmax-values", "512", "--out", out])
    assert code in (0, 1)
    assert json.load(open(tmp_path / "manifest.json"))["exit_code"] == code
    rows = list(csv.DictReader(open(tmp_path / "scaling.csv")))
    assert len(rows) == 4
    assert run(["cost-compare", "--geometry", "sphere:1", "--out", out]) == 0
    assert json.load(open(tmp_path / "cost_compare.json"))


@pytest.mark.parametrize("command", ["fmm-eval", "direct-eval"])
def test_manifest_replay_is_byte_identical(tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([command, "--geometry", "sphere:1", "--out", str(a)]) == 0
    argv = json.load(open(a / "manifest.json"))["argv"]
    argv[argv.index("--out") + 1] = str(b)
    assert run(argv) == 0
    assert files(a) == files(b) and files(a)
    for f in files(a):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gigaqbx"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
