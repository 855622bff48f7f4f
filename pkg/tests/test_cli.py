import json
import subprocess
import sys

import pytest

from edtlogic.cli import main

FORMULAS = "(a & <P>[b])\n<G>=2[a]\n"
GRAPH = {"prefix": ["a", "a"], "suffix": ["b"]}


@pytest.fixture
def files(tmp_path):
    (tmp_path / "f.gptl").write_text(FORMULAS)
    (tmp_path / "g.json").write_text(json.dumps(GRAPH))
    return tmp_path


def cli(*args):
    return main([str(a) for a in args])


def test_eval_logic(files, capsys):
    assert cli("eval-logic", "--vocab", "a b", "--formula", files / "f.gptl", "--graph", files / "g.json",
               "--vertex", 4) == 0
    assert capsys.readouterr().out.strip() == "01"
    assert cli("eval-logic", "--vocab", "a b", "--formula", files / "f.gptl", "--graph", files / "g.json") == 0
    assert json.loads(capsys.readouterr().out) == {"3": "01", "4": "01"}


def test_compile_and_check_round_trip(files, capsys):
    t, a = files / "t.json", files / "a.json"
    assert cli("compile", "--vocab", "a b", "--from", "logic", "--to", "transformer",
               "--input", files / "f.gptl", "--output", t) == 0
    assert (files / "t.plan.json").exists()
    capsys.readouterr()
    assert cli("check-equiv", "--vocab", "a b", "--max-len", 5, "--a", files / "f.gptl", "--b", t) == 0
    assert json.loads(capsys.readouterr().out)["passed"]
    assert cli("compile", "--vocab", "a b", "--from", "transformer", "--to", "automaton",
               "--input", t, "--output", a) == 0
    capsys.readouterr()
    assert cli("check-equiv", "--vocab", "a b", "--max-len", 5, "--a", t, "--b", a,
               "--interpretation", "bitwise", "--report", files / "r.json") == 0
    assert capsys.readouterr().out.strip() == "PASS"
    assert cli("run-automaton", "--vocab", "a b", "--automaton", a, "--graph", files / "g.json",
               "--vertex", 4) == 0


def test_check_equiv_failure_exit_code(files, capsys):
    (files / "h.gptl").write_text("(a & <P>[b])\n<G>=1[a]\n")
    assert cli("check-equiv", "--vocab", "a b", "--max-len", 4, "--a", files / "f.gptl",
               "--b", files / "h.gptl", "--report", files / "r.json") == 1
    assert capsys.readouterr().out.startswith("FAIL")
    rep = json.loads((files / "r.json").read_text())
    assert rep["mismatches"][0]["graph"] == {"prefix": ["a"], "suffix": []}


def test_diagnostics_exit_two(files, capsys):
    (files / "bad.gptl").write_text("<G>=3[a]\n")
    assert cli("compile", "--vocab", "a b", "--from", "logic", "--to", "transformer",
               "--input", files / "bad.gptl", "--output", files / "x.json") == 2
    assert "count 3 is not supported" in capsys.readouterr().err
    assert cli("eval-logic", "--vocab", "a b", "--formula", files / "f.gptl", "--graph", files / "g.json",
               "--vertex", 1) == 2
    assert cli("check-floats", "--fmt", "40,40") == 2
    (files / "broken.gptl").write_text("(a & b\n")
    assert cli("eval-logic", "--vocab", "a b", "--formula", files / "broken.gptl",
               "--graph", files / "g.json") == 2


def test_check_floats(capsys):
    assert cli("check-floats", "--trials", 200, "--max-len", 4) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["saturation"]["k"] == 46


def test_environment_defaults(files, monkeypatch, capsys):
    monkeypatch.setenv("EDTLOGIC_VOCAB", "a b")
    monkeypatch.setenv("EDTLOGIC_FORMAT", "4,4")
    assert cli("compile", "--from", "logic", "--to", "transformer", "--input", files / "f.gptl",
               "--output", files / "t.json") == 0
    capsys.readouterr()
    data = json.loads((files / "t.json").read_text())
    assert (data["header"]["p"], data["header"]["q"]) == (4, 4)


def test_generate(files, capsys):
    from edtlogic.edt import random_transformer, transformer_to_json
    from edtlogic.floatlab import get_format
    t = random_transformer(get_format(3, 3), ["a", "b", "BOS"], d_out=3, seed=1)
    (files / "gen.json").write_text(json.dumps(transformer_to_json(t)))
    args = ("generate", "--vocab", "a b", "--model", files / "gen.json", "--prefix", "a b",
            "--max-steps", 4, "--policy", "sample", "--seed", 3, "--trace", files / "tr.json")
    assert cli(*args) == 0
    first = capsys.readouterr().out
    assert cli(*args) == 0
    assert capsys.readouterr().out == first
    assert json.loads((files / "tr.json").read_text())[0]["n_t"] == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "edtlogic", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "check-equiv" in r.stdout
