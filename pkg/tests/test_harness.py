import json

import pytest

from edtlogic.cpga import count_token_automaton
from edtlogic.edt import random_transformer
from edtlogic.floatlab import get_format
from edtlogic.gptl import parse_tuple
from edtlogic.harness import (BITWISE, FEATUREWISE, ReportPassed, diff_check, minimize, point_outputs,
                              property_suites, separation_witness, type_lemma_check)
from edtlogic.wordgraph import Vocab, make_graph

F33 = get_format(3, 3)
AB = Vocab.of("a b")


def test_diff_check_counts_points():
    phi = parse_tuple("<G>=1[a]")
    a = count_token_automaton(AB.labels, "a", 1)
    r = diff_check(phi, a, FEATUREWISE, AB, 3)
    assert r.passed and (r.graphs, r.points) == (17, 31)
    assert r.to_json()["stats"] == {"graphs": 17, "points": 31, "mismatches": 0, "empty_prefix_graphs": 7}
    with pytest.raises(ReportPassed):
        minimize(r)


def test_mismatches_are_sorted_and_minimised():
    phi = parse_tuple("<G>=1[b]")
    a = count_token_automaton(AB.labels, "a", 1)
    r = diff_check(phi, a, FEATUREWISE, AB, 4)
    assert not r.passed
    keys = [(g.sort_key(), v) for g, v, _, _ in r.mismatches]
    assert keys == sorted(keys)
    g, v, x, y = minimize(r)
    assert (g.prefix, g.suffix, v, x, y) == (("a",), (), 2, "0", "1")
    assert r.to_json()["mismatches"][0]["empty_prefix"] is False


def test_reports_do_not_depend_on_jobs():
    t = random_transformer(F33, AB.labels, d=3, h=2, d_out=2, seed=4)
    u = random_transformer(F33, AB.labels, d=3, h=2, d_out=2, seed=5)
    one = diff_check(t, u, BITWISE, AB, 5, jobs=1).dumps()
    many = diff_check(t, u, BITWISE, AB, 5, jobs=8).dumps()
    assert one == many
    assert json.loads(one)["stats"]["mismatches"] > 0


def test_featurewise_marks_non_boolean_rows():
    t = random_transformer(F33, AB.labels, d_out=1, seed=5)
    outs = point_outputs(t, make_graph(AB, ["a"], ["b"]), FEATUREWISE)
    assert all(o.startswith("non-boolean:") or set(o) <= {"0", "1"} for o in outs)
    with pytest.raises(TypeError):
        point_outputs(object(), make_graph(AB, [], []), BITWISE)


def test_separation_witness():
    g, v, strict, loose = separation_witness(AB, "a")
    assert (g.prefix, g.suffix, v, strict, loose) == ((), ("a",), 2, "0", "1")


def test_type_lemma_and_property_suites():
    assert type_lemma_check(AB, 2, max_len=5)["passed"]
    rep = property_suites(F33, saturation_trials=500, max_len=5)
    assert rep["saturation"]["passed"] and rep["separation"]["passed"] and rep["type_lemma"]["passed"]
    assert rep["supported_counts"]["matches_validated"] is False
    assert json.dumps(rep, sort_keys=True, default=str) == json.dumps(
        property_suites(F33, saturation_trials=500, max_len=5), sort_keys=True, default=str)
