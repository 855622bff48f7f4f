import random

import pytest
from hypothesis import given, settings, strategies as st

from edtlogic.cpga import (INCLUDE_SELF, STRICT_PAST, AutomatonError, MissingTransition, all_multisets,
                           automaton_from_json, automaton_to_json, capped, compose_postmap,
                           count_token_automaton, output, outputs, projection_automaton, random_tabular,
                           run, run_rounds, seeded_automaton, tabulate)
from edtlogic.wordgraph import BOS, Vocab, enumerate_graphs, make_graph

AB = Vocab.of("a b")
graphs = st.builds(lambda pre, suf: make_graph(AB, pre, suf),
                   st.lists(st.sampled_from("ab"), max_size=4), st.lists(st.sampled_from("ab"), max_size=4))


def naive_run(a, labels, bos):
    """Rounds computed straight from the definition, one vertex at a time."""
    cur = [a.pi[x] for x in labels]
    for _ in range(a.n):
        nxt = []
        for v in range(1, len(labels) + 1):
            pre = [cur[u - 1] for u in range(1, bos)]
            if v < bos:
                suf = []
            else:
                last = v if a.variant == INCLUDE_SELF else v - 1
                suf = [cur[u - 1] for u in range(bos, last + 1)]
            ma = tuple(sorted((s, min(pre.count(s), a.k)) for s in set(pre))) if a.k else ()
            mb = tuple(sorted((s, min(suf.count(s), a.k)) for s in set(suf))) if a.k else ()
            nxt.append(a.delta(cur[v - 1], ma, mb))
        cur = nxt
    return cur


def test_capped_multisets():
    assert capped(["01", "00", "01", "01"], 2) == (("00", 1), ("01", 2))
    assert capped(["1"], 0) == ()
    assert len(all_multisets(["0", "1"], 2)) == 9


def test_projection_outputs_initial_states():
    pi = {"a": "10", "b": "01", BOS: "11"}
    p = projection_automaton(pi, n=3, b=1)
    g = make_graph(AB, ["a"], ["b", "a"])
    assert run(p, g) == ["10", "11", "01", "10"]
    assert outputs(p, g) == ["1", "0", "1"]


def test_zero_rounds_reads_pi():
    a = random_tabular(AB.labels, 2, 1, 0, 2, seed=4)
    g = make_graph(AB, ["b"], ["a"])
    assert run(a, g) == [a.pi["b"], a.pi[BOS], a.pi["a"]]


def test_count_token_example():
    a = count_token_automaton(AB.labels, "a", 2)
    for g in enumerate_graphs(AB, 6):
        want = "1" if g.prefix.count("a") >= 2 else "0"
        assert outputs(a, g) == [want] * len(g.suffix_vertices())


def test_output_rejects_prefix_vertex():
    a = count_token_automaton(AB.labels, "a", 1)
    g = make_graph(AB, ["a"], [])
    assert output(a, g, 2) == "1"
    with pytest.raises(AutomatonError):
        output(a, g, 1)


@settings(max_examples=100, deadline=None)
@given(graphs, st.integers(0, 1000), st.sampled_from([STRICT_PAST, INCLUDE_SELF]), st.integers(0, 2))
def test_run_matches_definition(g, seed, variant, k):
    a = seeded_automaton(AB.labels, 2, k, 2, 1, seed, variant)
    assert run(a, g) == naive_run(a, g.labels, g.bos)


@settings(max_examples=50, deadline=None)
@given(graphs, st.integers(0, 1000))
def test_rounds_are_synchronous(g, seed):
    a = seeded_automaton(AB.labels, 2, 1, 3, 1, seed)
    order = list(range(g.n))
    random.Random(seed).shuffle(order)
    assert run_rounds(a, g, order=order) == run_rounds(a, g)


def test_seeded_matches_tabular():
    for seed in range(3):
        t, s = random_tabular(AB.labels, 2, 1, 2, 1, seed), seeded_automaton(AB.labels, 2, 1, 2, 1, seed)
        for g in enumerate_graphs(AB, 5):
            assert run(t, g) == run(s, g)


def test_compose_postmap_flips_output():
    a = count_token_automaton(AB.labels, "b", 1)
    c = compose_postmap(a, {"0": "1", "1": "0"}, 1)
    assert c.n == a.n + 1
    for g in enumerate_graphs(AB, 5):
        assert outputs(c, g) == ["1" if x == "0" else "0" for x in outputs(a, g)]
    bad = compose_postmap(a, lambda s: "00", 1)
    with pytest.raises(AutomatonError):
        outputs(bad, make_graph(AB, [], []))


def test_tabulate_and_json_round_trip():
    a = seeded_automaton(AB.labels, 2, 1, 2, 2, 9)
    gs = list(enumerate_graphs(AB, 4))
    t = tabulate(a, gs)
    assert t.is_tabular
    data = automaton_to_json(t)
    u = automaton_from_json(data)
    assert automaton_to_json(u) == data
    for g in gs:
        assert outputs(u, g) == outputs(a, g)
    # a graph outside the tabulated corpus hits a missing transition
    with pytest.raises(MissingTransition):
        for g in enumerate_graphs(AB, 6):
            outputs(u, g)


def test_json_errors():
    with pytest.raises(AutomatonError):
        automaton_from_json({"m_total": 1})
    a = count_token_automaton(AB.labels, "a", 1)
    with pytest.raises(AutomatonError):
        automaton_from_json(automaton_to_json(a))
    row = ["0", [], [], "1"]
    data = {"m_total": 1, "k": 1, "n": 1, "b": 1, "pi": {"a": "0"}, "delta": [row, ["0", [], [], "0"]]}
    with pytest.raises(AutomatonError):
        automaton_from_json(data)


def test_construction_checks():
    with pytest.raises(AutomatonError):
        projection_automaton({"a": "1"}, b=2)
    with pytest.raises(AutomatonError):
        projection_automaton({"a": "1", "b": "10"})
    with pytest.raises(AutomatonError):
        random_tabular(AB.labels, 1, 1, 1, 1, 0, variant="Sideways")
