import pytest
from hypothesis import given, strategies as st

import oracle
from edtlogic.wordgraph import (BOS, EOS, GraphError, TwoSortedGraph, Vocab, corpus, count_graphs,
                                enumerate_graphs, graph_from_json, make_graph, pointed)

AB = Vocab.of("a b")


def test_graph_shape():
    g = make_graph(AB, ["a", "b"], [])
    assert g.n == 3 and list(g.suffix_vertices()) == [3] and g.bos == 3
    g = make_graph(AB, [], ["a"])
    assert g.n == 2 and g.labels == (BOS, "a")
    g = make_graph(AB, ["a"], ["a", "b"])
    assert g.labels == ("a", BOS, "a", "b")
    assert g.suffix_tokens() == (BOS, "a", "b")
    assert g.in_suffix(2) and not g.in_suffix(1)


def test_bad_graphs():
    with pytest.raises(GraphError):
        make_graph(AB, ["c"], [])
    with pytest.raises(GraphError):
        Vocab.of(["a", "a"])
    with pytest.raises(GraphError):
        Vocab.of([BOS])
    with pytest.raises(GraphError):
        Vocab.of([EOS, "a"])
    with pytest.raises(GraphError):
        graph_from_json(AB, {"prefix": [], "middle": []})
    with pytest.raises(GraphError):
        make_graph(AB, [], []).label(2)


def test_counts():
    assert oracle.count_graphs(1, 2) == count_graphs(1, 2) == 3
    assert [g.to_json() for g in corpus(Vocab.of("a"), 2)] == [
        {"prefix": [], "suffix": []}, {"prefix": [], "suffix": ["a"]}, {"prefix": ["a"], "suffix": []}]
    assert count_graphs(2, 1) == len(corpus(AB, 1)) == 1
    # 1 + 2*2 + 3*4; the direct count for three vertices over two tokens
    assert oracle.count_graphs(2, 3) == count_graphs(2, 3) == len(corpus(AB, 3)) == 17
    assert oracle.count_graphs(2, 6) == len(corpus(AB, 6)) == 321


def test_enumeration_rejects_empty_bound():
    with pytest.raises(GraphError):
        corpus(AB, 0)


@given(st.integers(1, 3), st.integers(1, 5))
def test_enumeration_is_complete_sorted_and_unique(sigma, max_len):
    v = Vocab(tuple("abc"[:sigma]))
    gs = corpus(v, max_len)
    assert len(gs) == len(set(gs)) == oracle.count_graphs(sigma, max_len)
    assert [g.sort_key() for g in gs] == sorted(g.sort_key() for g in gs)
    assert sum(1 for _ in pointed(gs)) == sum(len(g.suffix) + 1 for g in gs)


@given(st.lists(st.sampled_from("ab"), max_size=4), st.lists(st.sampled_from("ab"), max_size=4))
def test_json_round_trip(pre, suf):
    g = make_graph(AB, pre, suf)
    assert graph_from_json(AB, g.to_json()) == g
    assert TwoSortedGraph(tuple(pre), tuple(suf)) == g
    assert g.labels.count(BOS) == 1
