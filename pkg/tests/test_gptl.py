import random

import pytest
from hypothesis import given, settings, strategies as st

import oracle
from edtlogic.gptl import (BOT, CORE, NON_STRICT, TOP, And, Bot, FormulaSyntaxError, FormulaTuple, GPre,
                           Not, Or, Prop, PSuf, PSufGeq, TypeRenderer, TypeValue, UnknownToken,
                           eval_tuple, eval_tuple_all, evaluate, modal_depth, parse_formula, parse_tuple,
                           render, type_of, types_by_depth, width)
from edtlogic.wordgraph import BOS, GraphError, Vocab, corpus, make_graph

AB = Vocab.of("a b")
a, b = Prop("a"), Prop("b")


def formulas(strict: bool = True, max_count: int = 3):
    leaves = st.sampled_from([a, b, Prop(BOS), Bot()])

    def extend(children):
        past = (st.builds(PSuf, children) if strict
                else st.builds(PSufGeq, st.integers(1, max_count), children))
        return st.one_of(
            st.builds(Not, children),
            st.builds(And, children, children),
            st.builds(GPre, st.integers(0, max_count), children),
            past,
        )

    return st.recursive(leaves, extend, max_leaves=6)


graphs = st.builds(lambda pre, suf: make_graph(AB, pre, suf),
                   st.lists(st.sampled_from("ab"), max_size=4), st.lists(st.sampled_from("ab"), max_size=4))


# ---------------------------------------------------------------- parser


def test_parse_examples():
    assert parse_formula("bot") is Bot()
    assert parse_formula("<G>=2[(a & !b)]") is GPre(2, And(a, Not(b)))
    assert parse_formula("<P>[<G>=1[a]]") is PSuf(GPre(1, a))
    assert parse_formula("<P>=2[ a ]") is PSufGeq(2, a)


def test_parse_errors():
    with pytest.raises(FormulaSyntaxError) as e:
        parse_formula("(a & b")
    assert e.value.pos == 6
    with pytest.raises(FormulaSyntaxError):
        parse_formula("a b")
    with pytest.raises(FormulaSyntaxError):
        parse_formula("<P>=0[a]")
    with pytest.raises(UnknownToken):
        parse_formula("c", ["a", "b"])


def test_parse_tuple_and_variant():
    phi = parse_tuple("# comment\na\n\n<P>[b]\n")
    assert len(phi) == 2 and phi.variant == CORE
    assert parse_tuple("<P>=1[a]").variant == NON_STRICT
    with pytest.raises(ValueError):
        parse_tuple("<P>[a]\n<P>=1[a]")
    with pytest.raises(ValueError):
        FormulaTuple((PSuf(a),), NON_STRICT)
    with pytest.raises(ValueError):
        parse_tuple("# nothing")


@settings(max_examples=200, deadline=None)
@given(st.one_of(formulas(True), formulas(False)))
def test_render_parse_round_trip(f):
    assert parse_formula(render(f)) is f


def test_hash_consing():
    assert And(a, Not(b)) is And(Prop("a"), Not(Prop("b")))
    with pytest.raises(AttributeError):
        a.kind = "bot"


# ---------------------------------------------------------------- semantics


def test_evaluation_examples():
    g = make_graph(AB, ["a", "a"], ["b"])
    assert evaluate(GPre(2, a), g, 4)
    for h in corpus(AB, 4):
        assert not evaluate(PSuf(TOP), h, h.bos)
    assert not evaluate(PSuf(b), make_graph(AB, [], ["b"]), 2)
    assert eval_tuple([Bot(), Not(Bot())], g, 4) == "01"
    assert eval_tuple([Prop(BOS)], g, 3) == "1"
    with pytest.raises(GraphError):
        eval_tuple([a], g, 1)
    with pytest.raises(GraphError):
        evaluate(a, g, 9)


def test_depth_two_tuple_on_five_vertices():
    g = make_graph(AB, ["a", "b"], ["a", "b"])
    phi = [PSuf(GPre(1, a)), GPre(2, Not(PSuf(a))), PSuf(And(a, PSuf(Prop(BOS))))]
    # oracle bits per suffix vertex 3, 4, 5
    assert eval_tuple_all(phi, g) == ["010", "110", "111"]
    assert [eval_tuple(phi, g, v) for v in (3, 4, 5)] == ["010", "110", "111"]
    labels = g.labels
    assert [''.join('1' if oracle.holds(f, labels, g.bos, v) else '0' for f in phi) for v in (3, 4, 5)] \
        == ["010", "110", "111"]


@settings(max_examples=300, deadline=None)
@given(st.one_of(formulas(True), formulas(False)), graphs)
def test_evaluator_matches_definition(f, g):
    labels = g.labels
    for v in range(1, g.n + 1):
        assert evaluate(f, g, v) == oracle.holds(f, labels, g.bos, v)


@settings(max_examples=100, deadline=None)
@given(formulas(True), graphs)
def test_derived_connectives(f, g):
    for v in g.suffix_vertices():
        assert evaluate(Or(f, BOT), g, v) == evaluate(f, g, v)
        assert evaluate(TOP, g, v)
        assert evaluate(Not(Not(f)), g, v) == evaluate(f, g, v)
        # the non-strict count with threshold 1 is the strict past or the vertex itself
        assert evaluate(PSufGeq(1, f), g, v) == (evaluate(PSuf(f), g, v) or evaluate(f, g, v))


def test_depth_and_width():
    assert (modal_depth(Bot()), width(Bot())) == (0, 0)
    f = GPre(3, PSuf(a))
    assert (modal_depth(f), width(f)) == (2, 3)
    assert (modal_depth(And(a, a)), width(And(a, a))) == (0, 0)


# ---------------------------------------------------------------- types


def test_depth_zero_profile():
    t = TypeValue("a")
    assert t.profile(AB.labels) == {"a": True, "b": False, BOS: False}


def test_type_of_five_vertex_graph():
    g = make_graph(AB, ["a", "b"], ["a", "b"])
    ta, tb, tbos = TypeValue("a"), TypeValue("b"), TypeValue(BOS)
    assert type_of(g, 5, 1, 1) == TypeValue("b", ((ta, 1), (tb, 1)), ((tbos, 1), (ta, 1)))
    assert type_of(g, 3, 1, 1) == TypeValue(BOS, ((ta, 1), (tb, 1)), ())
    assert type_of(g, 5, 1, 1, NON_STRICT).suf == ((tbos, 1), (ta, 1), (tb, 1))


def test_equal_neighbourhoods_give_equal_types():
    g = make_graph(AB, ["a"], ["a", "b", "a"])
    h = make_graph(AB, ["a", "a"], ["b", "a", "a"])
    assert type_of(g, 5, 1, 1) == type_of(h, 6, 1, 1)
    assert type_of(g, 5, 2, 1) != type_of(h, 6, 2, 1)


def test_rendered_type_shape():
    t = TypeValue("a", ((TypeValue("b"), 1),), ())
    f = TypeRenderer(AB.labels, 1).render(t)
    assert "<G>=1[((b & !a) & !BOS)]" in render(f)


def test_type_formulas_characterise_types():
    gs = corpus(AB, 5)
    rng = random.Random(7)
    for k, d, variant in [(1, 1, CORE), (2, 1, CORE), (1, 2, CORE), (2, 2, NON_STRICT), (1, 2, NON_STRICT)]:
        rend = TypeRenderer(AB.labels, k, variant)
        points = [(g, v) for g in gs for v in g.suffix_vertices()]
        for g, v in rng.sample(points, 20):
            t = type_of(g, v, k, d, variant)
            f = rend(t)
            for h in gs:
                types = types_by_depth(h, k, d, variant)[d]
                for w in h.suffix_vertices():
                    assert evaluate(f, h, w) == (types[w - 1] == t)


def test_types_reject_bad_parameters():
    g = make_graph(AB, [], [])
    with pytest.raises(ValueError):
        types_by_depth(g, 0, 1)
    with pytest.raises(ValueError):
        types_by_depth(g, 1, 1, "Sideways")
