import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracle
from edtlogic.floatlab import (SATURATION_BOUNDS, cap_multiset, get_format, parse_format,
                               representable_halves, saturation_bound, sum_increasing,
                               validate_saturation, validate_underflow_k)

F33 = get_format(3, 3)
F44 = get_format(4, 4)


def same(x, y):
    if isinstance(x, float) and math.isnan(x):
        return isinstance(y, float) and math.isnan(y)
    return x == y


# ---------------------------------------------------------------- frozen oracle values


def test_constants():
    assert F33.nbits == 7
    assert F33.max_fin == 28 and F33.value(F33.MAX_FIN) == 28
    assert F33.min_pos == Fraction(1, 32)
    assert F33.ONE == 28
    assert F33.NAN == 1 << 7
    assert F33.fields(F33.ONE) == (0, 0b011, 0b100)


def test_encode_clamps_or_overflows():
    # oracle values frozen: 56 lies inside F(3,4)'s range and clamps, 784 does not
    assert oracle.round_value(3, 3, 56) == 28
    assert oracle.round_value(3, 3, 784) == math.inf
    assert F33.value(F33.encode(56)) == 28
    assert F33.encode(784) == F33.POS_INF
    assert F33.encode(-784) == F33.NEG_INF
    assert F33.encode(-56) == F33.neg(F33.MAX_FIN)


def test_arithmetic_examples():
    one = F33.ONE
    assert F33.value(F33.add(one, one)) == 2
    assert F33.mul(F33.MAX_FIN, F33.MAX_FIN) == F33.POS_INF
    assert F33.div(one, 0) == F33.NAN
    assert F33.div(0, 0) == F33.NAN
    assert F33.mul(0, F33.POS_INF) == F33.NAN
    assert F33.add(F33.POS_INF, F33.NEG_INF) == F33.NAN


def test_exp_examples():
    assert F33.exp(0) == F33.ONE
    assert F33.exp(F33.NEG_INF) == 0
    assert F33.exp(F33.ONE) == 0x25
    assert F33.value(0x25) == Fraction(5, 2)
    assert oracle.exp(3, 3, Fraction(1)) == Fraction(5, 2)


def test_sum_examples():
    assert sum_increasing(F33, {}) == 0
    assert F33.value(sum_increasing(F33, {F33.ONE: 2})) == 2
    f = F33.encode(Fraction(1, 32))
    assert F33.value(sum_increasing(F33, {F33.encode(16): 1, f: 1})) == 16


def test_addition_is_not_associative():
    # triple found by searching the oracle: (24 + 5/16) + 2 = 24 but 24 + (5/16 + 2) = 28
    x, y, z = (F33.encode(v) for v in (24, Fraction(5, 16), 2))
    assert F33.value(F33.add(F33.add(x, y), z)) == 24
    assert F33.value(F33.add(x, F33.add(y, z))) == 28


def test_cap_multiset_examples():
    assert cap_multiset({1: 5}, 3) == {1: 3}
    assert cap_multiset({}, 4) == {}
    assert cap_multiset({1: 2, 2: 7}, 4) == {1: 2, 2: 4}
    with pytest.raises(ValueError):
        cap_multiset({1: 1}, -1)


def test_hex_and_bits_round_trip():
    for c in F33.all_finite() + [F33.POS_INF, F33.NEG_INF, F33.NAN]:
        assert F33.from_hex(F33.to_hex(c)) == c
        assert F33.from_bits(F33.to_bits(c)) == c
    with pytest.raises(ValueError):
        F33.from_hex("f4.4:0x1")


def test_parse_format():
    assert parse_format("3,3") is F33
    assert parse_format("F(4,4)") is F44
    assert parse_format("f3.3") is F33
    with pytest.raises(ValueError):
        parse_format("three")


# ---------------------------------------------------------------- exhaustive oracle agreement


@pytest.mark.parametrize("p,q", [(3, 3), (2, 3), (2, 2)])
def test_operations_match_oracle_exhaustively(p, q):
    f = get_format(p, q)
    vals = [f.value(c) for c in f.all_finite()] + [math.inf, -math.inf]
    for x, y in itertools.product(vals, repeat=2):
        cx, cy = f.encode(x), f.encode(y)
        assert same(f.value(f.add(cx, cy)), oracle.add(p, q, x, y)), ("add", x, y)
        assert same(f.value(f.mul(cx, cy)), oracle.mul(p, q, x, y)), ("mul", x, y)
        assert same(f.value(f.div(cx, cy)), oracle.div(p, q, x, y)), ("div", x, y)


@pytest.mark.parametrize("p,q", [(3, 3), (4, 4)])
def test_exp_matches_oracle(p, q):
    f = get_format(p, q)
    for c in f.all_finite():
        assert f.value(f.exp(c)) == oracle.exp(p, q, f.value(c))


# ---------------------------------------------------------------- properties


fmts = st.sampled_from([(2, 2), (3, 3), (4, 4), (5, 3), (3, 5)])
rationals = st.fractions(min_value=-2000, max_value=2000, max_denominator=4096)


@settings(max_examples=300, deadline=None)
@given(fmts, rationals)
def test_encode_matches_oracle(pq, x):
    f = get_format(*pq)
    assert same(f.value(f.encode(x)), oracle.round_value(*pq, x))


@settings(max_examples=200, deadline=None)
@given(fmts, rationals, rationals)
def test_encode_is_monotone(pq, x, y):
    f = get_format(*pq)
    if x <= y:
        assert f.value(f.encode(x)) <= f.value(f.encode(y))


@settings(max_examples=200, deadline=None)
@given(fmts, st.data())
def test_add_and_mul_commute(pq, data):
    f = get_format(*pq)
    pool = f.all_finite() + [f.POS_INF, f.NEG_INF, f.NAN]
    x, y = data.draw(st.sampled_from(pool)), data.draw(st.sampled_from(pool))
    assert f.add(x, y) == f.add(y, x)
    assert f.mul(x, y) == f.mul(y, x)


@settings(max_examples=200, deadline=None)
@given(fmts, st.data())
def test_finite_codes_round_trip(pq, data):
    f = get_format(*pq)
    c = data.draw(st.sampled_from(f.all_finite()))
    assert f.encode(f.value(c)) == c
    assert f.neg(f.neg(c)) == c
    assert f.add(c, 0) == c


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_sum_is_order_independent(data):
    f = F33
    items = data.draw(st.lists(st.sampled_from(f.all_finite()), max_size=12))
    shuffled = data.draw(st.permutations(items))
    assert f.sum_increasing(items) == f.sum_increasing(shuffled)
    counts: dict = {}
    for c in items:
        counts[c] = counts.get(c, 0) + 1
    assert f.sum_counts(counts) == f.sum_increasing(items)
    assert f.value(f.sum_increasing(items)) == oracle.sum_increasing(3, 3, [f.value(c) for c in items])


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(0, 50), st.integers(0, 20)), st.integers(0, 10))
def test_cap_is_idempotent_and_bounded(m, k):
    c = cap_multiset(m, k)
    assert cap_multiset(c, k) == c
    assert all(0 < v <= k for v in c.values())
    assert set(c) <= set(m)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_saturation_holds_at_bound(seed):
    for f in (F33, F44):
        assert validate_saturation(f, saturation_bound(f), 50, seed).holds


# ---------------------------------------------------------------- validators


def test_saturation_small_cap_has_witness():
    rep = validate_saturation(F33, 1, 1000, 0)
    assert not rep.holds and rep.witness is not None


def test_saturation_bound_is_the_doubled_sweep():
    # the configured bound is twice the first k with no witness in 10^4 trials
    for (p, q), kstar in SATURATION_BOUNDS.items():
        f = get_format(p, q)
        k = 1
        while not validate_saturation(f, k, 10_000, 0).holds:
            k += 1
        assert kstar == 2 * k


def test_underflow_verdicts_f33():
    verdicts = {k: validate_underflow_k(F33, k).valid for k in representable_halves(F33)}
    assert sorted(k for k, ok in verdicts.items() if ok) == [2, 4, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28,
                                                               32, 40, 48, 56]
    # the literal reading has no valid k at all
    assert not any(validate_underflow_k(F33, k, "literal").valid for k in representable_halves(F33))


def test_underflow_rejects_unrepresentable_half():
    with pytest.raises(ValueError):
        validate_underflow_k(F33, 57)
    with pytest.raises(ValueError):
        validate_underflow_k(F33, 2, "sideways")


def test_format_rejects_bad_parameters():
    with pytest.raises(ValueError):
        get_format(0, 3)
