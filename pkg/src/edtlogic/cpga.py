"""Synchronous distributed automata on two-sorted word graphs.

At every round each vertex reads its own state, the multiset of prefix states
and the multiset of suffix states before it (``StrictPast``) or up to and
including it (``IncludeSelf``).  Multisets are capped at ``k`` and encoded
canonically as sorted ``(state, multiplicity)`` tuples.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .wordgraph import BOS, TwoSortedGraph

STRICT_PAST = "StrictPast"
INCLUDE_SELF = "IncludeSelf"
VARIANTS = (STRICT_PAST, INCLUDE_SELF)

Multiset = tuple  # ((state, count), ...) sorted by state


class AutomatonError(ValueError):
    pass


class MissingTransition(AutomatonError):
    pass


def capped(states: Iterable[str], k: int) -> Multiset:
    counts: dict = {}
    for s in states:
        counts[s] = counts.get(s, 0) + 1
    return tuple(sorted((s, min(m, k)) for s, m in counts.items() if k > 0))


def mset_from_json(data) -> Multiset:
    return tuple(sorted((str(s), int(m)) for s, m in data))


class TabularDelta:
    """Explicit transition table."""

    kind = "tabular"

    def __init__(self, table: Mapping[tuple[str, Multiset, Multiset], str]):
        self.table = dict(table)

    def __call__(self, x: str, ma: Multiset, mb: Multiset) -> str:
        try:
            return self.table[(x, ma, mb)]
        except KeyError:
            raise MissingTransition(f"no transition for state {x} with multisets {ma} / {mb}") from None

    def describe(self) -> dict:
        return {"kind": "tabular"}


class FunctionDelta:
    """Deterministic transition computed on demand (memoised)."""

    kind = "intensional"

    def __init__(self, fn: Callable[[str, Multiset, Multiset], str], description: Mapping):
        self.fn = fn
        self.description = dict(description)
        self._memo: dict = {}

    def __call__(self, x: str, ma: Multiset, mb: Multiset) -> str:
        key = (x, ma, mb)
        r = self._memo.get(key)
        if r is None:
            r = self._memo[key] = self.fn(x, ma, mb)
        return r

    def describe(self) -> dict:
        return dict(self.description)


@dataclass
class CpgAutomaton:
    m_total: int
    k: int
    n: int
    b: int
    pi: Mapping[str, str]
    delta: Callable[[str, Multiset, Multiset], str]
    variant: str = STRICT_PAST
    states: frozenset | None = None  # explicit Q for tabular machines
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise AutomatonError(f"unknown variant {self.variant!r}")
        if not 0 <= self.b <= self.m_total:
            raise AutomatonError("output length must satisfy 0 <= b <= m_total")
        if self.k < 0 or self.n < 0:
            raise AutomatonError("cap and output round must be non-negative")
        for tok, s in self.pi.items():
            self._check_state(s, f"pi({tok})")

    def _check_state(self, s, what):
        if not isinstance(s, str) or len(s) != self.m_total or set(s) - {"0", "1"}:
            raise AutomatonError(f"{what} = {s!r} is not a state of width {self.m_total}")

    @property
    def is_tabular(self) -> bool:
        return isinstance(self.delta, TabularDelta)

    def init_state(self, label: str) -> str:
        try:
            return self.pi[label]
        except KeyError:
            raise AutomatonError(f"no initial state for label {label!r}") from None

    def step(self, x: str, ma: Multiset, mb: Multiset) -> str:
        y = self.delta(x, ma, mb)
        self._check_state(y, "delta output")
        return y


def run_rounds(a: CpgAutomaton, g: TwoSortedGraph, rounds: int | None = None,
               order: Sequence[int] | None = None) -> list[list[str]]:
    """States of every vertex at rounds 0..rounds (default: the output round).

    ``order`` permutes the per-vertex evaluation order within a round; results
    never depend on it (used by the synchrony tests).
    """
    rounds = a.n if rounds is None else rounds
    labels = g.labels
    n = len(labels)
    b = g.bos - 1
    cur = [a.init_state(lab) for lab in labels]
    hist = [cur]
    idx = list(range(n)) if order is None else list(order)
    inclusive = a.variant == INCLUDE_SELF
    for _ in range(rounds):
        ma = capped(cur[:b], a.k)
        nxt = [None] * n
        for i in idx:
            if i < b:
                mb = ()
            else:
                mb = capped(cur[b:i + 1] if inclusive else cur[b:i], a.k)
            nxt[i] = a.step(cur[i], ma, mb)
        cur = nxt
        hist.append(cur)
    return hist


def run(a: CpgAutomaton, g: TwoSortedGraph) -> list[str]:
    """States at the output round, one per vertex."""
    return run_rounds(a, g)[-1]


def output(a: CpgAutomaton, g: TwoSortedGraph, v: int) -> str:
    if not g.in_suffix(v):
        raise AutomatonError(f"vertex {v} is not in the suffix")
    return run(a, g)[v - 1][: a.b]


def outputs(a: CpgAutomaton, g: TwoSortedGraph) -> list[str]:
    final = run(a, g)
    return [final[v - 1][: a.b] for v in g.suffix_vertices()]


def _counter_bits(n: int) -> int:
    return max(1, (n + 1).bit_length())


def compose_postmap(a: CpgAutomaton, f: Callable[[str], str] | Mapping[str, str], new_b: int,
                    description: Mapping | None = None) -> CpgAutomaton:
    """One extra round that rewrites the first ``b`` output bits with ``f``.

    States of the new machine are ``result (new_b bits) + round counter + old state``;
    the counter tells the transition when to apply ``f``.
    """
    fmap = f if callable(f) else (lambda s, _m=dict(f): _m[s])
    c = _counter_bits(a.n + 1)
    off = new_b + c

    def enc(t: int) -> str:
        return format(min(t, (1 << c) - 1), f"0{c}b")

    def strip(m: Multiset) -> Multiset:
        acc: dict = {}
        for s, cnt in m:
            inner = s[off:]
            acc[inner] = min(acc.get(inner, 0) + cnt, a.k)
        return tuple(sorted(acc.items()))

    def delta(x: str, ma: Multiset, mb: Multiset) -> str:
        region, t, inner = x[:new_b], int(x[new_b:off], 2), x[off:]
        if t < a.n:
            return region + enc(t + 1) + a.step(inner, strip(ma), strip(mb))
        if t == a.n:
            out = fmap(inner[: a.b])
            if len(out) != new_b:
                raise AutomatonError(f"post-map produced {len(out)} bits, expected {new_b}")
            return out + enc(t + 1) + inner
        return x

    pi = {tok: "0" * new_b + enc(0) + s for tok, s in a.pi.items()}
    desc = {"kind": "postmap", "base": describe(a), "new_b": new_b}
    if description:
        desc.update(description)
    return CpgAutomaton(new_b + c + a.m_total, a.k, a.n + 1, new_b, pi, FunctionDelta(delta, desc),
                        a.variant, None, {"base": a})


# --------------------------------------------------------------------- builders


def all_multisets(states: Sequence[str], k: int) -> list[Multiset]:
    """Every multiset over ``states`` with multiplicities 0..k."""
    out = []
    for mults in itertools.product(range(k + 1), repeat=len(states)):
        out.append(tuple((s, m) for s, m in zip(states, mults) if m > 0))
    return out


def _hash_choice(seed: int, parts, size: int) -> int:
    h = hashlib.sha256(repr((seed,) + tuple(parts)).encode()).digest()
    return int.from_bytes(h[:8], "big") % size


def random_tabular(labels: Sequence[str], m_bits: int, k: int, n: int, b: int, seed: int,
                   variant: str = STRICT_PAST) -> CpgAutomaton:
    """Random automaton with a complete table over Q = {0,1}^m_bits."""
    states = ["".join(bits) for bits in itertools.product("01", repeat=m_bits)]
    pi = {lab: states[_hash_choice(seed, ("pi", lab), len(states))] for lab in labels}
    msets = all_multisets(states, k)
    table = {}
    for x in states:
        for ma in msets:
            for mb in msets:
                table[(x, ma, mb)] = states[_hash_choice(seed, ("delta", x, ma, mb), len(states))]
    return CpgAutomaton(m_bits, k, n, b, pi, TabularDelta(table), variant, frozenset(states),
                        {"seed": seed})


def seeded_automaton(labels: Sequence[str], m_bits: int, k: int, n: int, b: int, seed: int,
                     variant: str = STRICT_PAST) -> CpgAutomaton:
    """Same transitions as :func:`random_tabular`, computed lazily."""
    states = ["".join(bits) for bits in itertools.product("01", repeat=m_bits)]
    pi = {lab: states[_hash_choice(seed, ("pi", lab), len(states))] for lab in labels}

    def fn(x, ma, mb):
        return states[_hash_choice(seed, ("delta", x, ma, mb), len(states))]

    desc = {"kind": "seeded-random", "seed": seed, "m_bits": m_bits, "labels": list(labels)}
    return CpgAutomaton(m_bits, k, n, b, pi, FunctionDelta(fn, desc), variant, frozenset(states))


def count_token_automaton(labels: Sequence[str], token: str, k: int) -> CpgAutomaton:
    """One round: the state records min(#prefix vertices labelled ``token``, k).

    State layout: bit 0 is "count >= k" (the output), then the count in binary,
    then a bit marking the initial label.
    """
    width = max(1, k.bit_length())
    m = 1 + width + 1

    def st(cnt, is_tok):
        return ("1" if cnt >= k else "0") + format(cnt, f"0{width}b") + ("1" if is_tok else "0")

    pi = {lab: st(0, lab == token) for lab in labels}

    def fn(x, ma, mb):
        cnt = sum(mult for s, mult in ma if s[-1] == "1")
        return st(min(cnt, k), x[-1] == "1")

    desc = {"kind": "count-token", "token": token, "k": k, "labels": list(labels)}
    return CpgAutomaton(m, k, 1, 1, pi, FunctionDelta(fn, desc))


def projection_automaton(pi: Mapping[str, str], n: int = 1, b: int | None = None, k: int = 1) -> CpgAutomaton:
    """delta(x, M, M') = x."""
    m = len(next(iter(pi.values())))
    return CpgAutomaton(m, k, n, m if b is None else b, dict(pi),
                        FunctionDelta(lambda x, ma, mb: x, {"kind": "projection", "pi": dict(pi)}))


def tabulate(a: CpgAutomaton, graphs: Iterable[TwoSortedGraph]) -> CpgAutomaton:
    """Tabular copy restricted to the transitions used on ``graphs``."""
    table = {}
    orig = a.delta
    for g in graphs:
        hist = run_rounds(a, g)
        for t in range(len(hist) - 1):
            cur = hist[t]
            bpos = g.bos - 1
            ma = capped(cur[:bpos], a.k)
            for i, x in enumerate(cur):
                if i < bpos:
                    mb = ()
                else:
                    mb = capped(cur[bpos:i + 1] if a.variant == INCLUDE_SELF else cur[bpos:i], a.k)
                table[(x, ma, mb)] = orig(x, ma, mb)
    states = {s for key, y in table.items() for s in (key[0], y)} | set(a.pi.values())
    return CpgAutomaton(a.m_total, a.k, a.n, a.b, dict(a.pi), TabularDelta(table), a.variant,
                        frozenset(states))


# --------------------------------------------------------------------- serialization


def describe(a: CpgAutomaton) -> dict:
    d = getattr(a.delta, "describe", None)
    return d() if d else {"kind": "opaque"}


def automaton_to_json(a: CpgAutomaton) -> dict:
    head = {"m_total": a.m_total, "k": a.k, "n": a.n, "b": a.b, "variant": a.variant,
            "pi": dict(sorted(a.pi.items()))}
    if isinstance(a.delta, TabularDelta):
        rows = [[x, [list(p) for p in ma], [list(p) for p in mb], y]
                for (x, ma, mb), y in sorted(a.delta.table.items())]
        head["delta"] = rows
        return head
    head["delta"] = describe(a)
    return head


def automaton_from_json(data, resolver: Callable[[Mapping], CpgAutomaton] | None = None) -> CpgAutomaton:
    """Load a tabular machine; intensional descriptions need ``resolver``."""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        m, k, n, b = int(data["m_total"]), int(data["k"]), int(data["n"]), int(data["b"])
        variant = data.get("variant", STRICT_PAST)
        pi = {str(t): str(s) for t, s in data["pi"].items()}
        delta = data["delta"]
    except (KeyError, TypeError, ValueError) as e:
        raise AutomatonError(f"malformed automaton file: {e}") from None
    if isinstance(delta, dict):
        if resolver is None:
            raise AutomatonError(f"cannot load intensional automaton of kind {delta.get('kind')!r}")
        return resolver(data)
    table = {}
    for row in delta:
        x, ma, mb, y = row
        key = (str(x), mset_from_json(ma), mset_from_json(mb))
        if key in table and table[key] != y:
            raise AutomatonError(f"conflicting transitions for {key}")
        table[key] = str(y)
    states = {s for key, y in table.items() for s in (key[0], y)} | set(pi.values())
    return CpgAutomaton(m, k, n, b, pi, TabularDelta(table), variant, frozenset(states))
