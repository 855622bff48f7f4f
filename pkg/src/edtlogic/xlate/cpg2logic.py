"""Read a formula tuple off an automaton through modal types.

Vertices with equal depth-n types (width k) get equal states in round n, so
the automaton's output at a vertex is a function of its type.  Corpus mode
collects the types realised on a bounded corpus; exact mode (n <= 1)
enumerates every abstract type, so its certificate covers all graphs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from ..cpga import INCLUDE_SELF, CpgAutomaton, MissingTransition, run_rounds
from ..gptl.semantics import eval_tuple_all
from ..gptl.syntax import BOT, CORE, NON_STRICT, TOP, FormulaTuple, disj
from ..gptl.types import TypeRenderer, TypeValue, types_by_depth
from ..wordgraph import TwoSortedGraph, Vocab, enumerate_graphs


class EmptyCorpus(ValueError):
    pass


class TypeExplosion(RuntimeError):
    pass


class LemmaViolation(AssertionError):
    """Two vertices with equal types received different states."""


def type_to_json(t: TypeValue):
    if t.pre is None:
        return t.label
    return [t.label, [[type_to_json(s), m] for s, m in t.pre], [[type_to_json(s), m] for s, m in t.suf]]


@dataclass
class Certificate:
    mode: str  # "corpus" or "exact"
    k: int
    depth: int
    variant: str
    train_max_len: int
    realized: list  # [(TypeValue, output bits)]
    train_points: int = 0
    train_mismatches: int = 0
    heldout: dict = field(default_factory=dict)

    @property
    def covered(self) -> set:
        return {t for t, _ in self.realized}

    def to_json(self) -> dict:
        return {
            "mode": self.mode, "k": self.k, "depth": self.depth, "variant": self.variant,
            "train_max_len": self.train_max_len, "realized_types": len(self.realized),
            "train_points": self.train_points, "train_mismatches": self.train_mismatches,
            "heldout": self.heldout,
            "types": [{"type": type_to_json(t), "output": out} for t, out in self.realized],
        }


def _type_variant(a: CpgAutomaton) -> str:
    return NON_STRICT if a.variant == INCLUDE_SELF else CORE


def _width(a: CpgAutomaton) -> int:
    return max(1, a.k)


def state_of_type(a: CpgAutomaton, t: TypeValue, depth: int, memo: dict) -> str:
    """Round-``depth`` state forced by a depth-``depth`` type."""
    key = (t, depth)
    r = memo.get(key)
    if r is not None:
        return r
    if depth == 0:
        r = a.init_state(t.label)
    else:
        k = _width(a)
        own = state_of_type(a, t.project(depth - 1, k), depth - 1, memo)

        def states(items):
            acc: dict = {}
            for s, m in items:
                st = state_of_type(a, s, depth - 1, memo)
                acc[st] = min(acc.get(st, 0) + m, a.k)
            return tuple(sorted((s, m) for s, m in acc.items() if m > 0))

        r = a.step(own, states(t.pre), states(t.suf))
    memo[key] = r
    return r


def _abstract_types(labels: Sequence[str], k: int, depth: int) -> list[TypeValue]:
    level = [TypeValue(lab) for lab in labels]
    for _ in range(depth):
        maps = [tuple((t, m) for t, m in zip(level, ms) if m)
                for ms in itertools.product(range(k + 1), repeat=len(level))]
        maps = [tuple(sorted(mp)) for mp in maps]
        level = [TypeValue(lab, pre, suf) for lab in labels for pre in maps for suf in maps]
    return level


def automaton_to_logic(a: CpgAutomaton, vocab: Vocab, corpus_bound: int = 6, *,
                       heldout: Sequence[int] = (7, 8), exact: bool | None = None,
                       max_types: int = 50000, output_map=None) -> tuple[FormulaTuple, Certificate]:
    """Formula tuple agreeing with ``a`` on every graph whose types are covered.

    ``output_map`` rewrites the automaton's output bits before they are read
    off (the formulas then agree with the rewritten outputs).
    """
    k, n = _width(a), a.n
    variant = _type_variant(a)
    labels = vocab.labels
    if exact is None:
        exact = n <= 1 and len(vocab) <= 2 and a.k <= 1
    memo: dict = {}
    by_type: dict = {}
    train_points = 0
    if exact:
        if n > 1:
            raise TypeExplosion("exact mode enumerates abstract types only up to depth 1")
        for t in _abstract_types(labels, k, n):
            try:
                by_type[t] = state_of_type(a, t, n, memo)[: a.b]
            except MissingTransition:
                pass  # a partial table cannot be evaluated off its recorded transitions
    graphs_seen = 0
    mismatches = 0
    if corpus_bound < 1:
        raise EmptyCorpus(f"corpus bound {corpus_bound} produces zero graphs")
    for g in enumerate_graphs(vocab, corpus_bound):
        graphs_seen += 1
        types = types_by_depth(g, k, n, variant)[n]
        final = run_rounds(a, g)[-1]
        for v in g.suffix_vertices():
            t, out = types[v - 1], final[v - 1][: a.b]
            train_points += 1
            prev = by_type.get(t)
            if prev is None:
                by_type[t] = out
                if len(by_type) > max_types:
                    raise TypeExplosion(f"more than {max_types} realised types")
            elif prev != out:
                mismatches += 1
                if not exact:
                    raise LemmaViolation(f"type of vertex {v} in {g} already mapped to {prev}, automaton gives {out}")
    if graphs_seen == 0:
        raise EmptyCorpus("corpus produced zero graphs")
    order = sorted(by_type, key=repr)
    if output_map is not None:
        by_type = {t: output_map(out) for t, out in by_type.items()}
    render = TypeRenderer(labels, k, variant)
    formulas = []
    out_len = len(next(iter(by_type.values()))) if by_type else a.b
    for j in range(out_len):
        ones = [t for t in order if by_type[t][j] == "1"]
        if len(ones) == len(order):
            formulas.append(TOP)
        elif not ones:
            formulas.append(BOT)
        else:
            formulas.append(disj([render(t) for t in ones]))
    if not formulas:
        raise ValueError("the automaton has no output bits")
    phi = FormulaTuple(tuple(formulas), variant)
    cert = Certificate("exact" if exact else "corpus", k, n, variant, corpus_bound,
                       [(t, by_type[t]) for t in order], train_points, mismatches)
    if heldout:
        cert.heldout = verify_heldout(a, phi, cert, vocab, heldout, output_map)
    return phi, cert


def verify_heldout(a: CpgAutomaton, phi: FormulaTuple, cert: Certificate, vocab: Vocab,
                   lengths: Sequence[int], output_map=None) -> dict:
    """Compare formula and automaton on graphs of the given sizes, split by coverage."""
    covered = cert.covered
    stats = {"lengths": list(lengths), "points": 0, "covered": 0, "covered_mismatches": 0,
             "uncovered_mismatches": 0, "first_mismatch": None}
    for size in lengths:
        for g in enumerate_graphs(vocab, size, size):
            types = types_by_depth(g, cert.k, cert.depth, cert.variant)[cert.depth]
            final = run_rounds(a, g)[-1]
            got = eval_tuple_all(phi, g)
            for idx, v in enumerate(g.suffix_vertices()):
                stats["points"] += 1
                want = final[v - 1][: a.b]
                ok = got[idx] == (want if output_map is None else output_map(want))
                if types[v - 1] in covered or cert.mode == "exact":
                    stats["covered"] += 1
                    if not ok:
                        stats["covered_mismatches"] += 1
                        if stats["first_mismatch"] is None:
                            stats["first_mismatch"] = {"graph": g.to_json(), "vertex": v}
                elif not ok:
                    stats["uncovered_mismatches"] += 1
    stats["coverage"] = stats["covered"] / stats["points"] if stats["points"] else 1.0
    return stats


def lemma_check(a: CpgAutomaton, graphs: Sequence[TwoSortedGraph], k: int, depth: int) -> list:
    """Pairs of vertices with equal depth-``depth`` types but different states in some round."""
    variant = _type_variant(a)
    seen: dict = {}
    bad = []
    for g in graphs:
        types = types_by_depth(g, k, depth, variant)[depth]
        hist = run_rounds(a, g, depth)
        for v in range(1, g.n + 1):
            states = tuple(h[v - 1] for h in hist)
            t = types[v - 1]
            prev = seen.setdefault(t, (states, g, v))
            if prev[0] != states:
                bad.append({"type": type_to_json(t), "first": [prev[1].to_json(), prev[2]],
                            "second": [g.to_json(), v]})
    return bad
