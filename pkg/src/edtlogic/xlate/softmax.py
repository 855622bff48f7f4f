"""Translations for models whose outputs pass through a final softmax.

Equivalence is relative to a similarity relation: whenever the source's
output has a related value anywhere in the target's range, the target must
produce a related value.  Each translation picks, for every source output
``v``, the output ``choose(v)``: ``v`` itself when it is related to itself and
reachable, else the least related reachable vector.  When nothing is related
the output is left as is and the case is recorded as a diagnostic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from ..cpga import CpgAutomaton, compose_postmap
from ..edt import Mat, Transformer, softmax_row
from ..floatlab import FloatFormat, get_format
from ..gptl.semantics import eval_tuple_all
from ..gptl.syntax import BOT, FormulaTuple, TOP, And, Not, conj
from ..wordgraph import Vocab, enumerate_graphs
from .cpg2logic import automaton_to_logic
from .logic2tf import compile_logic
from .tf2cpg import transformer_to_automaton

Vector = tuple  # tuple of float codes


class NoRelatedOutput(Exception):
    """Raised only on request; normally the cases are listed in the diagnostics."""


@dataclass(frozen=True)
class SimilarityRelation:
    """``kind`` is "pairs" (explicit set), "epsilon" (max coordinate distance), "equal" or "all".

    "equal" may be restricted to a finite domain of vectors; "all" relates everything.
    """

    kind: str
    fmt: FloatFormat
    pairs: frozenset = frozenset()
    epsilon: Fraction | None = None
    domain: frozenset | None = None

    @classmethod
    def explicit(cls, fmt, pairs: Iterable[tuple[Vector, Vector]]):
        return cls("pairs", fmt, frozenset((tuple(a), tuple(b)) for a, b in pairs))

    @classmethod
    def closeness(cls, fmt, eps):
        return cls("epsilon", fmt, epsilon=Fraction(eps))

    @classmethod
    def equality(cls, fmt, domain: Iterable[Vector] | None = None):
        return cls("equal", fmt, domain=None if domain is None else frozenset(map(tuple, domain)))

    @classmethod
    def full(cls, fmt):
        return cls("all", fmt)

    @classmethod
    def empty(cls, fmt):
        return cls("pairs", fmt, frozenset())

    def distance(self, v: Vector, u: Vector):
        val = self.fmt.value
        worst = Fraction(0)
        for a, b in zip(v, u):
            if a == b:
                if a == self.fmt.NAN:
                    return None
                continue
            x, y = val(a), val(b)
            if isinstance(x, float) or isinstance(y, float):
                return None  # inf against anything else, or NaN
            worst = max(worst, abs(x - y))
        return worst

    def related(self, v: Vector, u: Vector) -> bool:
        v, u = tuple(v), tuple(u)
        if len(v) != len(u):
            return False
        if self.kind == "all":
            return True
        if self.kind == "pairs":
            return (v, u) in self.pairs
        if self.kind == "equal":
            return v == u and (self.domain is None or v in self.domain)
        dist = self.distance(v, u)
        return dist is not None and dist <= self.epsilon

    def image(self, v: Vector, pool: Iterable[Vector]) -> list[Vector]:
        return sorted(u for u in pool if self.related(v, u))

    def to_json(self) -> dict:
        fmt = self.fmt
        hexv = lambda vec: [fmt.to_hex(c) for c in vec]
        out = {"kind": self.kind, "format": str(fmt)}
        if self.kind == "pairs":
            out["pairs"] = sorted([hexv(a), hexv(b)] for a, b in self.pairs)
        elif self.kind == "epsilon":
            out["epsilon"] = str(self.epsilon)
        elif self.kind == "equal" and self.domain is not None:
            out["domain"] = sorted(hexv(v) for v in self.domain)
        return out

    @classmethod
    def from_json(cls, data, fmt: FloatFormat | None = None):
        from ..floatlab import parse_format
        if isinstance(data, str):
            data = json.loads(data)
        fmt = fmt or parse_format(data["format"])
        unhex = lambda vec: tuple(fmt.from_hex(c) for c in vec)
        kind = data["kind"]
        if kind == "pairs":
            return cls.explicit(fmt, [(unhex(a), unhex(b)) for a, b in data.get("pairs", [])])
        if kind == "epsilon":
            return cls.closeness(fmt, Fraction(data["epsilon"]))
        if kind == "equal":
            dom = data.get("domain")
            return cls.equality(fmt, None if dom is None else [unhex(v) for v in dom])
        if kind == "all":
            return cls.full(fmt)
        raise ValueError(f"unknown similarity kind {kind!r}")


# --------------------------------------------------------------------- helpers


def bits_to_vector(fmt: FloatFormat, bits: str) -> Vector:
    nb = fmt.nbits
    if len(bits) % nb:
        raise ValueError(f"{len(bits)} bits do not split into {nb}-bit floats")
    return tuple(fmt.from_bits(bits[i:i + nb]) for i in range(0, len(bits), nb))


def vector_to_bits(fmt: FloatFormat, vec: Sequence[int]) -> str:
    return "".join(fmt.to_bits(c) for c in vec)


@lru_cache(maxsize=None)
def _softmax_table(p: int, q: int, d_out: int, budget: int) -> dict:
    fmt = get_format(p, q)
    pool = fmt.all_finite() + [fmt.POS_INF, fmt.NEG_INF]
    if len(pool) ** d_out > budget:
        # restrict later coordinates to finite values with the first pinned at zero (shift invariance is
        # not exact in floating point, so this only approximates the reachable set)
        pool_first, pool_rest = [0], fmt.all_finite()
    else:
        pool_first = pool_rest = pool
    table: dict = {}
    for first in pool_first:
        for rest in itertools.product(pool_rest, repeat=d_out - 1):
            z = (first,) + rest
            u = tuple(softmax_row(fmt, list(z)))
            table.setdefault(u, z)
    return table


def softmax_range(fmt: FloatFormat, d_out: int, budget: int = 400000) -> dict:
    """Reachable softmax outputs mapped to one pre-image each."""
    return _softmax_table(fmt.p, fmt.q, d_out, budget)


@dataclass
class Chooser:
    rel: SimilarityRelation
    reachable: object | None = None  # container of reachable vectors, or None for "anything"
    missing: set = field(default_factory=set)

    def __call__(self, v: Vector) -> Vector:
        v = tuple(v)
        ok = self.reachable is None or v in self.reachable
        if ok and self.rel.related(v, v):
            return v
        if self.rel.kind == "pairs":
            pool = [u for (a, u) in self.rel.pairs if a == v]
        elif self.reachable is not None:
            pool = self.reachable
        else:
            pool = []
        img = [u for u in self.rel.image(v, pool) if self.reachable is None or u in self.reachable]
        if img:
            return img[0]
        self.missing.add(v)
        return v

    def diagnostics(self) -> list:
        fmt = self.rel.fmt
        return [{"no_related_output": [fmt.to_hex(c) for c in v]} for v in sorted(self.missing)]


# --------------------------------------------------------------------- translations


def transformer_softmax_to_automaton(t: Transformer, rel: SimilarityRelation) -> tuple[CpgAutomaton, Chooser]:
    """Automaton whose outputs are ~-related to softmax(T)."""
    fmt = t.fmt
    from dataclasses import replace
    base = transformer_to_automaton(replace(t, softmax_output=False))
    choose = Chooser(rel)

    def post(bits: str) -> str:
        logits = bits_to_vector(fmt, bits)
        return vector_to_bits(fmt, choose(softmax_row(fmt, list(logits))))

    a = compose_postmap(base, post, base.b, {"kind": "softmax-postmap", "similarity": rel.to_json()})
    return a, choose


def automaton_to_logic_softmax(a: CpgAutomaton, rel: SimilarityRelation, vocab: Vocab,
                               corpus_bound: int = 6, **kwargs):
    """Formula tuple whose (float-reinterpreted) outputs are ~-related to the automaton's."""
    fmt = rel.fmt
    choose = Chooser(rel)

    def out_map(bits: str) -> str:
        return vector_to_bits(fmt, choose(bits_to_vector(fmt, bits)))

    phi, cert = automaton_to_logic(a, vocab, corpus_bound, output_map=out_map, **kwargs)
    return phi, cert, choose


def logic_to_transformer_softmax(phi: FormulaTuple, rel: SimilarityRelation, fmt: FloatFormat,
                                 vocab: Vocab, corpus_bound: int = 6):
    """Transformer with a final softmax whose outputs are ~-related to the tuple's.

    The tuple's output patterns are collected on the corpus; one indicator
    formula per pattern is compiled into the decoder, and the final linear map
    sends each indicator to a softmax pre-image of a related output.
    """
    nb = fmt.nbits
    if len(phi) % nb:
        raise ValueError(f"tuple of length {len(phi)} does not encode {nb}-bit floats")
    d_out = len(phi) // nb
    patterns = sorted({bits for g in enumerate_graphs(vocab, corpus_bound) for bits in eval_tuple_all(phi, g)})
    table = softmax_range(fmt, d_out)
    choose = Chooser(rel, table)
    indicators = []
    targets = []
    for bits in patterns:
        lits = [f if b == "1" else Not(f) for f, b in zip(phi.formulas, bits)]
        indicators.append(And(conj(lits), TOP))
        targets.append(choose(bits_to_vector(fmt, bits)))
    # anything outside the recorded patterns falls back to uniform logits
    indicators.append(And(conj([Not(f) for f in indicators]) if indicators else TOP, TOP))
    fallback = tuple([0] * d_out)
    t, plan = compile_logic(FormulaTuple(tuple(indicators), phi.variant), fmt, vocab.labels)
    d = t.config.d
    w = [[0] * d_out for _ in range(d)]
    for j, ind in enumerate(indicators):
        col = [r[j] for r in t.w_out.rows].index(fmt.ONE)
        u = targets[j] if j < len(targets) else None
        z = table.get(u, fallback) if u is not None else fallback
        for i in range(d_out):
            w[col][i] = z[i]
    from dataclasses import replace
    cfg = replace(t.config, d_out=d_out)
    out = Transformer(cfg, t.em, t.encoder, t.decoder, Mat(w, d_out), tuple([0] * d_out), True).validate()
    plan.extra["softmax_patterns"] = len(patterns)
    plan.extra["diagnostics"] = choose.diagnostics()
    return out, plan, choose
