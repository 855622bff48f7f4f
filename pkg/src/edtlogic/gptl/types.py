"""Modal types as canonical structured values.

A type of depth 0 is the vertex label.  A type of depth d+1 is the label
together with two capped count maps over depth-d types: one for the whole
prefix and one for the suffix vertices before the current vertex (or up to
and including it, for the non-strict variant).  Counts run over 1..k where
k stands for "at least k"; types with count 0 are omitted, which makes the
value canonical.
"""

from __future__ import annotations

from collections import Counter
from typing import NamedTuple, Sequence

from ..wordgraph import TwoSortedGraph
from .syntax import (CORE, NON_STRICT, And, Formula, GPre, Not, Prop, PSuf, PSufGeq, conj,
                     disj)


class TypeValue(NamedTuple):
    label: str
    pre: tuple | None = None  # ((TypeValue, count), ...) sorted; None at depth 0
    suf: tuple | None = None

    @property
    def depth(self) -> int:
        if self.pre is None:
            return 0
        keys = [t for t, _ in self.pre] + [t for t, _ in self.suf]
        if keys:
            return keys[0].depth + 1
        # no neighbour types recorded: depth is still at least 1
        return 1

    def profile(self, labels: Sequence[str]) -> dict[str, bool]:
        return {p: p == self.label for p in labels}

    def project(self, d: int, k: int) -> "TypeValue":
        """The depth-d type implied by this one, for width k and d <= depth."""
        if d == 0:
            return TypeValue(self.label)
        if self.pre is None:
            raise ValueError("cannot project a depth-0 type upward")

        def merge(items):
            acc: dict = {}
            for t, m in items:
                key = t.project(d - 1, k)
                acc[key] = min(acc.get(key, 0) + m, k)
            return tuple(sorted(acc.items()))

        return TypeValue(self.label, merge(self.pre), merge(self.suf))


def _capped(types: Sequence[TypeValue], k: int) -> tuple:
    c = Counter(types)
    return tuple(sorted((t, min(m, k)) for t, m in c.items()))


def types_by_depth(g: TwoSortedGraph, k: int, d: int, variant: str = CORE) -> list[list[TypeValue]]:
    """``out[t][v-1]`` is the width-k depth-t type of vertex v, for t = 0..d."""
    if k < 1 or d < 0:
        raise ValueError("types need k >= 1 and d >= 0")
    if variant not in (CORE, NON_STRICT):
        raise ValueError(f"unknown variant {variant!r}")
    labels = g.labels
    n = len(labels)
    b = g.bos - 1
    layers = [[TypeValue(lab) for lab in labels]]
    intern: dict = {}
    for _ in range(d):
        prev = layers[-1]
        pre = _capped(prev[:b], k)
        cur = []
        for i in range(n):
            if i < b:
                suf = ()
            else:
                hi = i + 1 if variant == NON_STRICT else i
                suf = _capped(prev[b:hi], k)
            t = TypeValue(labels[i], pre, suf)
            cur.append(intern.setdefault(t, t))
        layers.append(cur)
    return layers


def type_of(g: TwoSortedGraph, v: int, k: int, d: int, variant: str = CORE) -> TypeValue:
    return types_by_depth(g, k, d, variant)[d][v - 1]


def type_table(g: TwoSortedGraph, k: int, d: int, variant: str = CORE) -> list[TypeValue]:
    return types_by_depth(g, k, d, variant)[d]


class TypeRenderer:
    """Render TypeValues as formulae, sharing work across calls."""

    def __init__(self, labels: Sequence[str], k: int, variant: str = CORE):
        self.labels = tuple(labels)
        self.k = k
        self.variant = variant
        self._memo: dict = {}

    def render(self, t: TypeValue) -> Formula:
        f = self._memo.get(t)
        if f is None:
            f = self._memo[t] = self._render(t)
        return f

    __call__ = render

    def profile(self, label: str) -> Formula:
        if label not in self.labels:
            raise ValueError(f"label {label!r} not among {self.labels}")
        return conj([Prop(label)] + [Not(Prop(p)) for p in self.labels if p != label])

    def _render(self, t: TypeValue) -> Formula:
        parts = [self.profile(t.label)]
        if t.pre is None:
            return parts[0]
        k = self.k
        for sigma, c in t.pre:
            s = self.render(sigma)
            parts.append(GPre(c, s) if c >= k else And(GPre(c, s), Not(GPre(c + 1, s))))
        parts.append(Not(GPre(1, Not(disj([self.render(s) for s, _ in t.pre])))))
        for sigma, c in t.suf:
            s = self.render(sigma)
            parts.append(self.past_at_least(c, s) if c >= k
                         else And(self.past_at_least(c, s), Not(self.past_at_least(c + 1, s))))
        parts.append(Not(self.past_at_least(1, Not(disj([self.render(s) for s, _ in t.suf])))))
        return conj(parts)

    def past_at_least(self, c: int, f: Formula) -> Formula:
        """At least c suffix vertices before (or, non-strict, up to) the current one satisfy f."""
        if self.variant == NON_STRICT:
            return PSufGeq(c, f)
        # the counting abbreviation needs the conjunct: one more f-vertex, with c before it
        out = PSuf(f)
        for _ in range(c - 1):
            out = PSuf(And(f, out))
        return out


def render_type_formula(t: TypeValue, labels: Sequence[str], k: int, variant: str = CORE) -> Formula:
    return TypeRenderer(labels, k, variant).render(t)
