"""Truth of formulae at the vertices of a two-sorted graph."""

from __future__ import annotations

from typing import Sequence

from ..wordgraph import GraphError, TwoSortedGraph
from .syntax import Formula, FormulaTuple, subformulae


def truth_table(fs: Sequence[Formula], g: TwoSortedGraph, memo: dict | None = None) -> dict:
    """Map every subformula of ``fs`` to its truth vector over vertices 1..n.

    Vectors are tuples indexed from 0 (vertex v is position v-1).
    """
    if memo is None:
        memo = {}
    labels = g.labels
    n = len(labels)
    b = g.bos - 1  # 0-based BOS position
    for f in fs:
        for node in subformulae(f):
            if node in memo:
                continue
            k = node.kind
            if k == "bot":
                val = (False,) * n
            elif k == "prop":
                t = node.token
                val = tuple(lab == t for lab in labels)
            elif k == "not":
                val = tuple(not x for x in memo[node.sub])
            elif k == "and":
                x, y = memo[node.args[0]], memo[node.args[1]]
                val = tuple(p and q for p, q in zip(x, y))
            elif k == "gpre":
                cnt = sum(memo[node.sub][:b])
                val = (cnt >= node.count,) * n
            elif k == "psuf":
                sub = memo[node.sub]
                out = [False] * n
                seen = False
                for i in range(b, n):
                    out[i] = seen
                    seen = seen or sub[i]
                val = tuple(out)
            elif k == "psufgeq":
                sub = memo[node.sub]
                out = [False] * n
                cnt = 0
                for i in range(b, n):
                    cnt += sub[i]
                    out[i] = cnt >= node.count
                val = tuple(out)
            else:  # pragma: no cover
                raise ValueError(f"unknown formula kind {k}")
            memo[node] = val
    return memo


def evaluate(f: Formula, g: TwoSortedGraph, v: int) -> bool:
    if not 1 <= v <= g.n:
        raise GraphError(f"vertex {v} not in 1..{g.n}")
    return truth_table([f], g)[f][v - 1]


def eval_tuple(phi: FormulaTuple | Sequence[Formula], g: TwoSortedGraph, v: int) -> str:
    if not g.in_suffix(v):
        raise GraphError(f"vertex {v} is not in the suffix (BOS is vertex {g.bos})")
    fs = list(phi)
    table = truth_table(fs, g)
    return "".join("1" if table[f][v - 1] else "0" for f in fs)


def eval_tuple_all(phi: FormulaTuple | Sequence[Formula], g: TwoSortedGraph) -> list[str]:
    """Output bits at every suffix vertex, in vertex order."""
    fs = list(phi)
    table = truth_table(fs, g)
    return ["".join("1" if table[f][v - 1] else "0" for f in fs) for v in g.suffix_vertices()]
