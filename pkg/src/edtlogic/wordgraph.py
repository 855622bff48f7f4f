"""Two-sorted word graphs: a prefix, one BOS vertex, then the suffix."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

BOS = "BOS"
EOS = "EOS"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]

    def __post_init__(self):
        toks = tuple(self.tokens)
        object.__setattr__(self, "tokens", toks)
        if len(set(toks)) != len(toks):
            raise GraphError(f"duplicate tokens in vocabulary {toks}")
        for t in (BOS, EOS):
            if t in toks:
                raise GraphError(f"{t} is reserved and cannot be a vocabulary token")
        for t in toks:
            if not t or not t.isidentifier():
                raise GraphError(f"token {t!r} is not an identifier")

    @classmethod
    def of(cls, tokens: Sequence[str] | str) -> "Vocab":
        if isinstance(tokens, str):
            tokens = [t for t in tokens.replace(",", " ").split() if t]
        return cls(tuple(tokens))

    @property
    def labels(self) -> tuple[str, ...]:
        """Vertex labels: the tokens plus BOS."""
        return self.tokens + (BOS,)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self.tokens

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True)
class TwoSortedGraph:
    """Vertices are numbered 1..n; the BOS vertex sits at ``len(prefix) + 1``."""

    prefix: tuple[str, ...]
    suffix: tuple[str, ...]  # tokens after BOS

    @property
    def labels(self) -> tuple[str, ...]:
        return self.prefix + (BOS,) + self.suffix

    @property
    def n(self) -> int:
        return len(self.prefix) + 1 + len(self.suffix)

    @property
    def bos(self) -> int:
        return len(self.prefix) + 1

    def label(self, v: int) -> str:
        if not 1 <= v <= self.n:
            raise GraphError(f"vertex {v} not in 1..{self.n}")
        return self.labels[v - 1]

    def prefix_vertices(self) -> range:
        return range(1, self.bos)

    def suffix_vertices(self) -> range:
        return range(self.bos, self.n + 1)

    def in_suffix(self, v: int) -> bool:
        return self.bos <= v <= self.n

    def prefix_tokens(self) -> tuple[str, ...]:
        return self.prefix

    def suffix_tokens(self) -> tuple[str, ...]:
        """The suffix as a token sequence, starting with BOS."""
        return (BOS,) + self.suffix

    def sort_key(self):
        return (self.n, self.prefix, self.suffix)

    def to_json(self) -> dict:
        return {"prefix": list(self.prefix), "suffix": list(self.suffix)}

    def __str__(self):
        return " ".join(self.labels)


def make_graph(vocab: Vocab, prefix: Sequence[str], suffix_after_bos: Sequence[str]) -> TwoSortedGraph:
    for tok in itertools.chain(prefix, suffix_after_bos):
        if tok not in vocab:
            raise GraphError(f"unknown token {tok!r}")
    return TwoSortedGraph(tuple(prefix), tuple(suffix_after_bos))


def graph_from_json(vocab: Vocab, data) -> TwoSortedGraph:
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict) or set(data) - {"prefix", "suffix"}:
        raise GraphError("graph JSON must be an object with 'prefix' and 'suffix'")
    return make_graph(vocab, data.get("prefix", []), data.get("suffix", []))


def count_graphs(vocab_size: int, max_total_len: int) -> int:
    # a graph with n vertices has n BOS positions and n-1 free tokens
    return sum(n * vocab_size ** (n - 1) for n in range(1, max_total_len + 1))


def enumerate_graphs(vocab: Vocab, max_total_len: int, min_total_len: int = 1) -> Iterator[TwoSortedGraph]:
    """All graphs with min..max vertices, ordered by (size, prefix, suffix)."""
    if max_total_len < 1:
        raise GraphError("max_total_len must be at least 1")
    toks = vocab.tokens
    for n in range(max(1, min_total_len), max_total_len + 1):
        graphs = []
        for plen in range(n):
            for pre in itertools.product(toks, repeat=plen):
                for suf in itertools.product(toks, repeat=n - 1 - plen):
                    graphs.append(TwoSortedGraph(pre, suf))
        graphs.sort(key=TwoSortedGraph.sort_key)
        yield from graphs


def corpus(vocab: Vocab, max_total_len: int, min_total_len: int = 1) -> list[TwoSortedGraph]:
    return list(enumerate_graphs(vocab, max_total_len, min_total_len))


def pointed(graphs) -> Iterator[tuple[TwoSortedGraph, int]]:
    """Every (graph, suffix vertex) pair."""
    for g in graphs:
        for v in g.suffix_vertices():
            yield g, v
