"""Exhaustive differential testing over the word-graph corpus."""

from __future__ import annotations

import json
import multiprocessing as mp
from dataclasses import dataclass, field
from typing import Sequence

from .cpga import CpgAutomaton, outputs as automaton_outputs, random_tabular
from .edt import NonBooleanOutput, Transformer, interpret_bitwise, interpret_featurewise, run
from .floatlab import (FloatFormat, representable_halves, saturation_bound, validate_saturation,
                       validate_underflow_k)
from .gptl.semantics import eval_tuple_all
from .gptl.syntax import FormulaTuple, Prop, PSuf, PSufGeq, render
from .wordgraph import TwoSortedGraph, Vocab, enumerate_graphs

BITWISE = "BitWise"
FEATUREWISE = "FeatureWise"


@dataclass(frozen=True)
class SimilarityWrt:
    rel: object  # SimilarityRelation

    def __str__(self):
        return f"SimilarityWrt({self.rel.kind})"


def _describe(model) -> str:
    if isinstance(model, Transformer):
        c = model.config
        return (f"transformer {c.fmt} d={c.d} h={c.h} L1={c.L1} L2={c.L2} "
                f"mask={c.mask_mode} ln={c.ln_mode}" + (" softmax" if model.softmax_output else ""))
    if isinstance(model, CpgAutomaton):
        return f"automaton m={model.m_total} k={model.k} n={model.n} b={model.b} {model.variant}"
    if isinstance(model, FormulaTuple):
        return f"formulas[{len(model)}] {model.variant}"
    return type(model).__name__


def point_outputs(model, g: TwoSortedGraph, interpretation, fmt: FloatFormat | None = None) -> list:
    """Outputs at every suffix vertex under the given interpretation."""
    if isinstance(interpretation, SimilarityWrt):
        from .autoreg import model_outputs
        return model_outputs(model, g, fmt or interpretation.rel.fmt)
    if isinstance(model, Transformer):
        fmt = model.fmt
        rows = run(model, g)
        if interpretation == BITWISE:
            return [interpret_bitwise(r, fmt) for r in rows]
        out = []
        for r in rows:
            try:
                out.append(interpret_featurewise(r, fmt))
            except NonBooleanOutput:
                out.append("non-boolean:" + ",".join(fmt.to_hex(c) for c in r))
        return out
    if isinstance(model, CpgAutomaton):
        return automaton_outputs(model, g)
    if isinstance(model, FormulaTuple):
        return eval_tuple_all(model, g)
    raise TypeError(f"cannot evaluate {type(model).__name__}")


@dataclass
class DiffReport:
    a: str
    b: str
    interpretation: str
    vocab: tuple
    max_len: int
    graphs: int
    points: int
    mismatches: list  # [(graph, vertex, out_a, out_b)] in canonical order
    extra: dict = field(default_factory=dict)
    empty_prefix_graphs: int = 0

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_json(self) -> dict:
        def show(x):
            if isinstance(x, tuple):
                return list(x)
            return x
        return {
            "a": self.a, "b": self.b, "interpretation": self.interpretation,
            "corpus": {"vocab": list(self.vocab), "max_len": self.max_len},
            "passed": self.passed,
            "stats": {"graphs": self.graphs, "points": self.points, "mismatches": len(self.mismatches),
                      "empty_prefix_graphs": self.empty_prefix_graphs},
            # graphs without prefix vertices are admitted but flagged
            "mismatches": [{"graph": g.to_json(), "vertex": v, "a": show(x), "b": show(y),
                            "empty_prefix": not g.prefix}
                           for g, v, x, y in self.mismatches],
            **self.extra,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, default=str) + "\n"


# worker state is inherited through fork so that closures inside automata need no pickling
_JOB: dict = {}


def _compare_chunk(idx: Sequence[int]):
    a, b, interp, fmt, graphs = _JOB["a"], _JOB["b"], _JOB["interp"], _JOB["fmt"], _JOB["graphs"]
    out = []
    for i in idx:
        g = graphs[i]
        oa = point_outputs(a, g, interp, fmt)
        ob = point_outputs(b, g, interp, fmt)
        out.append((i, oa, ob))
    return out


def _collect(a, b, interp, fmt, graphs, jobs: int):
    _JOB.update(a=a, b=b, interp=interp, fmt=fmt, graphs=graphs)
    try:
        if jobs <= 1 or len(graphs) < 2:
            res = _compare_chunk(range(len(graphs)))
        else:
            chunks = [list(range(i, len(graphs), jobs)) for i in range(jobs)]
            with mp.get_context("fork").Pool(jobs) as pool:
                parts = pool.map(_compare_chunk, chunks)
            res = sorted((r for part in parts for r in part), key=lambda r: r[0])
    finally:
        _JOB.clear()
    return res


def diff_check(a, b, interpretation, vocab: Vocab, max_len: int = 6, *, fmt: FloatFormat | None = None,
               jobs: int = 1, names: tuple[str, str] | None = None) -> DiffReport:
    """Compare two models at every suffix vertex of every graph with at most ``max_len`` vertices."""
    graphs = list(enumerate_graphs(vocab, max_len))
    res = _collect(a, b, interpretation, fmt, graphs, jobs)
    mismatches = []
    points = 0
    if isinstance(interpretation, SimilarityWrt):
        rel = interpretation.rel
        rng = sorted({u for _, _, ob in res for u in ob})
        fires: dict = {}
        for i, oa, ob in res:
            g = graphs[i]
            for v, x, y in zip(g.suffix_vertices(), oa, ob):
                points += 1
                f = fires.get(x)
                if f is None:
                    f = fires[x] = any(rel.related(x, u) for u in rng)
                if f and not rel.related(x, y):
                    mismatches.append((g, v, x, y))
        hexv = lambda vec: [rel.fmt.to_hex(c) for c in vec]
        mismatches = [(g, v, hexv(x), hexv(y)) for g, v, x, y in mismatches]
    else:
        for i, oa, ob in res:
            g = graphs[i]
            if len(oa) != len(ob):
                raise ValueError("models disagree on the number of suffix vertices")
            for v, x, y in zip(g.suffix_vertices(), oa, ob):
                points += 1
                if x != y:
                    mismatches.append((g, v, x, y))
    mismatches.sort(key=lambda m: (m[0].sort_key(), m[1]))
    na, nb = names or (_describe(a), _describe(b))
    return DiffReport(na, nb, str(interpretation), tuple(vocab.tokens), max_len, len(graphs), points, mismatches,
                      empty_prefix_graphs=sum(1 for g in graphs if not g.prefix))


class ReportPassed(ValueError):
    pass


def minimize(report: DiffReport):
    """Smallest mismatch by (size, prefix, suffix, vertex)."""
    if report.passed:
        raise ReportPassed("the report has no mismatches")
    return min(report.mismatches, key=lambda m: (m[0].sort_key(), m[1]))


# --------------------------------------------------------------------- property suites


def separation_witness(vocab: Vocab, token: str, max_len: int = 6):
    """First (graph, vertex) where the strict and the non-strict past modality disagree."""
    strict, loose = PSuf(Prop(token)), PSufGeq(1, Prop(token))
    sr, lr = FormulaTuple((strict,), "Core"), FormulaTuple((loose,), "NonStrict")
    for g in enumerate_graphs(vocab, max_len):
        for v, x, y in zip(g.suffix_vertices(), eval_tuple_all(sr, g), eval_tuple_all(lr, g)):
            if x != y:
                return g, v, x, y
    return None


def type_lemma_check(vocab: Vocab, automata: int = 5, k: int = 1, depth: int = 2, max_len: int = 6,
                     seed: int = 0) -> dict:
    from .xlate.cpg2logic import lemma_check
    graphs = list(enumerate_graphs(vocab, max_len))
    out = []
    for i in range(automata):
        a = random_tabular(vocab.labels, 2, k, depth, 1, seed=seed * 1000 + i)
        bad = lemma_check(a, graphs, k, depth)
        out.append({"automaton": i, "seed": seed * 1000 + i, "violations": len(bad),
                    "first": bad[0] if bad else None})
    return {"passed": all(r["violations"] == 0 for r in out), "automata": out,
            "k": k, "depth": depth, "max_len": max_len}


def property_suites(fmt: FloatFormat, *, seed: int = 0, vocab: Vocab | None = None,
                    saturation_trials: int = 10000, max_len: int = 6) -> dict:
    """Float validators, the type lemma and the strict/non-strict separation, as one report."""
    from .xlate.gadgets import supported_counts
    vocab = vocab or Vocab.of("a b")
    kstar = saturation_bound(fmt)
    sat = validate_saturation(fmt, kstar, saturation_trials, seed)
    verdicts = {k: validate_underflow_k(fmt, k).valid for k in representable_halves(fmt)}
    validated = sorted(k for k, ok in verdicts.items() if ok)
    supported = supported_counts(fmt)
    sep = separation_witness(vocab, vocab.tokens[0], max_len)
    lemma = type_lemma_check(vocab, 5, 1, 2, max_len, seed)
    return {
        "format": str(fmt),
        "seed": seed,
        "saturation": {"k": kstar, "trials": saturation_trials, "passed": sat.holds, "witness": sat.witness},
        "underflow": {"validated": validated, "rejected": sorted(k for k, ok in verdicts.items() if not ok)},
        "supported_counts": {"counts": supported,
                             "matches_validated": sorted(set(supported) - {0, 1}) == validated},
        "separation": {"passed": sep is not None,
                       "witness": None if sep is None else {"graph": sep[0].to_json(), "vertex": sep[1],
                                                            "strict": sep[2], "non_strict": sep[3],
                                                            "formulas": [render(PSuf(Prop(vocab.tokens[0]))),
                                                                         render(PSufGeq(1, Prop(vocab.tokens[0])))]}},
        "type_lemma": lemma,
    }
