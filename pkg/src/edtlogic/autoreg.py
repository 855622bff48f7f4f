"""Autoregressive generation and equivalence up to a similarity relation.

Generation starts from the suffix ``[BOS]`` and repeats: run the model,
take the distribution at the last suffix position, select a token, stop on
EOS or append it and continue.  The model is re-run from scratch at every
step; nothing is carried over between steps.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .cpga import CpgAutomaton, outputs as automaton_outputs
from .edt import Transformer, run as run_transformer, softmax_row
from .floatlab import FloatFormat
from .gptl.semantics import eval_tuple_all
from .gptl.syntax import FormulaTuple
from .wordgraph import EOS, TwoSortedGraph, Vocab, enumerate_graphs
from .xlate.softmax import SimilarityRelation, bits_to_vector

__all__ = [
    "ArgmaxLowIndex", "SeededSample", "GenerationTrace", "DimensionMismatch", "Verdict",
    "model_outputs", "step_logits", "step_distribution", "generate", "equivalent_wrt",
]


class DimensionMismatch(ValueError):
    pass


def model_format(model, fmt: FloatFormat | None = None) -> FloatFormat:
    if isinstance(model, Transformer):
        return model.fmt
    if fmt is None:
        raise ValueError("automata and formula tuples need an explicit float format")
    return fmt


def model_outputs(model, g: TwoSortedGraph, fmt: FloatFormat | None = None) -> list[tuple]:
    """Per suffix vertex, the model's output as a vector of float codes.

    Bit-string outputs (automata, formula tuples) are cut into (p+q+1)-bit floats.
    """
    if isinstance(model, Transformer):
        return [tuple(r) for r in run_transformer(model, g)]
    fmt = model_format(model, fmt)
    if isinstance(model, CpgAutomaton):
        return [bits_to_vector(fmt, b) for b in automaton_outputs(model, g)]
    if isinstance(model, FormulaTuple):
        return [bits_to_vector(fmt, b) for b in eval_tuple_all(model, g)]
    raise TypeError(f"not a model: {type(model).__name__}")


def _has_softmax(model) -> bool:
    return isinstance(model, Transformer) and model.softmax_output


def step_logits(model, g: TwoSortedGraph, fmt: FloatFormat | None = None) -> tuple:
    return model_outputs(model, g, fmt)[-1]


def step_distribution(model, g: TwoSortedGraph, vocab: Vocab, fmt: FloatFormat | None = None) -> list[int]:
    """Distribution over the vocabulary followed by EOS, at the last suffix position."""
    fmt = model_format(model, fmt)
    row = step_logits(model, g, fmt)
    if len(row) != len(vocab) + 1:
        raise DimensionMismatch(f"model emits {len(row)} values, vocabulary plus EOS has {len(vocab) + 1}")
    # a trailing softmax has already been applied by the model itself
    return list(row) if _has_softmax(model) else softmax_row(fmt, list(row))


# --------------------------------------------------------------------- select


@dataclass(frozen=True)
class ArgmaxLowIndex:
    """Largest probability, lowest index on ties; NaN entries never win."""

    def start(self):
        return self

    def select(self, fmt: FloatFormat, dist: Sequence[int]) -> int:
        best = None
        for i, c in enumerate(dist):
            v = fmt.value(c)
            if v != v:
                continue
            if best is None or v > best[0]:
                best = (v, i)
        return 0 if best is None else best[1]

    def to_json(self):
        return {"policy": "argmax"}


@dataclass
class SeededSample:
    """Sample proportionally to the exact probability values with a private RNG."""

    seed: int = 0
    _rng: random.Random | None = field(default=None, repr=False, compare=False)

    def start(self):
        return SeededSample(self.seed, random.Random(self.seed))

    def select(self, fmt: FloatFormat, dist: Sequence[int]) -> int:
        rng = self._rng if self._rng is not None else random.Random(self.seed)
        weights = []
        for c in dist:
            v = fmt.value(c)
            weights.append(v if isinstance(v, Fraction) and v > 0 else Fraction(0))
        total = sum(weights)
        r = Fraction(rng.getrandbits(53), 1 << 53)
        if total == 0:
            return int(r * len(dist))
        acc = Fraction(0)
        for i, w in enumerate(weights):
            acc += w / total
            if r < acc:
                return i
        return max(i for i, w in enumerate(weights) if w > 0)

    def to_json(self):
        return {"policy": "sample", "seed": self.seed}


# --------------------------------------------------------------------- generation


@dataclass
class Step:
    n: int  # number of suffix vertices (BOS included) when the step ran
    dist: tuple
    token: str


@dataclass
class GenerationTrace:
    prefix: tuple
    steps: list
    reason: str  # "EOS" or "MaxSteps"

    @property
    def tokens(self) -> list[str]:
        return [s.token for s in self.steps]

    def to_json(self, fmt: FloatFormat) -> list:
        return [{"n_t": s.n, "p_t": [fmt.to_hex(c) for c in s.dist], "y_t": s.token} for s in self.steps]


def generate(model, vocab: Vocab, prefix: Sequence[str], policy=None, max_steps: int = 16,
             fmt: FloatFormat | None = None) -> GenerationTrace:
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    fmt = model_format(model, fmt)
    policy = (policy or ArgmaxLowIndex()).start()
    choices = list(vocab.tokens) + [EOS]
    prefix = tuple(prefix)
    suffix: list[str] = []
    steps = []
    while True:
        g = TwoSortedGraph(prefix, tuple(suffix))
        dist = step_distribution(model, g, vocab, fmt)
        y = choices[policy.select(fmt, dist)]
        steps.append(Step(len(suffix) + 1, tuple(dist), y))
        if y == EOS:
            return GenerationTrace(prefix, steps, "EOS")
        if len(steps) >= max_steps:
            return GenerationTrace(prefix, steps, "MaxSteps")
        suffix.append(y)


# --------------------------------------------------------------------- equivalence


@dataclass
class Verdict:
    equivalent: bool
    points: int
    violations: list
    range_size: int
    note: str = "range of the target approximated by its outputs on the corpus"

    def to_json(self, fmt: FloatFormat) -> dict:
        hexv = lambda vec: [fmt.to_hex(c) for c in vec]
        return {
            "equivalent": self.equivalent, "points": self.points, "range_size": self.range_size,
            "note": self.note,
            "violations": [{"graph": g.to_json(), "vertex": v, "a": hexv(x), "b": hexv(y)}
                           for g, v, x, y in self.violations],
        }


def _one_way(outs_a, outs_b, rel: SimilarityRelation):
    rng = sorted({u for per in outs_b.values() for u in per})
    fires: dict = {}
    bad = []
    points = 0
    for g, per_a in outs_a.items():
        per_b = outs_b[g]
        for v, va, vb in zip(g.suffix_vertices(), per_a, per_b):
            points += 1
            f = fires.get(va)
            if f is None:
                f = fires[va] = any(rel.related(va, u) for u in rng)
            if f and not rel.related(va, vb):
                bad.append((g, v, va, vb))
    return points, bad, len(rng)


def equivalent_wrt(a, b, rel: SimilarityRelation, vocab: Vocab, max_len: int = 6, *,
                   symmetric: bool = False, fmt: FloatFormat | None = None) -> Verdict:
    """Check the similarity-equivalence condition at every corpus point."""
    fmt = fmt or rel.fmt
    graphs = list(enumerate_graphs(vocab, max_len))
    outs_a = {g: model_outputs(a, g, fmt) for g in graphs}
    outs_b = {g: model_outputs(b, g, fmt) for g in graphs}
    points, bad, size = _one_way(outs_a, outs_b, rel)
    if symmetric:
        _, bad2, _ = _one_way(outs_b, outs_a, rel)
        bad += [(g, v, y, x) for g, v, x, y in bad2]
    bad.sort(key=lambda r: (r[0].sort_key(), r[1]))
    return Verdict(not bad, points, bad, size)
