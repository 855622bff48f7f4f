"""Back-to-back translations between formulas, automata and transformers."""

from __future__ import annotations

from typing import Sequence

from ..cpga import CpgAutomaton, compose_postmap
from ..edt import Transformer
from ..floatlab import FloatFormat
from ..wordgraph import Vocab
from .cpg2logic import automaton_to_logic
from .logic2tf import compile_logic
from .tf2cpg import transformer_to_automaton


def float_bits_to_booleans(fmt: FloatFormat, d_out: int):
    """Post-map turning d_out bit-encoded floats into d_out bits (1 iff the float is 1)."""
    nb = fmt.nbits
    one = fmt.to_bits(fmt.ONE)

    def f(bits: str) -> str:
        return "".join("1" if bits[i * nb:(i + 1) * nb] == one else "0" for i in range(d_out))

    return f


def logic_to_automaton(phi, fmt: FloatFormat, labels: Sequence[str]) -> CpgAutomaton:
    """Formula tuple -> transformer -> automaton, plus one round collapsing floats to bits."""
    t, _ = compile_logic(phi, fmt, labels)
    a = transformer_to_automaton(t)
    d_out = t.config.d_out
    return compose_postmap(a, float_bits_to_booleans(fmt, d_out), d_out,
                           {"kind": "logic-to-automaton", "format": str(fmt)})


def automaton_to_transformer(a: CpgAutomaton, fmt: FloatFormat, vocab: Vocab, corpus_bound: int = 6,
                             **kwargs) -> tuple[Transformer, object]:
    """Automaton -> formula tuple -> transformer; returns the transformer and the certificate."""
    phi, cert = automaton_to_logic(a, vocab, corpus_bound, **kwargs)
    t, _ = compile_logic(phi, fmt, vocab.labels)
    return t, cert
