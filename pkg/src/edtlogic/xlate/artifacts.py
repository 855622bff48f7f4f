"""File round-trips for automata produced by the translations.

Translated automata have intensional transition functions.  Their JSON keeps
the header and a description of ``delta``, plus a ``source`` entry holding
whatever the translation started from; loading rebuilds the automaton by
re-running that translation.
"""

from __future__ import annotations

import json
from typing import Mapping

from ..cpga import AutomatonError, CpgAutomaton, automaton_from_json, automaton_to_json
from ..edt import transformer_from_json, transformer_to_json
from ..floatlab import parse_format
from ..gptl.parser import parse_tuple


def automaton_artifact(a: CpgAutomaton, source: Mapping | None = None) -> dict:
    data = automaton_to_json(a)
    if source is not None:
        data["source"] = dict(source)
    return data


def transformer_source(t) -> dict:
    return {"transformer": transformer_to_json(t)}


def logic_source(phi, fmt, labels) -> dict:
    return {"formulas": phi.render(), "variant": phi.variant, "format": str(fmt), "labels": list(labels)}


def softmax_source(t, rel) -> dict:
    return {"transformer": transformer_to_json(t), "similarity": rel.to_json()}


def _rebuild(data: Mapping) -> CpgAutomaton:
    from .compose import logic_to_automaton
    from .softmax import SimilarityRelation, transformer_softmax_to_automaton
    from .tf2cpg import transformer_to_automaton

    kind = data["delta"].get("kind")
    src = data.get("source")
    if not isinstance(src, Mapping):
        raise AutomatonError(f"intensional automaton of kind {kind!r} carries no source")
    if kind == "transformer-simulation":
        a = transformer_to_automaton(transformer_from_json(src["transformer"]))
    elif kind == "softmax-postmap":
        t = transformer_from_json(src["transformer"])
        a, _ = transformer_softmax_to_automaton(t, SimilarityRelation.from_json(src["similarity"], t.fmt))
    elif kind == "logic-to-automaton":
        fmt = parse_format(src["format"])
        phi = parse_tuple(src["formulas"], None, src.get("variant"))
        a = logic_to_automaton(phi, fmt, src["labels"])
    else:
        raise AutomatonError(f"cannot rebuild automaton of kind {kind!r}")
    if (a.m_total, a.k, a.n, a.b) != (int(data["m_total"]), int(data["k"]), int(data["n"]), int(data["b"])):
        raise AutomatonError("rebuilt automaton does not match the header in the file")
    return a


def load_automaton(data) -> CpgAutomaton:
    """Tabular or translated automaton from its JSON."""
    if isinstance(data, str):
        data = json.loads(data)
    return automaton_from_json(data, _rebuild)
