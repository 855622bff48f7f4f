"""Translations between formula tuples, transformers and automata."""

from .artifacts import automaton_artifact, load_automaton
from .compose import automaton_to_transformer, float_bits_to_booleans, logic_to_automaton
from .cpg2logic import (Certificate, EmptyCorpus, LemmaViolation, TypeExplosion, automaton_to_logic,
                        lemma_check, verify_heldout)
from .gadgets import (CountStrategy, UnsupportedCount, UnsupportedVariant, check_gadget, count_strategy,
                      supported_counts, underflow_validated)
from .logic2tf import CompilePlan, compile_logic, logic_to_transformer
from .softmax import (Chooser, NoRelatedOutput, SimilarityRelation, automaton_to_logic_softmax,
                      logic_to_transformer_softmax, softmax_range, transformer_softmax_to_automaton)
from .tf2cpg import SoftmaxHeadError, transformer_to_automaton

__all__ = [
    "Certificate", "Chooser", "CompilePlan", "CountStrategy", "EmptyCorpus", "LemmaViolation",
    "NoRelatedOutput", "SimilarityRelation", "SoftmaxHeadError", "TypeExplosion", "UnsupportedCount",
    "UnsupportedVariant", "automaton_artifact", "automaton_to_logic", "automaton_to_logic_softmax",
    "automaton_to_transformer", "check_gadget", "compile_logic", "count_strategy",
    "float_bits_to_booleans", "lemma_check", "load_automaton", "logic_to_automaton",
    "logic_to_transformer", "logic_to_transformer_softmax", "softmax_range", "supported_counts",
    "transformer_softmax_to_automaton", "transformer_to_automaton", "underflow_validated",
    "verify_heldout",
]
