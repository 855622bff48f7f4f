"""The temporal logic: syntax, parsing, evaluation and modal types."""

from .parser import FormulaSyntaxError, UnknownToken, parse_formula, parse_tuple
from .semantics import eval_tuple, eval_tuple_all, evaluate, truth_table
from .syntax import (BOT, CORE, NON_STRICT, TOP, And, Bot, Formula, FormulaTuple, GPre, Not, Or,
                     Prop, PSuf, PSufGeq, Top, conj, disj, modal_depth, render, subformulae,
                     tokens_of, variant_of, width)
from .types import (TypeRenderer, TypeValue, render_type_formula, type_of, type_table,
                    types_by_depth)

__all__ = [
    "BOT", "CORE", "NON_STRICT", "TOP", "And", "Bot", "Formula", "FormulaSyntaxError",
    "FormulaTuple", "GPre", "Not", "Or", "Prop", "PSuf", "PSufGeq", "Top", "TypeRenderer",
    "TypeValue", "UnknownToken", "conj", "disj", "eval_tuple", "eval_tuple_all", "evaluate",
    "modal_depth", "parse_formula", "parse_tuple", "render", "render_type_formula",
    "subformulae", "tokens_of", "truth_table", "type_of", "type_table", "types_by_depth",
    "variant_of", "width",
]
