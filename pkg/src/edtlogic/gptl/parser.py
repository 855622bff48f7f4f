"""Recursive-descent parser for the concrete formula syntax.

Grammar (whitespace insensitive)::

    F ::= 'bot' | IDENT | '!' F | '(' F '&' F ')'
        | '<G>=' INT '[' F ']' | '<P>[' F ']' | '<P>=' INT '[' F ']'
"""

from __future__ import annotations

import re
from typing import Iterable

from .syntax import (CORE, And, Bot, Formula, FormulaTuple, GPre, Not, Prop, PSuf,
                     PSufGeq)

_TOKEN = re.compile(r"\s*(?:(<G>=)|(<P>=)|(<P>)|([A-Za-z_][A-Za-z0-9_]*)|(\d+)|(.))")


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int, text: str):
        super().__init__(f"{msg} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


class UnknownToken(ValueError):
    pass


def _lex(text: str):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m.end() == pos or (m.lastindex is None):
            break
        start = m.start(m.lastindex)
        kind = ("gpre", "pgeq", "psuf", "ident", "int", "sym")[m.lastindex - 1]
        out.append((kind, m.group(m.lastindex), start))
        pos = m.end()
        if text[pos:].strip() == "":
            break
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, labels: Iterable[str] | None):
        self.text = text
        self.toks = _lex(text)
        self.i = 0
        self.labels = None if labels is None else set(labels)

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            got = tok[1] or "end of input"
            raise FormulaSyntaxError(f"expected {want!r}, found {got!r}", tok[2], self.text)
        self.i += 1
        return tok

    def formula(self) -> Formula:
        kind, val, pos = self.peek()
        if kind == "ident":
            self.i += 1
            if val == "bot":
                return Bot()
            if self.labels is not None and val not in self.labels:
                raise UnknownToken(f"unknown token {val!r} at position {pos}")
            return Prop(val)
        if kind == "sym" and val == "!":
            self.i += 1
            return Not(self.formula())
        if kind == "sym" and val == "(":
            self.i += 1
            left = self.formula()
            self.take("sym", "&")
            right = self.formula()
            self.take("sym", ")")
            return And(left, right)
        if kind in ("gpre", "pgeq"):
            self.i += 1
            k = int(self.take("int")[1])
            self.take("sym", "[")
            body = self.formula()
            self.take("sym", "]")
            if kind == "gpre":
                return GPre(k, body)
            if k < 1:
                raise FormulaSyntaxError("non-strict past count must be at least 1", pos, self.text)
            return PSufGeq(k, body)
        if kind == "psuf":
            self.i += 1
            self.take("sym", "[")
            body = self.formula()
            self.take("sym", "]")
            return PSuf(body)
        raise FormulaSyntaxError(f"unexpected {val or 'end of input'!r}", pos, self.text)


def parse_formula(text: str, labels: Iterable[str] | None = None) -> Formula:
    """Parse one formula.  ``labels`` (if given) restricts the proposition names."""
    p = _Parser(text, labels)
    f = p.formula()
    p.take("eof")
    return f


def parse_tuple(text: str, labels: Iterable[str] | None = None, variant: str | None = None) -> FormulaTuple:
    """One formula per non-blank line; lines starting with '#' are comments."""
    fs = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        fs.append(parse_formula(s, labels))
    return FormulaTuple.of(fs, variant)
