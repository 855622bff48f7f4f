"""Formula trees for the logic and its non-strict variant.

Nodes are hash-consed: building the same tree twice returns the same object,
so identity comparison and identity hashing are structural.  This keeps
evaluation memo tables cheap even for the large rendered type formulae.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterator, Sequence

CORE = "Core"
NON_STRICT = "NonStrict"
VARIANTS = (CORE, NON_STRICT)

_lock = threading.Lock()
_interned: dict = {}


class Formula:
    __slots__ = ("kind", "args", "_size", "__weakref__")

    kind: str
    args: tuple

    def __new__(cls, kind: str, *args):
        key = (kind,) + tuple(id(a) if isinstance(a, Formula) else a for a in args)
        node = _interned.get(key)
        if node is not None:
            return node
        with _lock:
            node = _interned.get(key)
            if node is None:
                node = object.__new__(cls)
                object.__setattr__(node, "kind", kind)
                object.__setattr__(node, "args", args)
                object.__setattr__(node, "_size", None)
                # children stay alive through `args`, so their ids are stable
                _interned[key] = node
        return node

    def __setattr__(self, name, value):
        raise AttributeError("formulae are immutable")

    def __reduce__(self):
        return (Formula, (self.kind,) + self.args)

    def __repr__(self):
        return f"Formula({render(self)!r})"

    def __str__(self):
        return render(self)

    @property
    def children(self) -> tuple["Formula", ...]:
        return tuple(a for a in self.args if isinstance(a, Formula))

    @property
    def sub(self) -> "Formula":
        return self.args[-1]

    @property
    def count(self) -> int:
        return self.args[0]

    @property
    def token(self) -> str:
        return self.args[0]

    def size(self) -> int:
        """Number of distinct subformulae (shared nodes counted once)."""
        return len(subformulae(self))


BOT = Formula("bot")


def Bot() -> Formula:
    return BOT


def Prop(token: str) -> Formula:
    if not isinstance(token, str) or not token:
        raise ValueError(f"bad proposition {token!r}")
    return Formula("prop", token)


def Not(f: Formula) -> Formula:
    return Formula("not", f)


def And(f: Formula, g: Formula) -> Formula:
    return Formula("and", f, g)


def GPre(k: int, f: Formula) -> Formula:
    """At least ``k`` prefix vertices satisfy ``f``."""
    if not isinstance(k, int) or k < 0:
        raise ValueError(f"count must be a non-negative integer, got {k!r}")
    return Formula("gpre", k, f)


def PSuf(f: Formula) -> Formula:
    """Some suffix vertex strictly before the current one satisfies ``f``."""
    return Formula("psuf", f)


def PSufGeq(k: int, f: Formula) -> Formula:
    """At least ``k`` suffix vertices up to and including the current one satisfy ``f``."""
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"non-strict past count must be at least 1, got {k!r}")
    return Formula("psufgeq", k, f)


TOP = Not(BOT)


def Top() -> Formula:
    return TOP


def Or(f: Formula, g: Formula) -> Formula:
    return Not(And(Not(f), Not(g)))


def conj(items: Sequence[Formula]) -> Formula:
    """Balanced conjunction; the empty conjunction is true."""
    items = list(items)
    if not items:
        return TOP
    while len(items) > 1:
        items = [And(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
                 for i in range(0, len(items), 2)]
    return items[0]


def disj(items: Sequence[Formula]) -> Formula:
    """Balanced disjunction; the empty disjunction is false."""
    items = list(items)
    if not items:
        return BOT
    return Not(conj([Not(f) for f in items]))


def subformulae(f: Formula) -> list[Formula]:
    """Distinct subformulae in post-order (children before parents)."""
    seen = set()
    out = []
    stack = [(f, False)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
            continue
        if node in seen:
            continue
        seen.add(node)
        stack.append((node, True))
        for c in reversed(node.children):
            if c not in seen:
                stack.append((c, False))
    # a node can be pushed twice before being finished; keep the first finish
    uniq, mark = [], set()
    for n in out:
        if n not in mark:
            mark.add(n)
            uniq.append(n)
    return uniq


def iter_nodes(fs: Sequence[Formula]) -> Iterator[Formula]:
    seen = set()
    for f in fs:
        for n in subformulae(f):
            if n not in seen:
                seen.add(n)
                yield n


def modal_depth(f: Formula) -> int:
    memo: dict = {}
    for n in subformulae(f):
        k = n.kind
        if k in ("bot", "prop"):
            memo[n] = 0
        elif k == "not":
            memo[n] = memo[n.sub]
        elif k == "and":
            memo[n] = max(memo[n.args[0]], memo[n.args[1]])
        else:
            memo[n] = memo[n.sub] + 1
    return memo[f]


def width(f: Formula) -> int:
    """Largest count threshold; a plain past modality counts as 1."""
    memo: dict = {}
    for n in subformulae(f):
        k = n.kind
        if k in ("bot", "prop"):
            memo[n] = 0
        elif k == "not":
            memo[n] = memo[n.sub]
        elif k == "and":
            memo[n] = max(memo[n.args[0]], memo[n.args[1]])
        elif k == "psuf":
            memo[n] = max(memo[n.sub], 1)
        else:
            memo[n] = max(memo[n.sub], n.count)
    return memo[f]


def tokens_of(f: Formula) -> set[str]:
    return {n.token for n in subformulae(f) if n.kind == "prop"}


def variant_of(f: Formula) -> str | None:
    """The variant a formula needs, or None if it fits both."""
    kinds = {n.kind for n in subformulae(f)}
    if "psuf" in kinds and "psufgeq" in kinds:
        raise ValueError("a formula cannot mix the strict and non-strict past modalities")
    if "psufgeq" in kinds:
        return NON_STRICT
    if "psuf" in kinds:
        return CORE
    return None


def render(f: Formula) -> str:
    """Concrete syntax accepted by the parser."""
    memo: dict = {}
    for n in subformulae(f):
        k = n.kind
        if k == "bot":
            s = "bot"
        elif k == "prop":
            s = n.token
        elif k == "not":
            s = "!" + memo[n.sub]
        elif k == "and":
            s = f"({memo[n.args[0]]} & {memo[n.args[1]]})"
        elif k == "gpre":
            s = f"<G>={n.count}[{memo[n.sub]}]"
        elif k == "psuf":
            s = f"<P>[{memo[n.sub]}]"
        else:
            s = f"<P>={n.count}[{memo[n.sub]}]"
        memo[n] = s
    return memo[f]


@dataclass(frozen=True)
class FormulaTuple:
    formulas: tuple[Formula, ...]
    variant: str = CORE

    def __post_init__(self):
        fs = tuple(self.formulas)
        object.__setattr__(self, "formulas", fs)
        if not fs:
            raise ValueError("a formula tuple needs at least one formula")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        for f in fs:
            need = variant_of(f)
            if need is not None and need != self.variant:
                what = "<P>=k" if need == NON_STRICT else "<P>"
                raise ValueError(f"{what} is not allowed in a {self.variant} tuple: {render(f)}")

    @classmethod
    def of(cls, formulas: Sequence[Formula], variant: str | None = None) -> "FormulaTuple":
        if variant is None:
            needs = {variant_of(f) for f in formulas} - {None}
            if len(needs) > 1:
                raise ValueError("tuple mixes strict and non-strict past modalities")
            variant = needs.pop() if needs else CORE
        return cls(tuple(formulas), variant)

    def __len__(self):
        return len(self.formulas)

    def __iter__(self):
        return iter(self.formulas)

    def __getitem__(self, i):
        return self.formulas[i]

    def render(self) -> str:
        return "\n".join(render(f) for f in self.formulas) + "\n"

    def modal_depth(self) -> int:
        return max(modal_depth(f) for f in self.formulas)

    def width(self) -> int:
        return max(width(f) for f in self.formulas)
