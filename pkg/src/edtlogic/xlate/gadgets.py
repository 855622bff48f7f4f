"""Attention and MLP gadgets used by the logic-to-transformer compiler.

Every gadget is described as sparse weights over named columns and checked
exhaustively: the counts of satisfying and non-satisfying key vertices range
over 0..B, where B is the format's saturation bound, so by saturation the
check covers graphs of every size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from ..edt import Head, MLPLayer, Mat, attend, mlp_apply, vecmat
from ..floatlab import FloatFormat, get_format, saturation_bound, validate_underflow_k

EXISTS = "exists"
COUNT = "count"


class UnsupportedCount(ValueError):
    def __init__(self, k: int, fmt: FloatFormat, supported):
        self.k, self.fmt, self.supported = k, fmt, sorted(supported)
        super().__init__(f"count {k} is not supported in {fmt}; supported counts: {self.supported} "
                         f"(saturation bound {saturation_bound(fmt)})")


class UnsupportedVariant(ValueError):
    pass


@dataclass
class HeadSpec:
    wq: dict  # column -> Fraction or code
    wk: dict
    wv: dict
    target: int  # scratch column receiving the head output
    scale: int  # W^O entry (a float code)


@dataclass
class UnitSpec:
    w1: dict
    b1: Fraction
    w2: dict


@dataclass
class LayerSpec:
    heads: list = field(default_factory=list)
    units: list = field(default_factory=list)
    b2: dict = field(default_factory=dict)


def lit_form(col: int, positive: bool, top: int) -> dict:
    """Linear form of a literal: x or 1 - x (the 1 comes from the top column)."""
    if positive:
        return {col: Fraction(1)}
    return {top: Fraction(1), col: Fraction(-1)}


def exists_head(fmt, lit: dict, scratch: int) -> HeadSpec:
    """Uniform attention averaging the literal: nonzero iff some visible vertex satisfies it."""
    return HeadSpec({}, {}, dict(lit), scratch, fmt.MAX_FIN)


def count_head(fmt, lit: dict, scratch: int, top: int, mult: int) -> HeadSpec:
    """Scores maxFin on satisfying keys; the value ``mult`` underflows once enough share the weight."""
    return HeadSpec({top: fmt.MAX_FIN}, dict(lit), {top: mult}, scratch, fmt.MAX_FIN)


def nonzero_units(fmt, scratch: int, out: int, spec: LayerSpec):
    """out = 1 - ReLU(1 - maxFin * r)."""
    spec.units.append(UnitSpec({scratch: -fmt.value(fmt.MAX_FIN)}, Fraction(1), {out: Fraction(-1)}))
    spec.b2[out] = spec.b2.get(out, Fraction(0)) + 1


def count_units(fmt, s_exists: int, s_count: int, out: int, spec: LayerSpec):
    """out = [count head is zero] - [both heads are zero]."""
    m = -fmt.value(fmt.MAX_FIN)
    spec.units.append(UnitSpec({s_count: m}, Fraction(1), {out: Fraction(1)}))
    spec.units.append(UnitSpec({s_exists: m, s_count: m}, Fraction(1), {out: Fraction(-1)}))


def and_unit(x: tuple[int, bool], y: tuple[int, bool], out: int, top: int, spec: LayerSpec):
    """One ReLU unit computing the conjunction of two literals over {0, 1}."""
    w: dict = {}
    bias = Fraction(-1)
    for col, pos in (x, y):
        if pos:
            w[col] = w.get(col, Fraction(0)) + 1
        else:
            w[col] = w.get(col, Fraction(0)) - 1
            bias += 1
    spec.units.append(UnitSpec(w, bias, {out: Fraction(1)}))


# --------------------------------------------------------------------- self-check

_TOP, _PSI, _SE, _SC, _OUT = range(5)


def _head(fmt, hs: HeadSpec, d: int) -> Head:
    def col(m: dict):
        rows = [[0] for _ in range(d)]
        for c, v in m.items():
            rows[c][0] = fmt.encode(v) if isinstance(v, Fraction) else v
        return Mat(rows, 1)
    return Head(col(hs.wq), col(hs.wk), col(hs.wv))


def _mlp(fmt, spec: LayerSpec, d: int) -> MLPLayer:
    n = max(1, len(spec.units))
    w1 = [[0] * n for _ in range(d)]
    w2 = [[0] * d for _ in range(n)]
    b1 = [0] * n
    for u, us in enumerate(spec.units):
        for c, v in us.w1.items():
            w1[c][u] = fmt.encode(v)
        b1[u] = fmt.encode(us.b1)
        for c, v in us.w2.items():
            w2[u][c] = fmt.encode(v)
    b2 = [0] * d
    for c, v in spec.b2.items():
        b2[c] = fmt.encode(v)
    return MLPLayer(Mat(w1, n), tuple(b1), Mat(w2, d), tuple(b2))


_D = 5


def _row(fmt, psi: int) -> list[int]:
    return [fmt.ONE, fmt.ONE if psi else 0, 0, 0, 0]


def _head_table(fmt, hs: HeadSpec, B: int) -> list[list[int]]:
    """Scaled head output for every (satisfying, other) key count in 0..B."""
    h = _head(fmt, hs, _D)
    sqrt1 = fmt.sqrt(fmt.ONE)
    # the query projection only reads the top column, so the query's own value is irrelevant
    q = vecmat(fmt, _row(fmt, 0), h.wq)
    kv = [(vecmat(fmt, _row(fmt, psi), h.wk), vecmat(fmt, _row(fmt, psi), h.wv)) for psi in (1, 0)]
    table = []
    for a in range(B + 1):
        line = []
        for b in range(B + 1):
            keys = [(kv[0][0], kv[0][1], a)] if a else []
            if b:
                keys.append((kv[1][0], kv[1][1], b))
            o = attend(fmt, sqrt1, q, keys, 1)[0]
            line.append(fmt.mul(o, hs.scale))
        table.append(line)
    return table


@lru_cache(maxsize=None)
def _exists_table(p: int, q: int, B: int):
    fmt = get_format(p, q)
    return _head_table(fmt, exists_head(fmt, {_PSI: Fraction(1)}, _SE), B)


@lru_cache(maxsize=None)
def _count_table(p: int, q: int, B: int, mult: int):
    fmt = get_format(p, q)
    return _head_table(fmt, count_head(fmt, {_PSI: Fraction(1)}, _SC, _TOP, mult), B)


def gadget_spec(fmt: FloatFormat, kind: str, k: int, mult: int | None = None) -> LayerSpec:
    spec = LayerSpec()
    lit = {_PSI: Fraction(1)}
    spec.heads.append(exists_head(fmt, lit, _SE))
    if kind == EXISTS or k <= 1:
        nonzero_units(fmt, _SE, _OUT, spec)
    else:
        spec.heads.append(count_head(fmt, lit, _SC, _TOP, mult))
        count_units(fmt, _SE, _SC, _OUT, spec)
    return spec


@dataclass(frozen=True)
class GadgetCheck:
    fmt: str
    k: int
    mult: str | None
    bound: int
    passed: bool
    witness: tuple | None = None  # (satisfying keys, other keys, output)


def check_gadget(fmt: FloatFormat, k: int, mult: int | None = None, bound: int | None = None) -> GadgetCheck:
    """Exhaustive check that the gadget outputs exactly [#satisfying keys >= k].

    Runs the real attention and MLP code on a five-column toy stream
    (top, argument, two scratch columns, output) for every pair of key counts.
    """
    B = saturation_bound(fmt) if bound is None else bound
    kind = EXISTS if k <= 1 else COUNT
    spec = gadget_spec(fmt, kind, k, mult)
    mlp = _mlp(fmt, spec, _D)
    te = _exists_table(fmt.p, fmt.q, B)
    tc = _count_table(fmt.p, fmt.q, B, mult) if kind == COUNT else None
    hexm = None if mult is None else fmt.to_hex(mult)
    for a in range(B + 1):
        want = fmt.ONE if a >= max(k, 1) else 0
        for b in range(B + 1):
            row = _row(fmt, 0)
            row[_SE] = te[a][b]
            if tc is not None:
                row[_SC] = tc[a][b]
            got = fmt.add(row[_OUT], mlp_apply(fmt, row, mlp)[_OUT])
            if got != want:
                return GadgetCheck(str(fmt), k, hexm, B, False, (a, b, fmt.to_hex(got)))
    return GadgetCheck(str(fmt), k, hexm, B, True)


def half_multiplier(fmt: FloatFormat, k: int) -> int | None:
    """fl(k/2 * f) when k/2 is exactly representable, else None."""
    half = Fraction(k, 2)
    c = fmt.encode(half)
    if not fmt.is_finite(c) or fmt.value(c) != half:
        return None
    return fmt.mul(c, fmt.MIN_POS)


def _weights_by_count(fmt: FloatFormat, B: int) -> list[int]:
    """Softmax weight of one satisfying key when ``l`` keys satisfy (others weigh 0)."""
    one = fmt.ONE
    out = [0]
    for l in range(1, B + 1):
        den = fmt.sum_counts({one: l})
        out.append(fmt.div(one, den))
    return out


@dataclass(frozen=True)
class CountStrategy:
    k: int
    strategy: str  # "trivial", "exists", "underflow-half", "underflow-tuned"
    mult: int | None

    def as_dict(self, fmt):
        return {"k": self.k, "strategy": self.strategy,
                "multiplier": None if self.mult is None else fmt.to_hex(self.mult)}


@lru_cache(maxsize=None)
def count_strategy(p: int, q: int, k: int) -> CountStrategy | None:
    """Pick a verified counting gadget for threshold ``k`` in F(p, q), or None."""
    fmt = get_format(p, q)
    if k == 0:
        return CountStrategy(0, "trivial", None)
    if k == 1:
        return CountStrategy(1, "exists", None) if check_gadget(fmt, 1).passed else None
    B = saturation_bound(fmt)
    if k > B:
        return None
    # when exp(-maxFin) is zero a satisfying key's weight only depends on the
    # satisfying count, so a 1-D screen rejects most multipliers cheaply
    ws = _weights_by_count(fmt, B) if fmt.exp(fmt.neg(fmt.MAX_FIN)) == 0 else None

    def screened(c):
        return ws is None or all((fmt.mul(ws[l], c) == 0) == (l >= k) for l in range(1, B + 1))

    c = half_multiplier(fmt, k)
    if c is not None and screened(c) and check_gadget(fmt, k, c).passed:
        return CountStrategy(k, "underflow-half", c)
    for cand in fmt.all_finite():
        if fmt.value(cand) <= 0 or cand == c or not screened(cand):
            continue
        if check_gadget(fmt, k, cand).passed:
            return CountStrategy(k, "underflow-tuned", cand)
    return None


def supported_counts(fmt: FloatFormat, kmax: int | None = None) -> list[int]:
    """Counts the compiler accepts in ``fmt`` (up to ``kmax``, default the saturation bound)."""
    top = saturation_bound(fmt) if kmax is None else kmax
    return [k for k in range(0, top + 1) if count_strategy(fmt.p, fmt.q, k) is not None]


def underflow_validated(fmt: FloatFormat) -> list[int]:
    """Counts k >= 1 with representable k/2 for which the underflow proposition holds."""
    from ..floatlab import representable_halves
    return [k for k in representable_halves(fmt) if validate_underflow_k(fmt, k).valid]
