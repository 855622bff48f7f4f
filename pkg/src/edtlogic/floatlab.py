"""Bit-exact arithmetic in the parametric float format F(p, q).

A float is a bit string ``b0 b1..bq bq+1..bq+p``: one sign bit, ``q`` exponent
bits and ``p`` significand bits.  The significand carries its leading bit
explicitly, so a pattern is *normalised* when that bit is 1 (for any exponent)
and *subnormalised* when it is 0 and the exponent is all zeros.  Finite values
are ``(-1)**sign * (s / a) * 2**(e - bias)`` with ``a = 2**(p-1)`` and
``bias = 2**(q-1) - 1``.  The pattern with exponent ``1^q`` and significand
``0^p`` is infinity; every other pattern is reserved and reads as NaN.

Floats are handled as plain ``int`` codes (the bit pattern).  NaN has its own
code ``1 << nbits`` that no bit pattern can take.  Zero is always encoded with
sign 0; a ``-0`` pattern is accepted on input and canonicalised.

Every operation computes the exact extended-real result and rounds it to the
nearest element of the format, ties to even significand.  Results beyond the
largest finite value saturate to it unless rounding in F(p, q+1) would also
overflow, in which case they become infinite.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

__all__ = [
    "FloatFormat",
    "get_format",
    "parse_format",
    "sum_increasing",
    "cap_multiset",
    "validate_saturation",
    "validate_underflow_k",
    "saturation_bound",
    "SaturationReport",
    "UnderflowReport",
    "representable_halves",
]

# ln 2 to 90 digits; plenty for correctly rounding into any 64-bit format.
_LN2 = Fraction(
    "0.693147180559945309417232121458176568075500134360255254120680009493393621969694715605863326996418687542"
)

_TABLE_LIMIT = 10  # formats up to this many bits get dense operation tables

EXP_DEGREE = 8


def _floor_log2(num: int, den: int) -> int:
    """floor(log2(num/den)) for positive integers."""
    e = num.bit_length() - den.bit_length()
    if e >= 0:
        if num < (den << e):
            e -= 1
    elif (num << -e) < den:
        e -= 1
    return e


@dataclass(frozen=True)
class FloatFormat:
    p: int
    q: int
    # lazily filled operation caches; excluded from equality and hashing
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError(f"format needs p >= 1 and q >= 1, got F({self.p},{self.q})")
        stride = self.NAN + 1
        object.__setattr__(self, "_stride", stride)
        small = self.nbits <= _TABLE_LIMIT
        for op in ("add", "mul", "div"):
            object.__setattr__(self, "_t_" + op, [None] * (stride * stride) if small else {})
        object.__setattr__(self, "_small", small)

    # ------------------------------------------------------------------ constants

    @cached_property
    def nbits(self) -> int:
        return self.p + self.q + 1

    @cached_property
    def a(self) -> int:
        return 1 << (self.p - 1)

    @cached_property
    def bias(self) -> int:
        return (1 << (self.q - 1)) - 1

    @cached_property
    def emax(self) -> int:
        return (1 << self.q) - 1

    @cached_property
    def NAN(self) -> int:
        return 1 << self.nbits

    @cached_property
    def POS_INF(self) -> int:
        return self.emax << self.p

    @cached_property
    def NEG_INF(self) -> int:
        return (1 << (self.nbits - 1)) | (self.emax << self.p)

    ZERO = 0

    @cached_property
    def min_pos(self) -> Fraction:
        """Smallest positive subnormal, ``(1/a) * 2**-bias``."""
        return Fraction(1, self.a) / (Fraction(2) ** self.bias)

    @cached_property
    def max_fin(self) -> Fraction:
        return Fraction(2 * self.a - 1, self.a) * Fraction(2) ** (self.emax - self.bias)

    @cached_property
    def ONE(self) -> int:
        return self.encode(1)

    @property
    def MIN_POS(self) -> int:
        return 1

    @cached_property
    def MAX_FIN(self) -> int:
        return self.encode(self.max_fin)

    def __reduce__(self):
        return (get_format, (self.p, self.q))

    def __str__(self):
        return f"F({self.p},{self.q})"

    @property
    def tag(self) -> str:
        return f"f{self.p}.{self.q}"

    # ------------------------------------------------------------------ decoding

    def fields(self, code: int) -> tuple[int, int, int]:
        """(sign, exponent, significand) of a bit pattern."""
        if code == self.NAN:
            raise ValueError("NaN has no canonical bit fields")
        s = code & ((1 << self.p) - 1)
        e = (code >> self.p) & self.emax
        sign = code >> (self.p + self.q)
        return sign, e, s

    def classify(self, code: int) -> str:
        """One of 'nan', '+inf', '-inf', 'zero', 'subnormal', 'normal'."""
        if code == self.NAN:
            return "nan"
        sign, e, s = self.fields(code)
        if e == self.emax and s == 0:
            return "-inf" if sign else "+inf"
        if s >= self.a:
            return "normal"
        if e == 0:
            return "zero" if s == 0 else "subnormal"
        return "nan"

    def canonical(self, code: int) -> int:
        """Map any bit pattern (or the NaN code) to its canonical code."""
        if not 0 <= code <= self.NAN:
            raise ValueError(f"code {code} out of range for {self}")
        kind = self.classify(code)
        if kind == "nan":
            return self.NAN
        if kind == "zero":
            return 0
        return code

    def value(self, code: int):
        """Exact value: a Fraction, ``math.inf``/``-math.inf`` or ``math.nan``."""
        vals = self._cache.get("values")
        if vals is not None and code < len(vals):
            return vals[code]
        return self._value(code)

    def _value(self, code: int):
        kind = self.classify(code)
        if kind == "nan":
            return math.nan
        if kind == "+inf":
            return math.inf
        if kind == "-inf":
            return -math.inf
        sign, e, s = self.fields(code)
        v = Fraction(s, self.a) * Fraction(2) ** (e - self.bias)
        return -v if sign else v

    def is_nan(self, code: int) -> bool:
        return code == self.NAN

    def is_finite(self, code: int) -> bool:
        fin = self._cache.get("finite")
        if fin is not None:
            return fin[code]
        return code != self.NAN and (code & ~(1 << (self.nbits - 1))) != self.POS_INF

    # ------------------------------------------------------------------ encoding

    def encode(self, x) -> int:
        """Round an exact rational (or +-inf / nan) to the nearest float."""
        if isinstance(x, float):
            if math.isnan(x):
                return self.NAN
            if math.isinf(x):
                return self.POS_INF if x > 0 else self.NEG_INF
            x = Fraction(x)
        elif not isinstance(x, Fraction):
            x = Fraction(x)
        if x == 0:
            return 0
        sign = 1 if x < 0 else 0
        m = -x if sign else x
        num, den = m.numerator, m.denominator
        E = _floor_log2(num, den)
        t = max(E, -self.bias) - (self.p - 1)
        # m / 2**t = num * 2**-t / den
        if t >= 0:
            n, d = num, den << t
        else:
            n, d = num << -t, den
        N, rem = divmod(n, d)
        twice = 2 * rem
        if twice > d or (twice == d and N & 1):
            N += 1
        return self._pack(sign, N, t)

    def _encode_sqrt(self, x: Fraction) -> int:
        """Correctly rounded sqrt of a positive rational."""
        num, den = x.numerator, x.denominator
        E = _floor_log2(num, den) // 2
        t = max(E, -self.bias) - (self.p - 1)
        # y = x * 2**(-2t); N = floor(sqrt(y)) = isqrt(floor(y))
        if t >= 0:
            yn, yd = num, den << (2 * t)
        else:
            yn, yd = num << (-2 * t), den
        N = math.isqrt(yn // yd)
        # compare sqrt(y) with N + 1/2  <=>  4*y with (2N+1)^2
        lhs = 4 * yn
        rhs = (2 * N + 1) ** 2 * yd
        if lhs > rhs or (lhs == rhs and N & 1):
            N += 1
        return self._pack(0, N, t)

    def _pack(self, sign: int, N: int, t: int) -> int:
        """Encode the rounded magnitude ``N * 2**t`` (ulp already applied)."""
        if N == 0:
            return 0
        # normalise so that a <= N < 2a where possible
        if N >= 2 * self.a:
            N >>= 1
            t += 1
        if N < self.a:
            # subnormal: t must be the subnormal ulp exponent
            e = 0
        else:
            e = t + (self.p - 1) + self.bias
        if e > self.emax or (e == self.emax and N == 0):
            return self._overflow(sign, N, t)
        code = (sign << (self.p + self.q)) | (e << self.p) | N
        return code

    def _overflow(self, sign: int, N: int, t: int) -> int:
        # the rounded value N * 2**t already is the F(p, q+1) rounding (same ulp in this range)
        wide_bias = (1 << self.q) - 1
        wide_emax = (1 << (self.q + 1)) - 1
        wide_max = (2 * self.a - 1) * Fraction(2) ** (wide_emax - wide_bias - (self.p - 1))
        if N * Fraction(2) ** t > wide_max:
            return self.NEG_INF if sign else self.POS_INF
        return self.encode(-self.max_fin if sign else self.max_fin)

    # ------------------------------------------------------------------ helpers

    def all_finite(self) -> list[int]:
        """Canonical codes of every finite float, in increasing order of value."""
        out = []
        for code in range(1 << self.nbits):
            if self.canonical(code) == code and self.is_finite(code):
                out.append(code)
        out.sort(key=self.value)
        return out

    def rank(self, code: int) -> int:
        """Position of ``code`` in the total order -inf < ... < +inf."""
        ranks = self._cache.get("rank")
        if ranks is None:
            ranks = {}
            order = [self.NEG_INF] + self.all_finite() + [self.POS_INF] if self.nbits <= 16 else None
            if order is not None:
                for i, c in enumerate(order):
                    ranks[c] = i
            self._cache["rank"] = ranks
        r = ranks.get(code)
        if r is None:
            # large formats: order by value directly (Fraction vs inf compares fine)
            return self.value(code)
        return r

    def sort_key(self):
        if self.nbits <= 16:
            self.rank(0)
            return self._cache["rank"].__getitem__
        return self.value

    def from_bits(self, bits: str) -> int:
        if len(bits) != self.nbits or set(bits) - {"0", "1"}:
            raise ValueError(f"expected {self.nbits} bits, got {bits!r}")
        return self.canonical(int(bits, 2))

    def nan_pattern(self) -> int:
        """Bit pattern used when NaN must be written out as raw bits."""
        for pat in range(1 << self.nbits):
            if self.classify(pat) == "nan":
                return pat
        # F(1,1) has no reserved pattern; all ones is -inf there, so this is lossy
        return (1 << self.nbits) - 1

    def to_bits(self, code: int) -> str:
        if code == self.NAN:
            code = self.nan_pattern()
        return format(code, f"0{self.nbits}b")

    def to_hex(self, code: int) -> str:
        code = self.canonical(code)
        if code == self.NAN:
            return "nan"
        if code == self.POS_INF:
            return "+inf"
        if code == self.NEG_INF:
            return "-inf"
        return f"{self.tag}:{code:#x}"

    def from_hex(self, text: str) -> int:
        text = text.strip()
        if text == "nan":
            return self.NAN
        if text in ("+inf", "inf"):
            return self.POS_INF
        if text == "-inf":
            return self.NEG_INF
        tag, sep, hexpart = text.partition(":")
        if not sep:
            raise ValueError(f"bad float literal {text!r}")
        if tag != self.tag:
            raise ValueError(f"float {text!r} is not in format {self.tag}")
        return self.canonical(int(hexpart, 16))

    # ------------------------------------------------------------------ arithmetic

    def add(self, x: int, y: int) -> int:
        key = x * self._stride + y
        t = self._t_add
        if self._small:
            r = t[key]
        else:
            r = t.get(key)
        if r is None:
            r = t[key] = self._add_exact(x, y)
        return r

    def sub(self, x: int, y: int) -> int:
        return self.add(x, self.neg(y))

    def mul(self, x: int, y: int) -> int:
        key = x * self._stride + y
        t = self._t_mul
        r = t[key] if self._small else t.get(key)
        if r is None:
            r = t[key] = self._mul_exact(x, y)
        return r

    def div(self, x: int, y: int) -> int:
        key = x * self._stride + y
        t = self._t_div
        r = t[key] if self._small else t.get(key)
        if r is None:
            r = t[key] = self._div_exact(x, y)
        return r

    def neg(self, x: int) -> int:
        if x == self.NAN or x == 0:
            return x
        return x ^ (1 << (self.nbits - 1))

    def sqrt(self, x: int) -> int:
        v = self.value(x)
        if x == self.NAN or v < 0:
            return self.NAN
        if v == 0:
            return 0
        if v == math.inf:
            return self.POS_INF
        return self._encode_sqrt(v)

    def relu(self, x: int) -> int:
        if x == self.NAN:
            return x
        return x if self.value(x) > 0 else 0

    def lt(self, x: int, y: int) -> bool:
        return self.value(x) < self.value(y)

    def max(self, xs: Iterable[int]) -> int:
        best = None
        for x in xs:
            if x == self.NAN:
                return self.NAN
            if best is None or self.value(x) > self.value(best):
                best = x
        if best is None:
            raise ValueError("max of empty sequence")
        return best

    def _add_exact(self, x, y):
        vx, vy = self.value(x), self.value(y)
        if x == self.NAN or y == self.NAN:
            return self.NAN
        if isinstance(vx, float) or isinstance(vy, float):
            r = vx + vy  # float inf arithmetic handles inf-inf -> nan
            return self.encode(r if isinstance(r, float) else float(r))
        return self.encode(vx + vy)

    def _mul_exact(self, x, y):
        vx, vy = self.value(x), self.value(y)
        if x == self.NAN or y == self.NAN:
            return self.NAN
        if isinstance(vx, float) or isinstance(vy, float):
            if vx == 0 or vy == 0:
                return self.NAN
            neg = (vx < 0) != (vy < 0)
            return self.NEG_INF if neg else self.POS_INF
        return self.encode(vx * vy)

    def _div_exact(self, x, y):
        vx, vy = self.value(x), self.value(y)
        if x == self.NAN or y == self.NAN or vy == 0:
            return self.NAN
        xinf, yinf = isinstance(vx, float), isinstance(vy, float)
        if xinf and yinf:
            return self.NAN
        if yinf:
            return 0
        if xinf:
            neg = (vx < 0) != (vy < 0)
            return self.NEG_INF if neg else self.POS_INF
        return self.encode(vx / vy)

    # ------------------------------------------------------------------ exp

    def exp(self, x: int) -> int:
        t = self._cache.setdefault("exp", {})
        r = t.get(x)
        if r is None:
            r = t[x] = self._exp(x)
        return r

    def exp_exact_round(self, x: int) -> int:
        """Debug helper: e**x rounded once (not used by the evaluator)."""
        v = self.value(x)
        if x == self.NAN:
            return x
        if v == math.inf:
            return self.POS_INF
        if v == -math.inf:
            return 0
        return self.encode(Fraction(math.exp(v)) if abs(v) < 700 else (math.inf if v > 0 else 0))

    def _exp(self, x: int) -> int:
        if x == self.NAN:
            return x
        v = self.value(x)
        if v == math.inf:
            return self.POS_INF
        if v == -math.inf:
            return 0
        ln2 = self.encode(_LN2)
        t = self.div(x, ln2)
        if not self.is_finite(t):
            return self.POS_INF if v > 0 else 0
        n = round(self.value(t))  # half-even on the exact quotient
        r = self.sub(x, self.mul(self.encode(n), ln2))
        coeffs = [self.encode(Fraction(1, math.factorial(j))) for j in range(EXP_DEGREE + 1)]
        acc = coeffs[EXP_DEGREE]
        for j in range(EXP_DEGREE - 1, -1, -1):
            acc = self.add(self.mul(acc, r), coeffs[j])
        va = self.value(acc)
        if acc == self.NAN or isinstance(va, float):
            return acc
        return self.encode(va * Fraction(2) ** n)

    # ------------------------------------------------------------------ sums

    def sum_increasing(self, codes: Iterable[int]) -> int:
        """Sum a multiset of floats in increasing order of value.

        Exact zeros are neutral for this fold and are skipped.  NaN is
        propagated rather than raised.
        """
        items = [c for c in codes if c != 0]
        if not items:
            return 0
        if self.NAN in items:
            return self.NAN
        if len(items) == 1:
            return items[0]
        items.sort(key=self.sort_key())
        add = self.add
        acc = items[0]
        for c in items[1:]:
            acc = add(acc, c)
        return acc

    def sum_counts(self, counts: Mapping[int, int]) -> int:
        """Increasing-order sum of a multiset given as ``{code: multiplicity}``."""
        keys = [c for c, m in counts.items() if m > 0 and c != 0]
        if not keys:
            return 0
        if self.NAN in keys:
            return self.NAN
        keys.sort(key=self.sort_key())
        add = self.add
        acc = None
        for c in keys:
            for _ in range(counts[c]):
                acc = c if acc is None else add(acc, c)
        return acc

    def dot(self, xs: Sequence[int], ws: Sequence[int]) -> int:
        return self.sum_increasing(self.mul(x, w) for x, w in zip(xs, ws))

    def warm(self):
        """Precompute the value table (cheap for small formats)."""
        if "values" not in self._cache and self.nbits <= 16:
            self._cache["values"] = [self._value(c) for c in range(self.NAN + 1)]
            self._cache["finite"] = [self.classify(c) not in ("nan", "+inf", "-inf") for c in range(self.NAN + 1)]
        return self


@lru_cache(maxsize=None)
def get_format(p: int, q: int) -> FloatFormat:
    """Shared format instance (so operation caches are reused)."""
    return FloatFormat(p, q).warm()


def parse_format(text: str) -> FloatFormat:
    """Accept '3,3', '3.3', 'f3.3' or 'F(3,3)'."""
    t = text.strip().lower().lstrip("f").strip("()")
    for sep in (",", "."):
        if sep in t:
            a, b = t.split(sep, 1)
            return get_format(int(a), int(b))
    raise ValueError(f"cannot parse float format {text!r}")


# ---------------------------------------------------------------------- multisets


def sum_increasing(fmt: FloatFormat, multiset) -> int:
    """Increasing-order sum of a multiset ({code: count} or an iterable of codes)."""
    if isinstance(multiset, Mapping):
        return fmt.sum_counts(multiset)
    return fmt.sum_increasing(multiset)


def cap_multiset(multiset: Mapping, k: int) -> dict:
    if k < 0:
        raise ValueError("cap must be non-negative")
    return {x: min(m, k) for x, m in multiset.items() if min(m, k) > 0}


@dataclass
class SaturationReport:
    fmt: str
    k: int
    trials: int
    holds: bool
    witness: dict | None = None

    def as_dict(self):
        return {"fmt": self.fmt, "k": self.k, "trials": self.trials, "holds": self.holds, "witness": self.witness}


def _random_multiset(fmt: FloatFormat, rng: random.Random, finite: list[int], k: int) -> dict:
    # a few distinct values with multiplicities spread around the cap
    size = rng.randint(1, 4)
    out = {}
    for _ in range(size):
        c = rng.choice(finite)
        out[c] = out.get(c, 0) + rng.randint(1, 3 * k + 3)
    return out


def validate_saturation(fmt: FloatFormat, k: int, trials: int, seed: int = 0) -> SaturationReport:
    """Randomised search for M with SUM(M) != SUM(M capped at k)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = random.Random(seed)
    finite = fmt.all_finite()
    finite_inf = finite + [fmt.POS_INF, fmt.NEG_INF]
    for i in range(trials):
        pool = finite_inf if i % 10 == 9 else finite
        m = _random_multiset(fmt, rng, pool, k)
        full = fmt.sum_counts(m)
        capped = fmt.sum_counts(cap_multiset(m, k))
        if full != capped:
            return SaturationReport(
                str(fmt), k, i + 1, False,
                {"multiset": {fmt.to_hex(c): n for c, n in sorted(m.items())},
                 "sum": fmt.to_hex(full), "capped_sum": fmt.to_hex(capped)},
            )
    return SaturationReport(str(fmt), k, trials, True)


# configured saturation bounds, found by sweeping validate_saturation upward and
# doubling the first k with no witness in 10^4 trials (see tests/test_floatlab.py)
SATURATION_BOUNDS = {(3, 3): 46, (4, 4): 94}


def saturation_bound(fmt: FloatFormat, trials: int = 2000, seed: int = 0) -> int:
    """Working cap k* for ``fmt``: configured value, else a fresh sweep with 2x margin."""
    key = (fmt.p, fmt.q)
    if key in SATURATION_BOUNDS:
        return SATURATION_BOUNDS[key]
    k = 1
    while not validate_saturation(fmt, k, trials, seed).holds:
        k += 1
    return 2 * k


@dataclass
class UnderflowReport:
    fmt: str
    k: int
    valid: bool
    reading: str
    witness: str | None = None

    def as_dict(self):
        return {"fmt": self.fmt, "k": self.k, "valid": self.valid, "reading": self.reading,
                "witness": self.witness}


def validate_underflow_k(fmt: FloatFormat, k: int, reading: str = "reciprocal") -> UnderflowReport:
    """Exhaustively check the underflow threshold for multiplier ``(k/2) * f``.

    ``reading="reciprocal"`` checks  |F| <= 1/k  <=>  F * ((k/2) * f) == 0,
    which is the property the counting gadgets rely on.  ``reading="literal"``
    checks |F| <= |k/2| instead; that form fails for every k (F = 1 is a
    witness once k >= 2) and is kept for reporting.
    """
    half = Fraction(k, 2)
    hcode = fmt.encode(half)
    if not fmt.is_finite(hcode) or fmt.value(hcode) != half:
        raise ValueError(f"k/2 = {half} is not exactly representable in {fmt}")
    mult = fmt.mul(hcode, fmt.MIN_POS)
    if reading == "reciprocal":
        bound = Fraction(1, k) if k else None
    elif reading == "literal":
        bound = abs(half)
    else:
        raise ValueError(f"unknown reading {reading!r}")
    for c in fmt.all_finite():
        v = fmt.value(c)
        lhs = (v == 0) if bound is None else abs(v) <= bound
        rhs = fmt.mul(c, mult) == 0
        if lhs != rhs:
            return UnderflowReport(str(fmt), k, False, reading, fmt.to_hex(c))
    return UnderflowReport(str(fmt), k, True, reading)


def representable_halves(fmt: FloatFormat, kmax: int | None = None) -> list[int]:
    """Positive integers k whose half is exactly representable (up to ``kmax``)."""
    top = int(2 * fmt.max_fin) if kmax is None else kmax
    out = []
    for k in range(1, top + 1):
        h = Fraction(k, 2)
        c = fmt.encode(h)
        if fmt.is_finite(c) and fmt.value(c) == h:
            out.append(k)
    return out
