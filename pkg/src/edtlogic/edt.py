"""Bit-exact evaluation of encoder-decoder transformers.

All arithmetic goes through :mod:`edtlogic.floatlab`.  Every multiset sum
(inner products, softmax denominators, weighted value sums, layer-norm means)
is an increasing-order sum.  Entries removed by the causal mask take no part
in the weighted value sum, so a masked-out vertex can never leak a NaN into
an earlier position.
"""

from __future__ import annotations

import json
import random
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .floatlab import FloatFormat, get_format
from .wordgraph import BOS, TwoSortedGraph, Vocab

STRICT = "Strict"
NON_STRICT = "NonStrict"
MASK_MODES = (STRICT, NON_STRICT)
LN_MODES = ("None", "Pre", "Post")

UNMASKED = "Unmasked"
MASKED = "Masked"
CROSS = "Cross"


class ShapeError(ValueError):
    pass


class NonBooleanOutput(ValueError):
    pass


class Mat:
    """Immutable float-code matrix with cached sparse columns."""

    __slots__ = ("rows", "nrows", "ncols", "_cols", "_sparse", "_zero", "_active")

    def __init__(self, rows: Iterable[Sequence[int]], ncols: int | None = None):
        self.rows = tuple(tuple(r) for r in rows)
        self.nrows = len(self.rows)
        if ncols is None:
            if not self.rows:
                raise ShapeError("cannot infer the width of an empty matrix")
            ncols = len(self.rows[0])
        self.ncols = ncols
        for r in self.rows:
            if len(r) != ncols:
                raise ShapeError(f"ragged matrix: row of length {len(r)}, expected {ncols}")
        self._cols = None
        self._sparse = None
        self._zero = None
        self._active = None

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "Mat":
        return cls([[0] * ncols for _ in range(nrows)], ncols)

    def __eq__(self, other):
        return isinstance(other, Mat) and self.rows == other.rows and self.ncols == other.ncols

    def __hash__(self):
        return hash((self.rows, self.ncols))

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def columns(self, fmt: FloatFormat):
        """Per column: (finite nonzero entries, non-finite entries) as (row, code) lists."""
        if self._cols is None:
            cols = []
            for j in range(self.ncols):
                nz, special = [], []
                for i, r in enumerate(self.rows):
                    w = r[j]
                    if w == 0:
                        continue
                    (nz if fmt.is_finite(w) else special).append((i, w))
                cols.append((tuple(nz), tuple(special)))
            self._cols = cols
        return self._cols

    def sparse_rows(self, fmt: FloatFormat):
        """Per row the finite nonzero entries as (column, code), plus all non-finite (row, column, code)."""
        if self._sparse is None:
            rows, special = [], []
            for i, r in enumerate(self.rows):
                entries = []
                for j, w in enumerate(r):
                    if w == 0:
                        continue
                    if fmt.is_finite(w):
                        entries.append((j, w))
                    else:
                        special.append((i, j, w))
                rows.append(tuple(entries))
            self._sparse = (tuple(rows), tuple(special))
        return self._sparse

    def active_rows(self, fmt: FloatFormat) -> tuple:
        """Indices of rows with a finite nonzero entry."""
        if self._active is None:
            self._active = tuple(i for i, r in enumerate(self.sparse_rows(fmt)[0]) if r)
        return self._active

    def is_zero(self) -> bool:
        if self._zero is None:
            self._zero = all(w == 0 for r in self.rows for w in r)
        return self._zero

    def to_json(self, fmt: FloatFormat):
        return [[fmt.to_hex(w) for w in r] for r in self.rows]

    @classmethod
    def from_json(cls, fmt: FloatFormat, data, ncols: int):
        return cls([[fmt.from_hex(w) for w in r] for r in data], ncols)


def vecmat(fmt: FloatFormat, x: Sequence[int], w: Mat) -> list[int]:
    """Row vector times matrix; each entry is an increasing-order sum."""
    if len(x) != w.nrows:
        raise ShapeError(f"vector of length {len(x)} against {w.nrows}x{w.ncols} matrix")
    mul = fmt.mul
    total = fmt.sum_increasing
    if _specials(fmt).isdisjoint(x):
        # zero inputs against finite weights contribute exact zeros, which the sum skips
        rows, special = w.sparse_rows(fmt)
        terms: list = [None] * w.ncols
        for i in w.active_rows(fmt):
            c = x[i]
            if c == 0:
                continue
            for j, wv in rows[i]:
                t = terms[j]
                if t is None:
                    terms[j] = [mul(c, wv)]
                else:
                    t.append(mul(c, wv))
        for i, j, wv in special:
            if terms[j] is None:
                terms[j] = []
            terms[j].append(mul(x[i], wv))
        return [0 if t is None else total(t) for t in terms]
    # dense path: 0 * inf and friends must be evaluated
    return [total(mul(x[i], w.rows[i][j]) for i in range(w.nrows)) for j in range(w.ncols)]


def vec_add(fmt: FloatFormat, x: Sequence[int], y: Sequence[int]) -> list[int]:
    # x + 0 = x exactly for every canonical code, infinities and NaN included
    add = fmt.add
    return [a if b == 0 else (b if a == 0 else add(a, b)) for a, b in zip(x, y)]


def affine(fmt: FloatFormat, x, w: Mat, b: Sequence[int]) -> list[int]:
    return vec_add(fmt, vecmat(fmt, x, w), b)


# --------------------------------------------------------------------- blocks


@dataclass(frozen=True)
class Head:
    wq: Mat
    wk: Mat
    wv: Mat


@dataclass(frozen=True)
class AttentionLayer:
    heads: tuple[Head, ...]
    wo: Mat  # (h * d_v) x d

    def active_rows(self, fmt: FloatFormat) -> tuple:
        """Indices of rows with a finite nonzero entry."""
        if self._active is None:
            self._active = tuple(i for i, r in enumerate(self.sparse_rows(fmt)[0]) if r)
        return self._active

    def is_zero(self) -> bool:
        return self.wo.is_zero()


@dataclass(frozen=True)
class MLPLayer:
    w1: Mat
    b1: tuple[int, ...]
    w2: Mat
    b2: tuple[int, ...]


@dataclass(frozen=True)
class LNParams:
    gamma: int
    beta: int
    eps: int


@dataclass(frozen=True)
class EncoderLayer:
    sa: AttentionLayer
    mlp: MLPLayer
    ln: Mapping[str, LNParams] = field(default_factory=dict)  # sites: "sa", "mlp"


@dataclass(frozen=True)
class DecoderLayer:
    msa: AttentionLayer
    ca: AttentionLayer
    mlp: MLPLayer
    ln: Mapping[str, LNParams] = field(default_factory=dict)  # sites: "msa", "ca", "mlp"


@dataclass(frozen=True)
class TransformerConfig:
    fmt: FloatFormat
    d: int
    d_k: int
    d_v: int
    d_ff: int
    d_out: int
    h: int
    L1: int
    L2: int
    mask_mode: str = STRICT
    ln_mode: str = "None"

    def __post_init__(self):
        for name in ("d", "d_k", "d_v", "d_ff", "d_out", "h"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be at least 1")
        if self.L1 < 0 or self.L2 < 0:
            raise ShapeError("layer counts must be non-negative")
        if self.mask_mode not in MASK_MODES:
            raise ShapeError(f"unknown mask mode {self.mask_mode!r}")
        if self.ln_mode not in LN_MODES:
            raise ShapeError(f"unknown layer-norm mode {self.ln_mode!r}")


@dataclass(frozen=True)
class Transformer:
    config: TransformerConfig
    em: Mapping[str, tuple[int, ...]]
    encoder: tuple[EncoderLayer, ...]
    decoder: tuple[DecoderLayer, ...]
    w_out: Mat
    b_out: tuple[int, ...]
    softmax_output: bool = False  # trailing softmax (only for the step-distribution models)

    @property
    def fmt(self) -> FloatFormat:
        return self.config.fmt

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.em)

    def validate(self) -> "Transformer":
        c = self.config
        for lab, vec in self.em.items():
            if len(vec) != c.d:
                raise ShapeError(f"embedding of {lab!r} has length {len(vec)}, expected {c.d}")
        if len(self.encoder) != c.L1 or len(self.decoder) != c.L2:
            raise ShapeError("layer lists do not match L1/L2")
        for layer in self.encoder:
            _check_attn(c, layer.sa)
            _check_mlp(c, layer.mlp)
        for layer in self.decoder:
            _check_attn(c, layer.msa)
            _check_attn(c, layer.ca)
            _check_mlp(c, layer.mlp)
        _shape(self.w_out, c.d, c.d_out, "W_out")
        if len(self.b_out) != c.d_out:
            raise ShapeError("b_out has the wrong length")
        return self


def _shape(m: Mat, r: int, k: int, name: str):
    if m.nrows != r or m.ncols != k:
        raise ShapeError(f"{name} is {m.nrows}x{m.ncols}, expected {r}x{k}")


def _check_attn(c: TransformerConfig, a: AttentionLayer):
    if len(a.heads) != c.h:
        raise ShapeError(f"layer has {len(a.heads)} heads, expected {c.h}")
    for hd in a.heads:
        _shape(hd.wq, c.d, c.d_k, "W^Q")
        _shape(hd.wk, c.d, c.d_k, "W^K")
        _shape(hd.wv, c.d, c.d_v, "W^V")
    _shape(a.wo, c.h * c.d_v, c.d, "W^O")


def _check_mlp(c: TransformerConfig, m: MLPLayer):
    _shape(m.w1, c.d, c.d_ff, "W1")
    _shape(m.w2, c.d_ff, c.d, "W2")
    if len(m.b1) != c.d_ff or len(m.b2) != c.d:
        raise ShapeError("MLP bias has the wrong length")


# --------------------------------------------------------------------- primitives


def mask_scores(fmt: FloatFormat, s: Sequence[Sequence[int]], mode: str) -> list[list[int]]:
    n = len(s)
    out = []
    for i in range(n):
        if len(s[i]) != n:
            raise ShapeError("mask needs a square matrix")
        if mode == STRICT:
            out.append([s[i][j] if j < i else fmt.NEG_INF for j in range(n)])
        elif mode == NON_STRICT:
            out.append([s[i][j] if j <= i else fmt.NEG_INF for j in range(n)])
        else:
            raise ShapeError(f"unknown mask mode {mode!r}")
    return out


def softmax_row(fmt: FloatFormat, x: Sequence[int], mult: Sequence[int] | None = None) -> list[int]:
    """Softmax of a row; ``mult`` optionally gives each entry a multiplicity."""
    if not x:
        raise ShapeError("softmax of an empty row")
    if fmt.NAN in x:
        return [fmt.NAN] * len(x)
    b = fmt.max(x)
    if b == fmt.NEG_INF:
        return [0] * len(x)
    nums = [fmt.exp(fmt.sub(v, b)) for v in x]
    if mult is None:
        den = fmt.sum_increasing(nums)
    else:
        counts: dict = {}
        for e, m in zip(nums, mult):
            counts[e] = counts.get(e, 0) + m
        den = fmt.sum_counts(counts)
    return [fmt.div(e, den) for e in nums]


def attend(fmt: FloatFormat, sqrt_dk: int, query: Sequence[int],
           keys: Sequence[tuple[Sequence[int], Sequence[int], int]], d_v: int) -> list[int]:
    """One output row of an attention head.

    ``query`` is the projected query; ``keys`` lists the visible positions as
    (projected key, projected value, multiplicity).  No visible key, or a row
    of -inf scores, gives the zero row.
    """
    if not keys:
        return [0] * d_v
    total = fmt.sum_increasing
    mul = fmt.mul
    scores = [fmt.div(total(mul(a, b) for a, b in zip(query, k)), sqrt_dk) for k, _, _ in keys]
    weights = softmax_row(fmt, scores, [m for _, _, m in keys])
    out = []
    for c in range(d_v):
        counts: dict = {}
        for w, (_, v, m) in zip(weights, keys):
            p = mul(w, v[c])
            counts[p] = counts.get(p, 0) + m
        out.append(fmt.sum_counts(counts))
    return out


def _sqrt_dk(fmt: FloatFormat, d_k: int) -> int:
    return fmt.sqrt(fmt.encode(d_k))


def attention_head(fmt: FloatFormat, x: Sequence[Sequence[int]], y: Sequence[Sequence[int]], head: Head,
                   mode: str, mask_mode: str = STRICT) -> list[list[int]]:
    """Rows of the head output, one per row of ``y`` (queries); ``x`` supplies keys and values."""
    if mode == MASKED and len(x) != len(y):
        raise ShapeError("masked self-attention needs X = Y")
    d_k, d_v = head.wq.ncols, head.wv.ncols
    s = _sqrt_dk(fmt, d_k)
    q = [vecmat(fmt, r, head.wq) for r in y]
    kv = [(vecmat(fmt, r, head.wk), vecmat(fmt, r, head.wv), 1) for r in x]
    out = []
    for i, qi in enumerate(q):
        if mode == MASKED:
            visible = kv[:i] if mask_mode == STRICT else kv[: i + 1]
        else:
            visible = kv
        out.append(attend(fmt, s, qi, visible, d_v))
    return out


def _is_zero_head(hd: Head) -> bool:
    return hd.wq.is_zero() and hd.wk.is_zero() and hd.wv.is_zero()


@lru_cache(maxsize=None)
def _specials(fmt: FloatFormat) -> frozenset:
    return frozenset((fmt.POS_INF, fmt.NEG_INF, fmt.NAN))


def _finite_rows(fmt: FloatFormat, *mats) -> bool:
    sp = _specials(fmt)
    return all(sp.isdisjoint(r) for rows in mats for r in rows)


def multihead(fmt: FloatFormat, x, y, layer: AttentionLayer, mode: str, mask_mode: str = STRICT):
    # an all-zero head on a finite stream outputs exact zeros; skip the work
    finite = None
    heads = []
    for hd in layer.heads:
        if _is_zero_head(hd):
            if finite is None:
                finite = _finite_rows(fmt, x, y)
            if finite:
                heads.append([[0] * hd.wv.ncols for _ in y])
                continue
        heads.append(attention_head(fmt, x, y, hd, mode, mask_mode))
    rows = []
    for i in range(len(y)):
        cat = [v for hout in heads for v in hout[i]]
        rows.append(vecmat(fmt, cat, layer.wo))
    return rows


def multihead_row(fmt: FloatFormat, query_row: Sequence[int],
                  keys: Sequence[tuple[Sequence[int], int]], layer: AttentionLayer) -> list[int]:
    """Multi-head output for one query against visible rows given as (row, multiplicity)."""
    cat = []
    for hd in layer.heads:
        s = _sqrt_dk(fmt, hd.wq.ncols)
        q = vecmat(fmt, query_row, hd.wq)
        kv = [(vecmat(fmt, r, hd.wk), vecmat(fmt, r, hd.wv), m) for r, m in keys]
        cat.extend(attend(fmt, s, q, kv, hd.wv.ncols))
    return vecmat(fmt, cat, layer.wo)


def mhsa(fmt, x, layer: AttentionLayer, masked: bool = False, mask_mode: str = STRICT):
    return multihead(fmt, x, x, layer, MASKED if masked else UNMASKED, mask_mode)


def mhca(fmt, x, y, layer: AttentionLayer):
    return multihead(fmt, x, y, layer, CROSS)


def mlp_apply(fmt: FloatFormat, x: Sequence[int], m: MLPLayer) -> list[int]:
    hidden = [fmt.relu(v) for v in affine(fmt, x, m.w1, m.b1)]
    return affine(fmt, hidden, m.w2, m.b2)


def layer_norm_row(fmt: FloatFormat, x: Sequence[int], gamma: int, beta: int, eps: int) -> list[int]:
    if not x:
        raise ShapeError("layer norm of an empty row")
    n = fmt.encode(len(x))
    mu = fmt.div(fmt.sum_increasing(x), n)
    dev = [fmt.sub(v, mu) for v in x]
    var = fmt.div(fmt.sum_increasing(fmt.mul(v, v) for v in dev), n)
    den = fmt.sqrt(fmt.add(var, eps))
    return [fmt.add(fmt.mul(fmt.div(v, den), gamma), beta) for v in dev]


def _ln(fmt, rows, params: LNParams | None):
    if params is None:
        return [list(r) for r in rows]
    return [layer_norm_row(fmt, r, params.gamma, params.beta, params.eps) for r in rows]


def _residual(fmt, a, b):
    return [vec_add(fmt, r, s) for r, s in zip(a, b)]


def _sublayer(fmt, ln_mode, params, x, fn):
    """Residual block with optional layer norm; ``fn`` maps normalised rows to outputs."""
    if ln_mode == "Pre":
        return _residual(fmt, fn(_ln(fmt, x, params)), x)
    out = _residual(fmt, fn(x), x)
    if ln_mode == "Post":
        out = _ln(fmt, out, params)
    return out


def encoder_layer(fmt, x, layer: EncoderLayer, ln_mode: str = "None"):
    if not x:
        return []
    ln = layer.ln if ln_mode != "None" else {}
    x1 = _sublayer(fmt, ln_mode, ln.get("sa"), x, lambda z: mhsa(fmt, z, layer.sa))
    return _sublayer(fmt, ln_mode, ln.get("mlp"), x1, lambda z: [mlp_apply(fmt, r, layer.mlp) for r in z])


def decoder_layer(fmt, x_enc, y, layer: DecoderLayer, mask_mode: str = STRICT, ln_mode: str = "None"):
    ln = layer.ln if ln_mode != "None" else {}
    y1 = _sublayer(fmt, ln_mode, ln.get("msa"), y, lambda z: mhsa(fmt, z, layer.msa, True, mask_mode))
    ca_ln = ln.get("ca")
    if ln_mode == "Pre":
        xs = _ln(fmt, x_enc, ca_ln)
        y2 = _residual(fmt, mhca(fmt, xs, _ln(fmt, y1, ca_ln), layer.ca), y1)
    else:
        y2 = _sublayer(fmt, ln_mode, ca_ln, y1, lambda z: mhca(fmt, x_enc, z, layer.ca))
    return _sublayer(fmt, ln_mode, ln.get("mlp"), y2, lambda z: [mlp_apply(fmt, r, layer.mlp) for r in z])


def embed(t: Transformer, tokens: Sequence[str]) -> list[list[int]]:
    rows = []
    for tok in tokens:
        if tok not in t.em:
            raise KeyError(f"token {tok!r} has no embedding")
        rows.append(list(t.em[tok]))
    return rows


def encode_prefix(t: Transformer, g: TwoSortedGraph) -> list[list[int]]:
    fmt = t.fmt
    x = embed(t, g.prefix_tokens())
    for layer in t.encoder:
        x = encoder_layer(fmt, x, layer, t.config.ln_mode)
    return x


def decode(t: Transformer, x_enc, y):
    fmt = t.fmt
    for layer in t.decoder:
        y = decoder_layer(fmt, x_enc, y, layer, t.config.mask_mode, t.config.ln_mode)
    return y


def output_head(t: Transformer, row: Sequence[int]) -> list[int]:
    out = affine(t.fmt, row, t.w_out, t.b_out)
    if t.softmax_output:
        out = softmax_row(t.fmt, out)
    return out


def run(t: Transformer, g: TwoSortedGraph) -> list[list[int]]:
    """Output matrix: one row of d_out floats per suffix vertex."""
    x = encode_prefix(t, g)
    y = decode(t, x, embed(t, g.suffix_tokens()))
    return [output_head(t, r) for r in y]


def interpret_bitwise(row: Sequence[int], fmt: FloatFormat) -> str:
    return "".join(fmt.to_bits(c) for c in row)


def interpret_featurewise(row: Sequence[int], fmt: FloatFormat) -> str:
    one = fmt.ONE
    bits = []
    for c in row:
        if c == 0:
            bits.append("0")
        elif c == one:
            bits.append("1")
        else:
            raise NonBooleanOutput(f"entry {fmt.to_hex(c)} is neither 0 nor 1")
    return "".join(bits)


# --------------------------------------------------------------------- multi-head decomposition


def _pad_rows(m: Mat, nrows: int) -> Mat:
    return Mat(list(m.rows) + [[0] * m.ncols for _ in range(nrows - m.nrows)], m.ncols)


def _pad_cols(m: Mat, ncols: int) -> Mat:
    return Mat([list(r) + [0] * (ncols - m.ncols) for r in m.rows], ncols)


def _zero_head(d, d_k, d_v) -> Head:
    return Head(Mat.zeros(d, d_k), Mat.zeros(d, d_k), Mat.zeros(d, d_v))


def decompose_multihead(t: Transformer) -> Transformer:
    """Rewrite every attention layer as a stack of single-head layers.

    Each head writes into its own zero slot of width d_v; an MLP then applies
    W^O to the slots (through ReLU(s) and ReLU(-s)), adds the result to the
    residual stream and clears the slots.  Outputs are bit-identical whenever
    the original residual stream stays finite (the extra zero-weight
    sublayers turn an infinity into NaN otherwise).
    """
    c = t.config
    if c.h == 1:
        return t
    if c.ln_mode != "None":
        raise ShapeError("multi-head decomposition is only defined without layer norm")
    fmt = t.fmt
    h, d, d_v, d_k = c.h, c.d, c.d_v, c.d_k
    slot0 = d
    d2 = d + h * d_v
    d_ff2 = max(c.d_ff, 2 * h * d_v)
    one, neg_one = fmt.ONE, fmt.neg(fmt.ONE)

    def pad_head(hd: Head) -> Head:
        return Head(_pad_rows(hd.wq, d2), _pad_rows(hd.wk, d2), _pad_rows(hd.wv, d2))

    def single(hd: Head | None, slot: int | None) -> AttentionLayer:
        wo = [[0] * d2 for _ in range(d_v)]
        if hd is None:
            return AttentionLayer((_zero_head(d2, d_k, d_v),), Mat(wo, d2))
        for r in range(d_v):
            wo[r][slot0 + slot * d_v + r] = one
        return AttentionLayer((pad_head(hd),), Mat(wo, d2))

    zero_mlp = MLPLayer(Mat.zeros(d2, d_ff2), (0,) * d_ff2, Mat.zeros(d_ff2, d2), (0,) * d2)

    def pad_mlp(m: MLPLayer) -> MLPLayer:
        w1 = _pad_cols(_pad_rows(m.w1, d2), d_ff2)
        w2 = _pad_cols(_pad_rows(m.w2, d_ff2), d2)
        return MLPLayer(w1, tuple(m.b1) + (0,) * (d_ff2 - c.d_ff), w2, tuple(m.b2) + (0,) * (d2 - d))

    def apply_wo_mlp(wo: Mat) -> MLPLayer:
        w1 = [[0] * d_ff2 for _ in range(d2)]
        w2 = [[0] * d2 for _ in range(d_ff2)]
        for s in range(h * d_v):
            col = slot0 + s
            w1[col][2 * s] = one          # ReLU(s)
            w1[col][2 * s + 1] = neg_one  # ReLU(-s)
            for j in range(d):
                w = wo.rows[s][j]
                w2[2 * s][j] = w
                w2[2 * s + 1][j] = fmt.neg(w)
            w2[2 * s][col] = neg_one      # clear the slot
            w2[2 * s + 1][col] = one
        return MLPLayer(Mat(w1, d_ff2), (0,) * d_ff2, Mat(w2, d2), (0,) * d2)

    zero_attn = single(None, None)
    enc: list[EncoderLayer] = []
    for layer in t.encoder:
        for i, hd in enumerate(layer.sa.heads):
            last = i == h - 1
            enc.append(EncoderLayer(single(hd, i), apply_wo_mlp(layer.sa.wo) if last else zero_mlp))
        enc.append(EncoderLayer(zero_attn, pad_mlp(layer.mlp)))
    dec: list[DecoderLayer] = []
    for layer in t.decoder:
        for i, hd in enumerate(layer.msa.heads):
            last = i == h - 1
            dec.append(DecoderLayer(single(hd, i), zero_attn, apply_wo_mlp(layer.msa.wo) if last else zero_mlp))
        for i, hd in enumerate(layer.ca.heads):
            last = i == h - 1
            dec.append(DecoderLayer(zero_attn, single(hd, i), apply_wo_mlp(layer.ca.wo) if last else zero_mlp))
        dec.append(DecoderLayer(zero_attn, zero_attn, pad_mlp(layer.mlp)))
    cfg = replace(c, d=d2, d_ff=d_ff2, h=1, L1=len(enc), L2=len(dec))
    em = {lab: tuple(v) + (0,) * (d2 - d) for lab, v in t.em.items()}
    return Transformer(cfg, em, tuple(enc), tuple(dec), _pad_rows(t.w_out, d2), t.b_out,
                       t.softmax_output).validate()


# --------------------------------------------------------------------- construction helpers


def zero_attention(c: TransformerConfig) -> AttentionLayer:
    return AttentionLayer(tuple(_zero_head(c.d, c.d_k, c.d_v) for _ in range(c.h)), Mat.zeros(c.h * c.d_v, c.d))


def zero_mlp(c: TransformerConfig) -> MLPLayer:
    return MLPLayer(Mat.zeros(c.d, c.d_ff), (0,) * c.d_ff, Mat.zeros(c.d_ff, c.d), (0,) * c.d)


def random_transformer(fmt: FloatFormat, labels: Sequence[str], *, d: int = 2, d_k: int = 1, d_v: int = 1,
                       d_ff: int = 2, d_out: int = 1, h: int = 1, L1: int = 1, L2: int = 1,
                       mask_mode: str = STRICT, ln_mode: str = "None", seed: int = 0,
                       values: Sequence | None = None, density: float = 0.7) -> Transformer:
    """Random weights drawn from a small value pool (default: a few dyadic values)."""
    from fractions import Fraction

    rng = random.Random(seed)
    if values is None:
        values = [Fraction(v) for v in ("-1", "-1/2", "-1/4", "1/4", "1/2", "1", "3/2", "2")]
    pool = [fmt.encode(v) for v in values]

    def rnd(r, k):
        return Mat([[rng.choice(pool) if rng.random() < density else 0 for _ in range(k)] for _ in range(r)], k)

    def vec(k):
        return tuple(rng.choice(pool) if rng.random() < density else 0 for _ in range(k))

    cfg = TransformerConfig(fmt, d, d_k, d_v, d_ff, d_out, h, L1, L2, mask_mode, ln_mode)

    def attn():
        return AttentionLayer(tuple(Head(rnd(d, d_k), rnd(d, d_k), rnd(d, d_v)) for _ in range(h)), rnd(h * d_v, d))

    def mlp():
        return MLPLayer(rnd(d, d_ff), vec(d_ff), rnd(d_ff, d), vec(d))

    def ln_params(sites):
        if ln_mode == "None":
            return {}
        return {s: LNParams(fmt.ONE, 0, fmt.encode(Fraction(1, 4))) for s in sites}

    em = {lab: vec(d) for lab in labels}
    enc = tuple(EncoderLayer(attn(), mlp(), ln_params(("sa", "mlp"))) for _ in range(L1))
    dec = tuple(DecoderLayer(attn(), attn(), mlp(), ln_params(("msa", "ca", "mlp"))) for _ in range(L2))
    return Transformer(cfg, em, enc, dec, rnd(d, d_out), vec(d_out)).validate()


# --------------------------------------------------------------------- serialization


def _attn_json(fmt, a: AttentionLayer):
    return {"heads": [{"wq": hd.wq.to_json(fmt), "wk": hd.wk.to_json(fmt), "wv": hd.wv.to_json(fmt)}
                      for hd in a.heads],
            "wo": a.wo.to_json(fmt)}


def _mlp_json(fmt, m: MLPLayer):
    return {"w1": m.w1.to_json(fmt), "b1": [fmt.to_hex(v) for v in m.b1],
            "w2": m.w2.to_json(fmt), "b2": [fmt.to_hex(v) for v in m.b2]}


def _ln_json(fmt, ln):
    return {s: {"gamma": fmt.to_hex(p.gamma), "beta": fmt.to_hex(p.beta), "eps": fmt.to_hex(p.eps)}
            for s, p in sorted(ln.items())}


def transformer_to_json(t: Transformer) -> dict:
    c, fmt = t.config, t.fmt
    return {
        "header": {"p": fmt.p, "q": fmt.q, "d": c.d, "d_k": c.d_k, "d_v": c.d_v, "d_ff": c.d_ff,
                   "d_out": c.d_out, "h": c.h, "L1": c.L1, "L2": c.L2,
                   "mask_mode": c.mask_mode, "ln_mode": c.ln_mode},
        "softmax_output": t.softmax_output,
        "embedding": {lab: [fmt.to_hex(v) for v in vec] for lab, vec in t.em.items()},
        "encoder": [{"sa": _attn_json(fmt, l.sa), "mlp": _mlp_json(fmt, l.mlp), "ln": _ln_json(fmt, l.ln)}
                    for l in t.encoder],
        "decoder": [{"msa": _attn_json(fmt, l.msa), "ca": _attn_json(fmt, l.ca),
                     "mlp": _mlp_json(fmt, l.mlp), "ln": _ln_json(fmt, l.ln)} for l in t.decoder],
        "w_out": t.w_out.to_json(fmt),
        "b_out": [fmt.to_hex(v) for v in t.b_out],
    }


def transformer_from_json(data) -> Transformer:
    if isinstance(data, str):
        data = json.loads(data)
    hd = data["header"]
    fmt = get_format(int(hd["p"]), int(hd["q"]))
    c = TransformerConfig(fmt, hd["d"], hd["d_k"], hd["d_v"], hd["d_ff"], hd["d_out"], hd["h"],
                          hd["L1"], hd["L2"], hd.get("mask_mode", STRICT), hd.get("ln_mode", "None"))

    def attn(a):
        heads = tuple(Head(Mat.from_json(fmt, x["wq"], c.d_k), Mat.from_json(fmt, x["wk"], c.d_k),
                           Mat.from_json(fmt, x["wv"], c.d_v)) for x in a["heads"])
        return AttentionLayer(heads, Mat.from_json(fmt, a["wo"], c.d))

    def mlp(m):
        return MLPLayer(Mat.from_json(fmt, m["w1"], c.d_ff), tuple(fmt.from_hex(v) for v in m["b1"]),
                        Mat.from_json(fmt, m["w2"], c.d), tuple(fmt.from_hex(v) for v in m["b2"]))

    def ln(x):
        return {s: LNParams(fmt.from_hex(p["gamma"]), fmt.from_hex(p["beta"]), fmt.from_hex(p["eps"]))
                for s, p in (x or {}).items()}

    em = {lab: tuple(fmt.from_hex(v) for v in vec) for lab, vec in data["embedding"].items()}
    enc = tuple(EncoderLayer(attn(l["sa"]), mlp(l["mlp"]), ln(l.get("ln"))) for l in data["encoder"])
    dec = tuple(DecoderLayer(attn(l["msa"]), attn(l["ca"]), mlp(l["mlp"]), ln(l.get("ln")))
                for l in data["decoder"])
    return Transformer(c, em, enc, dec, Mat.from_json(fmt, data["w_out"], c.d_out),
                       tuple(fmt.from_hex(v) for v in data["b_out"]),
                       bool(data.get("softmax_output", False))).validate()
