"""Compile a formula tuple into a feature-wise equivalent transformer.

One residual column per subformula holds its truth value as an exact 0 or 1.
Negations are not given columns: a negated subformula is read as ``1 - x``
through the always-one top column.  Modal nodes get scratch columns that
receive the raw attention output; the MLP of the same layer turns them into
Booleans.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from ..edt import (AttentionLayer, DecoderLayer, EncoderLayer, Head, MLPLayer, Mat, Transformer,
                   TransformerConfig, mlp_apply, NON_STRICT as MASK_NON_STRICT, STRICT as MASK_STRICT)
from ..floatlab import FloatFormat, saturation_bound
from ..gptl.syntax import CORE, NON_STRICT, Formula, FormulaTuple, iter_nodes, render
from ..wordgraph import BOS
from .gadgets import (LayerSpec, UnsupportedCount, UnsupportedVariant, and_unit,
                      count_head, count_strategy, count_units, exists_head, lit_form,
                      nonzero_units, supported_counts, underflow_validated)

TOP_KEY = "top"
BOT_KEY = "bot"


@dataclass
class CompilePlan:
    fmt: FloatFormat
    variant: str
    columns: dict  # block name -> column index (every block is one column wide)
    literals: dict  # rendered subformula -> [column, negated]
    encoder: list  # per layer: list of gadget descriptions
    decoder: list
    strategies: dict  # rendered count node -> strategy
    supported: list
    validated: list
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format": str(self.fmt),
            "variant": self.variant,
            "columns": {k: [v, v + 1] for k, v in self.columns.items()},
            "literals": self.literals,
            "encoder_layers": self.encoder,
            "decoder_layers": self.decoder,
            "count_strategies": self.strategies,
            "supported_counts": self.supported,
            "underflow_validated": self.validated,
            "saturation_bound": saturation_bound(self.fmt),
            **self.extra,
        }


def _key(node) -> str:
    return node if isinstance(node, str) else render(node)


class _Compiler:
    def __init__(self, phi: FormulaTuple, fmt: FloatFormat, labels: Sequence[str]):
        self.phi, self.fmt = phi, fmt
        self.labels = tuple(labels)
        self.cols: dict = {}
        self.scratch: dict = {}
        self.enc_ready: dict = {}
        self.dec_ready: dict = {}
        self.strategies: dict = {}

    # literal = (base node or TOP_KEY/BOT_KEY, positive)
    def lit(self, f: Formula):
        pos = True
        while f.kind == "not":
            f, pos = f.sub, not pos
        if f.kind == "bot":
            return (BOT_KEY, True) if pos else (TOP_KEY, True)
        if f.kind == "gpre" and f.count == 0:
            return (TOP_KEY, True) if pos else (BOT_KEY, True)
        return f, pos

    def _check_count(self, node: Formula):
        k = node.count
        s = count_strategy(self.fmt.p, self.fmt.q, k)
        if s is None:
            raise UnsupportedCount(k, self.fmt, supported_counts(self.fmt))
        self.strategies[render(node)] = s

    def analyse(self):
        phi = self.phi
        for n in iter_nodes(phi.formulas):
            if n.kind == "psuf" and phi.variant != CORE:
                raise UnsupportedVariant("the strict past modality needs a Core tuple")
            if n.kind == "psufgeq" and phi.variant != NON_STRICT:
                raise UnsupportedVariant("the counting past modality needs a NonStrict tuple")
            if n.kind in ("gpre", "psufgeq") and n.count >= 1:
                self._check_count(n)
        enc, dec = self.enc_ready, self.dec_ready

        def enc_visit(f):
            base, _ = self.lit(f)
            if isinstance(base, str) or base in enc:
                return enc.get(base, 0)
            k = base.kind
            if k == "prop" or k in ("psuf", "psufgeq"):
                r = 0  # past modalities are false on the prefix: the column stays zero
            elif k == "and":
                r = max(enc_visit(base.args[0]), enc_visit(base.args[1])) + 1
            else:  # gpre
                r = enc_visit(base.sub) + 1
            enc[base] = r
            return r

        def dec_visit(f):
            base, _ = self.lit(f)
            if isinstance(base, str) or base in dec:
                return dec.get(base, 0)
            k = base.kind
            if k == "prop":
                r = 0
            elif k == "and":
                r = max(dec_visit(base.args[0]), dec_visit(base.args[1])) + 1
            elif k == "gpre":
                enc_visit(base.sub)
                r = 1
            else:
                r = dec_visit(base.sub) + 1
            dec[base] = r
            return r

        for f in phi.formulas:
            dec_visit(f)
        # encoder-side gpre nodes need their own arguments in the prefix as well
        for base in list(enc):
            if base.kind == "gpre":
                enc_visit(base.sub)

    def allocate(self):
        cols = self.cols
        cols[TOP_KEY] = 0
        cols[BOT_KEY] = 1
        props = [lab for lab in self.labels]
        for n in iter_nodes(self.phi.formulas):
            if n.kind == "prop" and n.token not in props:
                props.append(n.token)
        for tok in props:
            cols[_prop_key(tok)] = len(cols)
        self.prop_cols = {tok: cols[_prop_key(tok)] for tok in props}
        for n in iter_nodes(self.phi.formulas):
            base, _ = self.lit(n)
            if isinstance(base, str) or base.kind == "prop":
                continue
            if base not in self.enc_ready and base not in self.dec_ready:
                continue
            if base not in cols:
                cols[base] = len(cols)
        d = len(cols)
        for base in list(cols):
            if isinstance(base, Formula) and base.kind in ("gpre", "psuf", "psufgeq"):
                needs_two = base.kind != "psuf" and base.count >= 2
                self.scratch[base] = (d, d + 1) if needs_two else (d,)
                d += len(self.scratch[base])
        self.d = d

    def lit_cols(self, f):
        base, pos = self.lit(f)
        if isinstance(base, Formula) and base.kind == "prop":
            return self.prop_cols[base.token], pos
        return self.cols[base], pos

    def _has_column(self, f) -> bool:
        # a past modality inside a prefix count is constantly false there, so its argument gets no column
        base, _ = self.lit(f)
        return (isinstance(base, Formula) and base.kind == "prop") or base in self.cols

    def modal_gadget(self, node: Formula, attn: LayerSpec, mlp: LayerSpec) -> str:
        fmt = self.fmt
        top = self.cols[TOP_KEY]
        c, pos = self.lit_cols(node.sub)
        form = lit_form(c, pos, top)
        out = self.cols[node]
        sc = self.scratch[node]
        k = 1 if node.kind == "psuf" else node.count
        attn.heads.append(exists_head(fmt, form, sc[0]))
        if k == 1:
            nonzero_units(fmt, sc[0], out, mlp)
            return f"exists {render(node)}"
        mult = self.strategies[render(node)].mult
        attn.heads.append(count_head(fmt, form, sc[1], top, mult))
        count_units(fmt, sc[0], sc[1], out, mlp)
        return f"count>={k} {render(node)}"

    def and_gadget(self, node: Formula, mlp: LayerSpec) -> str:
        a, b = node.args
        and_unit(self.lit_cols(a), self.lit_cols(b), self.cols[node], self.cols[TOP_KEY], mlp)
        return f"and {render(node)}"

    def build(self) -> tuple[Transformer, CompilePlan]:
        self.analyse()
        self.allocate()
        fmt = self.fmt
        L1 = max([r for b, r in self.enc_ready.items() if b.kind in ("and", "gpre")], default=0)
        L2 = max([r for b, r in self.dec_ready.items() if b.kind not in ("prop",)], default=0)
        enc_specs, dec_specs, enc_desc, dec_desc = [], [], [], []
        for r in range(1, L1 + 1):
            attn, mlp, desc = LayerSpec(), LayerSpec(), []
            for base, rr in self.enc_ready.items():
                if rr != r:
                    continue
                if base.kind == "gpre":
                    desc.append(self.modal_gadget(base, attn, mlp))
                elif base.kind == "and":
                    desc.append(self.and_gadget(base, mlp))
            enc_specs.append((attn, mlp))
            enc_desc.append(desc)
        for r in range(1, L2 + 1):
            msa, ca, mlp, desc = LayerSpec(), LayerSpec(), LayerSpec(), []
            for base, rr in self.dec_ready.items():
                if rr != r:
                    continue
                if base.kind == "gpre":
                    desc.append("cross " + self.modal_gadget(base, ca, mlp))
                elif base.kind in ("psuf", "psufgeq"):
                    desc.append("masked " + self.modal_gadget(base, msa, mlp))
                elif base.kind == "and":
                    desc.append(self.and_gadget(base, mlp))
            dec_specs.append((msa, ca, mlp))
            dec_desc.append(desc)
        h = max([len(s.heads) for spec in enc_specs + dec_specs for s in spec[:-1]] + [1])
        d_ff = max([len(spec[-1].units) for spec in enc_specs + dec_specs] + [1])
        d, d_out = self.d, len(self.phi)
        mask = MASK_STRICT if self.phi.variant == CORE else MASK_NON_STRICT
        cfg = TransformerConfig(fmt, d, 1, 1, d_ff, d_out, h, L1, L2, mask, "None")
        encoder = tuple(EncoderLayer(_attn(fmt, a, d, h), _mlp(fmt, m, d, d_ff)) for a, m in enc_specs)
        decoder = tuple(DecoderLayer(_attn(fmt, a, d, h), _attn(fmt, c, d, h), _mlp(fmt, m, d, d_ff))
                        for a, c, m in dec_specs)
        em = {}
        for lab in self.labels:
            v = [0] * d
            v[self.cols[TOP_KEY]] = fmt.ONE
            v[self.prop_cols[lab]] = fmt.ONE
            em[lab] = tuple(v)
        w_out = [[0] * d_out for _ in range(d)]
        b_out = [0] * d_out
        for j, f in enumerate(self.phi):
            c, pos = self.lit_cols(f)
            if pos:
                w_out[c][j] = fmt.ONE
            else:
                w_out[c][j] = fmt.neg(fmt.ONE)
                b_out[j] = fmt.ONE
        t = Transformer(cfg, em, encoder, decoder, Mat(w_out, d_out), tuple(b_out)).validate()
        plan = CompilePlan(
            fmt, self.phi.variant,
            {_key(b) if not isinstance(b, str) else b: c for b, c in self.cols.items()},
            {render(n): [self.lit_cols(n)[0], not self.lit_cols(n)[1]] for n in iter_nodes(self.phi.formulas)
             if self._has_column(n)},
            enc_desc, dec_desc,
            {k: s.as_dict(fmt) for k, s in self.strategies.items()},
            supported_counts(fmt), underflow_validated(fmt),
            {"scratch": {render(b): list(s) for b, s in self.scratch.items()}},
        )
        _check_boolean_units(fmt)
        return t, plan


def _prop_key(tok: str) -> str:
    return f"prop:{tok}"


def _code(fmt, v):
    return fmt.encode(v) if isinstance(v, Fraction) else v


def _attn(fmt: FloatFormat, spec: LayerSpec, d: int, h: int) -> AttentionLayer:
    heads = []
    wo = [[0] * d for _ in range(h)]
    for i in range(h):
        if i < len(spec.heads):
            hs = spec.heads[i]
            mats = []
            for m in (hs.wq, hs.wk, hs.wv):
                rows = [[0] for _ in range(d)]
                for c, v in m.items():
                    rows[c][0] = _code(fmt, v)
                mats.append(Mat(rows, 1))
            heads.append(Head(*mats))
            wo[i][hs.target] = hs.scale
        else:
            z = Mat.zeros(d, 1)
            heads.append(Head(z, z, z))
    return AttentionLayer(tuple(heads), Mat(wo, d))


def _mlp(fmt: FloatFormat, spec: LayerSpec, d: int, d_ff: int) -> MLPLayer:
    w1 = [[0] * d_ff for _ in range(d)]
    w2 = [[0] * d for _ in range(d_ff)]
    b1 = [0] * d_ff
    for u, us in enumerate(spec.units):
        for c, v in us.w1.items():
            w1[c][u] = _code(fmt, v)
        b1[u] = fmt.encode(us.b1)
        for c, v in us.w2.items():
            w2[u][c] = _code(fmt, v)
    b2 = [0] * d
    for c, v in spec.b2.items():
        b2[c] = fmt.encode(v)
    return MLPLayer(Mat(w1, d_ff), tuple(b1), Mat(w2, d), tuple(b2))


@lru_cache(maxsize=None)
def _check_boolean_units_cached(p: int, q: int) -> bool:
    from ..floatlab import get_format
    fmt = get_format(p, q)
    # columns: top, x, y, out
    for px in (True, False):
        for py in (True, False):
            spec = LayerSpec()
            and_unit((1, px), (2, py), 3, 0, spec)
            m = _mlp(fmt, spec, 4, 1)
            for x in (0, 1):
                for y in (0, 1):
                    row = [fmt.ONE, fmt.ONE if x else 0, fmt.ONE if y else 0, 0]
                    got = fmt.add(0, mlp_apply(fmt, row, m)[3])
                    want = fmt.ONE if ((x == 1) == px and (y == 1) == py) else 0
                    if got != want:
                        raise AssertionError(f"conjunction unit fails in {fmt} at x={x}, y={y}")
    return True


def _check_boolean_units(fmt: FloatFormat):
    _check_boolean_units_cached(fmt.p, fmt.q)


def compile_logic(phi: FormulaTuple | Sequence[Formula], fmt: FloatFormat,
                  labels: Sequence[str]) -> tuple[Transformer, CompilePlan]:
    """Transformer plus the compile plan for ``phi`` over vertex labels ``labels``."""
    if not isinstance(phi, FormulaTuple):
        phi = FormulaTuple.of(list(phi))
    labels = tuple(labels)
    if BOS not in labels:
        labels = labels + (BOS,)
    return _Compiler(phi, fmt, labels).build()


def logic_to_transformer(phi, fmt: FloatFormat, labels: Sequence[str]) -> Transformer:
    return compile_logic(phi, fmt, labels)[0]
