"""Simulate a transformer with a capped-multiset automaton.

A state is the bit string of the vertex's current residual row (padded to
``max(d, d_out)`` floats), a phase counter and one flag bit that marks suffix
vertices.  Each round simulates one sublayer: self-attention and MLP per
encoder layer, then masked self-attention, cross-attention and MLP per decoder
layer, then the output head.  The flag is known at BOS from the initial state
and is set in round one for every vertex that sees a non-empty suffix multiset.
"""

from __future__ import annotations

from ..cpga import INCLUDE_SELF, STRICT_PAST, CpgAutomaton, FunctionDelta
from ..edt import (NON_STRICT, Transformer, layer_norm_row, mlp_apply, multihead_row, output_head,
                   vec_add)
from ..floatlab import saturation_bound
from ..wordgraph import BOS


class SoftmaxHeadError(ValueError):
    pass


def _phases(t: Transformer) -> list[tuple]:
    out = []
    for i in range(t.config.L1):
        out += [("enc", i, "sa"), ("enc", i, "mlp")]
    for j in range(t.config.L2):
        out += [("dec", j, "msa"), ("dec", j, "ca"), ("dec", j, "mlp")]
    out.append(("out", None, None))
    return out


class _Codec:
    def __init__(self, t: Transformer, rounds: int):
        fmt = t.fmt
        self.fmt = fmt
        self.nb = fmt.nbits
        self.d = t.config.d
        self.slots = max(t.config.d, t.config.d_out)
        self.cbits = max(1, rounds.bit_length())
        self.width = self.slots * self.nb + self.cbits + 1
        self._dec: dict = {}

    def encode(self, row, t: int, flag: bool) -> str:
        fmt = self.fmt
        row = list(row) + [0] * (self.slots - len(row))
        return "".join(fmt.to_bits(c) for c in row) + format(t, f"0{self.cbits}b") + ("1" if flag else "0")

    def decode(self, s: str):
        r = self._dec.get(s)
        if r is None:
            nb, fmt = self.nb, self.fmt
            row = tuple(fmt.from_bits(s[i * nb:(i + 1) * nb]) for i in range(self.slots))
            off = self.slots * nb
            r = self._dec[s] = (row, int(s[off:off + self.cbits], 2), s[-1] == "1")
        return r


def transformer_to_automaton(t: Transformer) -> CpgAutomaton:
    """Bit-wise equivalent automaton; output round 2*L1 + 3*L2 + 1."""
    if t.softmax_output:
        raise SoftmaxHeadError("use the similarity-aware translation for models with a final softmax")
    fmt, cfg = t.fmt, t.config
    phases = _phases(t)
    R = len(phases)
    codec = _Codec(t, R)
    d = cfg.d
    ln_mode = cfg.ln_mode

    def ln_of(layer, site):
        return layer.ln.get(site) if ln_mode != "None" else None

    def norm(rows, params):
        if params is None:
            return rows
        return [layer_norm_row(fmt, r, params.gamma, params.beta, params.eps) for r in rows]

    def attention_sublayer(row, keys, layer, params):
        """Residual attention block for one vertex; ``keys`` is [(row, multiplicity)]."""
        krows = [r for r, _ in keys]
        mults = [m for _, m in keys]
        if ln_mode == "Pre":
            q = norm([row], params)[0]
            kn = norm(krows, params)
            return vec_add(fmt, multihead_row(fmt, q, list(zip(kn, mults)), layer), row)
        out = vec_add(fmt, multihead_row(fmt, row, keys, layer), row)
        return norm([out], params)[0] if ln_mode == "Post" else out

    def mlp_sublayer(row, mlp, params):
        if ln_mode == "Pre":
            return vec_add(fmt, mlp_apply(fmt, norm([row], params)[0], mlp), row)
        out = vec_add(fmt, mlp_apply(fmt, row, mlp), row)
        return norm([out], params)[0] if ln_mode == "Post" else out

    def rows_of(ms):
        return [(codec.decode(s)[0][:d], m) for s, m in ms]

    def delta(x, ma, mb):
        row, step, flag = codec.decode(x)
        if step == 0 and mb:
            flag = True
        if step >= R:
            return codec.encode(row, step, flag)
        side, i, site = phases[step]
        r = list(row[:d])
        if side == "enc" and not flag:
            layer = t.encoder[i]
            if site == "sa":
                r = attention_sublayer(r, rows_of(ma), layer.sa, ln_of(layer, "sa"))
            else:
                r = mlp_sublayer(r, layer.mlp, ln_of(layer, "mlp"))
        elif side == "dec" and flag:
            layer = t.decoder[i]
            if site == "msa":
                r = attention_sublayer(r, rows_of(mb), layer.msa, ln_of(layer, "msa"))
            elif site == "ca":
                r = attention_sublayer(r, rows_of(ma), layer.ca, ln_of(layer, "ca"))
            else:
                r = mlp_sublayer(r, layer.mlp, ln_of(layer, "mlp"))
        elif side == "out" and flag:
            r = output_head(t, r)
        else:
            r = list(row)
        return codec.encode(r, step + 1, flag)

    pi = {lab: codec.encode(vec, 0, lab == BOS) for lab, vec in t.em.items()}
    variant = INCLUDE_SELF if cfg.mask_mode == NON_STRICT else STRICT_PAST
    desc = {"kind": "transformer-simulation", "format": str(fmt), "rounds": R,
            "phases": [list(p) for p in phases]}
    return CpgAutomaton(codec.width, saturation_bound(fmt), R, cfg.d_out * fmt.nbits, pi,
                        FunctionDelta(delta, desc), variant, None, {"transformer": t})
