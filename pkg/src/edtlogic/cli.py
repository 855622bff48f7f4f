"""Command-line entry point.

Every subcommand reads UTF-8 JSON (formula tuples are plain text, one
formula per line) and writes deterministic JSON with sorted keys.  Exit codes:
0 on success or a passing check, 1 on a failing check, 2 on malformed input
or a compiler diagnostic.

Defaults can be overridden through the environment:
``EDTLOGIC_FORMAT`` (e.g. ``3,3``), ``EDTLOGIC_MAX_LEN``, ``EDTLOGIC_VOCAB``
and ``EDTLOGIC_JOBS``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .cpga import CpgAutomaton, outputs as automaton_outputs, run_rounds
from .edt import Transformer, interpret_bitwise, interpret_featurewise, run, transformer_from_json, transformer_to_json
from .floatlab import FloatFormat, parse_format
from .gptl.parser import parse_tuple
from .gptl.semantics import eval_tuple
from .gptl.syntax import FormulaTuple, tokens_of
from .wordgraph import BOS, EOS, TwoSortedGraph, Vocab, graph_from_json

MAX_BITS = 64
LOGIC, TRANSFORMER, AUTOMATON = "logic", "transformer", "automaton"


class ConfigError(ValueError):
    """Bad command-line input; reported with exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    fmt: FloatFormat
    vocab: Vocab | None
    max_len: int
    seed: int
    jobs: int

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        env = os.environ
        fmt_text = args.fmt or env.get("EDTLOGIC_FORMAT", "3,3")
        try:
            fmt = parse_format(fmt_text)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if fmt.p + fmt.q + 1 > MAX_BITS:
            raise ConfigError(f"{fmt} needs {fmt.p + fmt.q + 1} bits; the build limit is {MAX_BITS}")
        vocab_text = args.vocab if args.vocab is not None else env.get("EDTLOGIC_VOCAB")
        max_len = args.max_len if args.max_len is not None else int(env.get("EDTLOGIC_MAX_LEN", "6"))
        jobs = args.jobs if args.jobs is not None else int(env.get("EDTLOGIC_JOBS", "1"))
        if max_len < 1:
            raise ConfigError("--max-len must be at least 1")
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return cls(fmt, read_vocab(vocab_text) if vocab_text else None, max_len, args.seed, jobs)


# --------------------------------------------------------------------- files


def read_vocab(text: str) -> Vocab:
    """A path to a JSON list or whitespace-separated file, or the tokens themselves."""
    p = Path(text)
    if p.is_file():
        body = p.read_text(encoding="utf-8")
        try:
            data = json.loads(body)
        except ValueError:
            return Vocab.of(body)
        if isinstance(data, dict):
            data = data.get("tokens")
        if not isinstance(data, list):
            raise ConfigError(f"{text}: vocabulary JSON must be a list of tokens")
        return Vocab.of([str(t) for t in data])
    return Vocab.of(text)


def read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except ValueError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_text(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def detect_kind(path: str) -> str:
    if path.endswith((".gptl", ".txt")):
        return LOGIC
    try:
        head = Path(path).read_text(encoding="utf-8").lstrip()[:1]
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    if head not in ("{", "["):
        return LOGIC
    data = read_json(path)
    if isinstance(data, dict) and "header" in data:
        return TRANSFORMER
    if isinstance(data, dict) and "m_total" in data:
        return AUTOMATON
    raise ConfigError(f"{path}: not a transformer or automaton file")


def load_model(path: str, kind: str | None = None, variant: str | None = None):
    from .xlate.artifacts import load_automaton
    kind = kind or detect_kind(path)
    if kind == LOGIC:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}") from None
        return parse_tuple(text, None, variant)
    if kind == TRANSFORMER:
        return transformer_from_json(read_json(path))
    if kind == AUTOMATON:
        return load_automaton(read_json(path))
    raise ConfigError(f"unknown model kind {kind!r}")


def model_tokens(model) -> list[str]:
    """Tokens a model mentions, in its own order where it has one."""
    if isinstance(model, Transformer):
        keys = list(model.em)
    elif isinstance(model, CpgAutomaton):
        keys = list(model.pi)
    elif isinstance(model, FormulaTuple):
        keys = sorted(set().union(*(tokens_of(f) for f in model)))
    else:
        keys = []
    return [k for k in keys if k not in (BOS, EOS)]


def resolve_vocab(cfg: RunConfig, *models) -> Vocab:
    if cfg.vocab is not None:
        return cfg.vocab
    seen: list[str] = []
    for m in models:
        for t in model_tokens(m):
            if t not in seen:
                seen.append(t)
    if not seen:
        raise ConfigError("cannot infer a vocabulary; pass --vocab")
    return Vocab(tuple(seen))


def load_graph(path: str, vocab: Vocab) -> TwoSortedGraph:
    return graph_from_json(vocab, read_json(path))


def side_path(out: str, suffix: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + suffix))


# --------------------------------------------------------------------- subcommands


def _pick_vertices(g: TwoSortedGraph, vertex: int | None, suffix_only: bool) -> list[int]:
    allowed = list(g.suffix_vertices()) if suffix_only else list(range(1, g.n + 1))
    if vertex is None:
        return list(g.suffix_vertices())
    if vertex not in allowed:
        where = "a suffix vertex" if suffix_only else "a vertex"
        raise ConfigError(f"vertex {vertex} is not {where} of the graph (BOS is {g.bos}, n = {g.n})")
    return [vertex]


def cmd_eval_logic(args, cfg: RunConfig) -> int:
    phi = load_model(args.formula, LOGIC, args.variant)
    vocab = resolve_vocab(cfg, phi)
    g = load_graph(args.graph, vocab)
    vs = _pick_vertices(g, args.vertex, False)
    res = {str(v): eval_tuple(phi, g, v) for v in vs}
    if args.vertex is not None:
        print(res[str(args.vertex)])
    else:
        sys.stdout.write(dumps(res))
    return 0


def cmd_eval_transformer(args, cfg: RunConfig) -> int:
    t = load_model(args.model, TRANSFORMER)
    vocab = resolve_vocab(cfg, t)
    g = load_graph(args.graph, vocab)
    vs = _pick_vertices(g, args.vertex, True)
    rows = run(t, g)
    fmt = t.fmt
    res = {}
    for v in vs:
        row = rows[v - g.bos]
        if args.interpret == "bitwise":
            res[str(v)] = interpret_bitwise(row, fmt)
        elif args.interpret == "featurewise":
            res[str(v)] = interpret_featurewise(row, fmt)
        else:
            res[str(v)] = [fmt.to_hex(c) for c in row]
    if args.vertex is not None and args.interpret != "hex":
        print(res[str(args.vertex)])
    else:
        sys.stdout.write(dumps(res))
    return 0


def cmd_run_automaton(args, cfg: RunConfig) -> int:
    a = load_model(args.automaton, AUTOMATON)
    vocab = resolve_vocab(cfg, a)
    g = load_graph(args.graph, vocab)
    vs = _pick_vertices(g, args.vertex, True)
    if args.trace:
        hist = run_rounds(a, g)
        res = {str(v): [h[v - 1] for h in hist] for v in vs}
        sys.stdout.write(dumps(res))
        return 0
    outs = automaton_outputs(a, g)
    res = {str(v): outs[v - g.bos] for v in vs}
    if args.vertex is not None:
        print(res[str(args.vertex)])
    else:
        sys.stdout.write(dumps(res))
    return 0


def _similarity(path: str, fmt: FloatFormat):
    from .xlate.softmax import SimilarityRelation
    return SimilarityRelation.from_json(read_json(path), fmt)


def cmd_compile(args, cfg: RunConfig) -> int:
    from .xlate import artifacts as art
    from .xlate.compose import logic_to_automaton
    from .xlate.cpg2logic import automaton_to_logic
    from .xlate.logic2tf import compile_logic
    from .xlate.softmax import (automaton_to_logic_softmax, logic_to_transformer_softmax,
                                transformer_softmax_to_automaton)
    from .xlate.tf2cpg import transformer_to_automaton

    src, dst = args.from_kind, args.to_kind
    if src == dst:
        raise ConfigError("--from and --to must differ")
    model = load_model(args.input, src, args.variant)
    fmt = model.fmt if isinstance(model, Transformer) else cfg.fmt
    vocab = resolve_vocab(cfg, model)
    rel = _similarity(args.similarity, fmt) if args.similarity else None
    side: dict | None = None
    side_kind = None
    heldout = tuple(args.heldout) if args.heldout else ()

    def a2l(a):
        if rel is not None:
            phi, cert, choose = automaton_to_logic_softmax(a, rel, vocab, cfg.max_len, heldout=heldout)
            return phi, {**cert.to_json(), "diagnostics": choose.diagnostics()}
        phi, cert = automaton_to_logic(a, vocab, cfg.max_len, heldout=heldout)
        return phi, cert.to_json()

    if (src, dst) == (LOGIC, TRANSFORMER):
        if rel is not None:
            t, plan, _ = logic_to_transformer_softmax(model, rel, fmt, vocab, cfg.max_len)
        else:
            t, plan = compile_logic(model, fmt, vocab.labels)
        text, side, side_kind = dumps(transformer_to_json(t)), plan.to_json(), ".plan.json"
    elif (src, dst) == (LOGIC, AUTOMATON):
        if rel is not None:
            raise ConfigError("--similarity applies to logic->transformer, transformer->automaton "
                              "and automaton->logic")
        a = logic_to_automaton(model, fmt, vocab.labels)
        text = dumps(art.automaton_artifact(a, art.logic_source(model, fmt, vocab.labels)))
    elif (src, dst) == (TRANSFORMER, AUTOMATON):
        if rel is not None:
            a, choose = transformer_softmax_to_automaton(model, rel)
            text = dumps(art.automaton_artifact(a, art.softmax_source(model, rel)))
        else:
            a = transformer_to_automaton(model)
            text = dumps(art.automaton_artifact(a, art.transformer_source(model)))
    elif (src, dst) == (AUTOMATON, LOGIC):
        phi, side = a2l(model)
        text, side_kind = phi.render(), ".cert.json"
    elif (src, dst) == (AUTOMATON, TRANSFORMER):
        if rel is not None:
            raise ConfigError("automaton->transformer with --similarity: compile via logic in two steps")
        phi, side = a2l(model)
        t, _ = compile_logic(phi, fmt, vocab.labels)
        text, side_kind = dumps(transformer_to_json(t)), ".cert.json"
    elif (src, dst) == (TRANSFORMER, LOGIC):
        if rel is not None:
            a, _ = transformer_softmax_to_automaton(model, rel)
            phi, cert = automaton_to_logic(a, vocab, cfg.max_len, heldout=heldout)
            side = cert.to_json()
        else:
            phi, side = a2l(transformer_to_automaton(model))
        text, side_kind = phi.render(), ".cert.json"
    else:
        raise ConfigError(f"no translation from {src} to {dst}")
    write_text(args.output, text)
    summary = {"from": src, "to": dst, "output": args.output}
    if side is not None:
        sp = args.side or (side_path(args.output, side_kind) if args.output not in (None, "-") else None)
        if sp is not None:
            write_text(sp, dumps(side))
            summary["side"] = sp
    if args.output not in (None, "-"):
        sys.stdout.write(dumps(summary))
    return 0


def cmd_check_equiv(args, cfg: RunConfig) -> int:
    from .harness import BITWISE, FEATUREWISE, SimilarityWrt, diff_check
    a = load_model(args.a, args.a_kind, args.variant)
    b = load_model(args.b, args.b_kind, args.variant)
    vocab = resolve_vocab(cfg, a, b)
    interp = args.interpretation
    if interp == "auto":
        interp = "featurewise" if isinstance(a, FormulaTuple) or isinstance(b, FormulaTuple) else "bitwise"
    fmt = next((m.fmt for m in (a, b) if isinstance(m, Transformer)), cfg.fmt)
    if interp == "similarity":
        if not args.similarity:
            raise ConfigError("--interpretation similarity needs --similarity FILE")
        mode = SimilarityWrt(_similarity(args.similarity, fmt))
    elif args.similarity:
        raise ConfigError("--similarity is only used with --interpretation similarity")
    else:
        mode = BITWISE if interp == "bitwise" else FEATUREWISE
    report = diff_check(a, b, mode, vocab, cfg.max_len, fmt=fmt, jobs=cfg.jobs,
                        names=(args.a, args.b))
    write_text(args.report, report.dumps())
    if args.report not in (None, "-"):
        print("PASS" if report.passed else f"FAIL: {len(report.mismatches)} mismatches")
    return 0 if report.passed else 1


def _read_prefix(path: str) -> list[str]:
    """A JSON or text file, or the tokens themselves (checked against the vocabulary later)."""
    p = Path(path)
    if not p.is_file():
        return path.split()
    try:
        body = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    try:
        data = json.loads(body)
    except ValueError:
        return body.split()
    if isinstance(data, dict):
        data = data.get("prefix")
    if not isinstance(data, list):
        raise ConfigError(f"{path}: prefix must be a JSON list of tokens or an object with 'prefix'")
    return [str(t) for t in data]


def cmd_generate(args, cfg: RunConfig) -> int:
    from .autoreg import ArgmaxLowIndex, SeededSample, generate, model_format
    model = load_model(args.model, None, args.variant)
    vocab = resolve_vocab(cfg, model)
    prefix = _read_prefix(args.prefix)
    for tok in prefix:
        if tok not in vocab:
            raise ConfigError(f"prefix token {tok!r} is not in the vocabulary {list(vocab.tokens)}")
    policy = ArgmaxLowIndex() if args.policy == "argmax" else SeededSample(cfg.seed)
    fmt = model_format(model, cfg.fmt)
    trace = generate(model, vocab, prefix, policy, args.max_steps, fmt)
    if args.trace:
        write_text(args.trace, dumps(trace.to_json(fmt)))
    print(" ".join(trace.tokens))
    return 0


def cmd_check_floats(args, cfg: RunConfig) -> int:
    from .harness import property_suites
    vocab = cfg.vocab or Vocab.of("a b")
    rep = property_suites(cfg.fmt, seed=cfg.seed, vocab=vocab, saturation_trials=args.trials,
                          max_len=cfg.max_len)
    ok = rep["saturation"]["passed"] and rep["separation"]["passed"] and rep["type_lemma"]["passed"]
    rep["passed"] = ok
    write_text(args.report, dumps(rep))
    if args.report not in (None, "-"):
        print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# --------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fmt", help="float format p,q (default $EDTLOGIC_FORMAT or 3,3)")
    common.add_argument("--vocab", help="vocabulary: token list, or a JSON / text file")
    common.add_argument("--max-len", type=int, help="corpus bound (default $EDTLOGIC_MAX_LEN or 6)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, help="worker processes for corpus sweeps")
    common.add_argument("--variant", choices=["Core", "NonStrict"], help="formula tuple variant")

    ap = argparse.ArgumentParser(prog="edtlogic", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-logic", parents=[common], help="evaluate a formula tuple on a graph")
    p.add_argument("--formula", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--vertex", type=int)
    p.set_defaults(fn=cmd_eval_logic)

    p = sub.add_parser("eval-transformer", parents=[common], help="run a transformer on a graph")
    p.add_argument("--model", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--vertex", type=int)
    p.add_argument("--interpret", choices=["bitwise", "featurewise", "hex"], default="bitwise")
    p.set_defaults(fn=cmd_eval_transformer)

    p = sub.add_parser("run-automaton", parents=[common], help="run an automaton on a graph")
    p.add_argument("--automaton", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--vertex", type=int)
    p.add_argument("--trace", action="store_true", help="print every round's state")
    p.set_defaults(fn=cmd_run_automaton)

    kinds = [LOGIC, TRANSFORMER, AUTOMATON]
    p = sub.add_parser("compile", parents=[common], help="translate between model kinds")
    p.add_argument("--from", dest="from_kind", choices=kinds, required=True)
    p.add_argument("--to", dest="to_kind", choices=kinds, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    p.add_argument("--side", help="where to write the plan or certificate")
    p.add_argument("--similarity", help="similarity relation JSON for softmax-aware translations")
    p.add_argument("--heldout", type=int, nargs="*", default=[7, 8],
                   help="held-out graph sizes checked by the automaton-to-logic certificate")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("check-equiv", parents=[common], help="differential test of two models")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--a-kind", choices=kinds)
    p.add_argument("--b-kind", choices=kinds)
    p.add_argument("--interpretation", choices=["auto", "bitwise", "featurewise", "similarity"],
                   default="auto")
    p.add_argument("--similarity")
    p.add_argument("--report", default="-")
    p.set_defaults(fn=cmd_check_equiv)

    p = sub.add_parser("generate", parents=[common], help="autoregressive generation")
    p.add_argument("--model", required=True)
    p.add_argument("--prefix", required=True)
    p.add_argument("--policy", choices=["argmax", "sample"], default="argmax")
    p.add_argument("--max-steps", type=int, default=16)
    p.add_argument("--trace", help="write the generation trace here")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("check-floats", parents=[common], help="float validators and property suites")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--report", default="-")
    p.set_defaults(fn=cmd_check_floats)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return args.fn(args, cfg)
    except (ValueError, KeyError, OSError) as e:
        msg = str(e) if not isinstance(e, KeyError) else f"missing field {e}"
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
