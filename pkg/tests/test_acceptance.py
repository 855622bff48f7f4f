"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""

import json
import random
import time
from dataclasses import replace
from fractions import Fraction

import pytest

from criteria import record
from edtlogic.cli import main
from edtlogic.cpga import compose_postmap, count_token_automaton, random_tabular
from edtlogic.autoreg import equivalent_wrt
from edtlogic.edt import decompose_multihead, random_transformer
from edtlogic.floatlab import (get_format, representable_halves, saturation_bound, validate_saturation,
                               validate_underflow_k)
from edtlogic.gptl import GPre, And, FormulaTuple, Not, Prop, PSuf, PSufGeq, modal_depth, render
from edtlogic.harness import BITWISE, FEATUREWISE, diff_check, separation_witness, type_lemma_check
from edtlogic.wordgraph import BOS, Vocab
from edtlogic.xlate import (SimilarityRelation, automaton_to_logic, automaton_to_logic_softmax,
                            automaton_to_transformer, compile_logic, logic_to_automaton,
                            logic_to_transformer_softmax, softmax_range, supported_counts,
                            transformer_softmax_to_automaton, transformer_to_automaton, underflow_validated)
from edtlogic.xlate.softmax import vector_to_bits

AB = Vocab.of("a b")
F33, F44 = get_format(3, 3), get_format(4, 4)
MAX_LEN = 6


def counts_for(fmt):
    return sorted(set(supported_counts(fmt)) & set(underflow_validated(fmt)))


def random_formula(rng, depth, counts, strict=True):
    if depth == 0 or rng.random() < 0.25:
        return rng.choice([Prop("a"), Prop("b"), Prop(BOS)])
    r = rng.random()
    if r < 0.15:
        return Not(random_formula(rng, depth, counts, strict))
    if r < 0.35:
        return And(random_formula(rng, depth, counts, strict), random_formula(rng, depth, counts, strict))
    sub = random_formula(rng, depth - 1, counts, strict)
    if r < 0.65:
        return PSuf(sub) if strict else PSufGeq(rng.choice([1] + counts), sub)
    return GPre(rng.choice(counts), sub)


def battery(fmt, size, seed, strict=True):
    """Formula tuples of modal depth 1..3, each with at least one modality."""
    rng = random.Random(seed)
    counts = counts_for(fmt)
    out = []
    while len(out) < size:
        fs = tuple(random_formula(rng, 3, counts, strict) for _ in range(rng.randint(1, 3)))
        if 1 <= max(modal_depth(f) for f in fs) <= 3:
            out.append(FormulaTuple(fs, "Core" if strict else "NonStrict"))
    return out


@pytest.fixture(scope="module")
def compiled():
    """Logic-to-transformer battery: 20 tuples per format, compiled once and reused by the automaton check."""
    t0 = time.time()
    out = []
    for fmt, seed in ((F33, 3), (F44, 4)):
        for phi in battery(fmt, 20, seed):
            t, _ = compile_logic(phi, fmt, AB.labels)
            out.append((fmt, phi, t))
    return out, time.time() - t0


def test_logic_to_transformer(compiled):
    models, elapsed = compiled
    t0 = time.time()
    bad = []
    points = 0
    for fmt, phi, t in models:
        r = diff_check(phi, t, FEATUREWISE, AB, MAX_LEN)
        points += r.points
        if not r.passed:
            bad.append(([render(f) for f in phi], str(fmt), len(r.mismatches)))
    elapsed += time.time() - t0
    ok = not bad and elapsed <= 600 and len(models) >= 20
    record("formulas to transformer, feature-wise", ok,
           f"{len(models)} tuples over F(3,3) and F(4,4), {points} points, {len(bad)} failing, {elapsed:.0f}s")
    assert ok, bad


def test_transformer_to_automaton(compiled):
    models = [t for _, _, t in compiled[0]]
    for seed in range(10):
        models.append(random_transformer(F33, AB.labels, d=1 + seed % 3, h=1 + seed % 2, d_k=1, d_v=1,
                                         d_ff=2, d_out=2, L1=1, L2=1, seed=seed))
    bad = 0
    for t in models:
        bad += len(diff_check(t, transformer_to_automaton(t), BITWISE, AB, MAX_LEN).mismatches)
    ok = bad == 0
    record("transformer to automaton, bit-wise", ok, f"{len(models)} transformers, {bad} mismatches")
    assert ok


def test_automaton_to_logic():
    rows = []
    ok = True
    for seed in range(5):
        a = random_tabular(AB.labels, 2, seed % 2, 1 + seed % 2, 1, seed=seed)
        phi, cert = automaton_to_logic(a, AB, MAX_LEN, heldout=(7, 8))
        train = diff_check(a, phi, FEATUREWISE, AB, MAX_LEN)
        held = cert.heldout
        ok &= train.passed and held["covered_mismatches"] == 0
        rows.append(f"k={a.k} n={a.n} {cert.mode} coverage {held['coverage']:.3f}")
    record("automaton to formulas on covered points", ok, "; ".join(rows))
    assert ok


def test_compositions():
    bad = 0
    runs = 0
    for fmt, phi in [(F33, p) for p in battery(F33, 3, 11)] + [(F44, p) for p in battery(F44, 2, 12)]:
        bad += len(diff_check(phi, logic_to_automaton(phi, fmt, AB.labels), FEATUREWISE, AB, MAX_LEN).mismatches)
        runs += 1
    autos = [count_token_automaton(AB.labels, "a", 1), random_tabular(AB.labels, 2, 1, 1, 1, seed=21),
             random_tabular(AB.labels, 1, 1, 2, 1, seed=22)]
    for a in autos:
        t, _ = automaton_to_transformer(a, F33, AB, MAX_LEN, heldout=())
        bad += len(diff_check(a, t, FEATUREWISE, AB, MAX_LEN).mismatches)
        runs += 1
    ok = bad == 0
    record("formulas to automaton, automaton to transformer", ok, f"{runs} chains, {bad} mismatches")
    assert ok


def _float_output_automaton(fmt, reachable, seed):
    r = random.Random(seed)
    base = random_tabular(AB.labels, 2, 1, 1, 2, seed=seed)
    table = {f"{i:02b}": vector_to_bits(fmt, r.choice(reachable)) for i in range(4)}
    return compose_postmap(base, table, 2 * fmt.nbits)


def test_softmax_translations():
    fmt = F33
    reach = softmax_range(fmt, 2)
    rels = [SimilarityRelation.equality(fmt, reach.keys()), SimilarityRelation.closeness(fmt, Fraction(1, 8))]
    results = []
    for rel in rels:
        for seed in range(2):
            t = replace(random_transformer(fmt, AB.labels, d=3, d_out=2, seed=seed), softmax_output=True)
            a, _ = transformer_softmax_to_automaton(t, rel)
            v = equivalent_wrt(t, a, rel, AB, MAX_LEN)
            results.append(("T->A", rel.kind, len(v.violations)))
        a = _float_output_automaton(fmt, sorted(reach), 4)
        phi, _, _ = automaton_to_logic_softmax(a, rel, AB, MAX_LEN, heldout=())
        v = equivalent_wrt(a, phi, rel, AB, MAX_LEN, fmt=fmt)
        results.append(("A->L", rel.kind, len(v.violations)))
        t2, _, _ = logic_to_transformer_softmax(phi, rel, fmt, AB, MAX_LEN)
        v = equivalent_wrt(phi, t2, rel, AB, MAX_LEN, fmt=fmt)
        results.append(("L->T", rel.kind, len(v.violations)))
    ok = all(n == 0 for _, _, n in results)
    record("softmax translations under equality and closeness", ok,
           ", ".join(f"{d} {k}: {n}" for d, k, n in results))
    assert ok


def test_underflow_checker_is_exhaustive_and_fast():
    t0 = time.time()
    verdicts = {k: validate_underflow_k(F33, k).valid for k in representable_halves(F33)}
    elapsed = time.time() - t0
    ok = elapsed < 1 and len(verdicts) == len(representable_halves(F33))
    record("underflow checker: exhaustive per-k verdicts over F(3,3)", ok,
           f"{len(verdicts)} candidate k, {sum(verdicts.values())} valid, {elapsed:.2f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="supported counts differ from the underflow-validated set; see the ledger")
def test_supported_counts_equal_validated_counts():
    supported = sorted(set(supported_counts(F33)) - {0, 1})
    validated = underflow_validated(F33)
    ok = supported == validated
    record("underflow consistency: supported counts equal validated counts", ok,
           f"supported {supported}, validated {validated}" + ("" if ok else "; expected failure, see ledger"))
    assert ok


def test_saturation_bound():
    rows = []
    ok = True
    for fmt in (F33, F44):
        rep = validate_saturation(fmt, saturation_bound(fmt), 10_000, 0)
        ok &= rep.holds
        rows.append(f"{fmt} k*={saturation_bound(fmt)}: {'0 failures' if rep.holds else 'witness found'}")
    record("saturation checker: sums saturate at k*", ok, "; ".join(rows))
    assert ok


def test_multihead_decomposition():
    bad = 0
    n = 0
    for fmt in (F33, F44):
        for seed in range(4):
            t = random_transformer(fmt, AB.labels, d=3, h=2, d_out=2, L1=1, L2=1, seed=seed)
            bad += len(diff_check(t, decompose_multihead(t), BITWISE, AB, MAX_LEN).mismatches)
            n += 1
    ok = bad == 0
    record("multi-head decomposition is bit-identical", ok, f"{n} transformers, {bad} mismatches")
    assert ok


def test_non_strict_separation_and_battery():
    wit = separation_witness(AB, "a", MAX_LEN)
    bad = 0
    tuples = battery(F33, 6, 31, strict=False) + battery(F44, 4, 32, strict=False)
    for i, phi in enumerate(tuples):
        fmt = F33 if i < 6 else F44
        t, _ = compile_logic(phi, fmt, AB.labels)
        bad += len(diff_check(phi, t, FEATUREWISE, AB, MAX_LEN).mismatches)
    ok = wit is not None and bad == 0
    g, v = (wit[0], wit[1]) if wit else (None, None)
    record("strict/non-strict separation and NonStrict battery", ok,
           f"witness {g.prefix, g.suffix} at v{v}, {len(tuples)} tuples, {bad} mismatches" if wit else "no witness")
    assert ok


def test_type_lemma():
    rep = type_lemma_check(AB, automata=5, k=1, depth=2, max_len=MAX_LEN, seed=0)
    violations = sum(r["violations"] for r in rep["automata"])
    record("type lemma: equal types give equal states", rep["passed"], f"5 automata, {violations} violations")
    assert rep["passed"]


def test_determinism(tmp_path):
    (tmp_path / "f.gptl").write_text("<P>[a]\n<G>=2[!b]\n")
    (tmp_path / "g.gptl").write_text("<P>[a]\n<G>=4[!b]\n")
    base = ["--vocab", "a b", "--seed", "7"]

    def out(name, *args):
        path = tmp_path / name
        assert main([*args, *base]) in (0, 1)
        return path.read_bytes()

    t = str(tmp_path / "t.json")
    main(["compile", "--from", "logic", "--to", "transformer", "--input", str(tmp_path / "f.gptl"),
          "--output", t, *base])
    pairs = []
    for tag in ("1", "8"):
        pairs.append([
            out(f"floats{tag}.json", "check-floats", "--report", str(tmp_path / f"floats{tag}.json"),
                "--jobs", tag, "--trials", "2000"),
            out(f"eq{tag}.json", "check-equiv", "--a", str(tmp_path / "f.gptl"), "--b", t,
                "--report", str(tmp_path / f"eq{tag}.json"), "--jobs", tag),
            out(f"ne{tag}.json", "check-equiv", "--a", str(tmp_path / "f.gptl"), "--b", str(tmp_path / "g.gptl"),
                "--report", str(tmp_path / f"ne{tag}.json"), "--jobs", tag),
            out(f"a{tag}.json", "compile", "--from", "transformer", "--to", "automaton", "--input", t,
                "--output", str(tmp_path / f"a{tag}.json"), "--jobs", tag),
            out(f"l{tag}.gptl", "compile", "--from", "automaton", "--to", "logic",
                "--input", str(tmp_path / f"a{tag}.json"), "--output", str(tmp_path / f"l{tag}.gptl"),
                "--jobs", tag, "--heldout"),
        ])
    # a second run with jobs 1 must reproduce the first byte for byte
    again = out("floats_again.json", "check-floats", "--report", str(tmp_path / "floats_again.json"),
                "--jobs", "1", "--trials", "2000")
    same = all(x == y for x, y in zip(pairs[0], pairs[1])) and again == pairs[0][0]
    failing = json.loads(pairs[0][2])
    ok = same and failing["stats"]["mismatches"] > 0
    record("Determinism: reruns and jobs 1 vs 8 give byte-identical reports", ok,
           f"{len(pairs[0])} reports compared, failing report has {failing['stats']['mismatches']} mismatches")
    assert ok
