import logging
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import kernel, sir
from irsynth.dialect.model import DialectDef
from irsynth.preprocess import distribute_loops, minify_shapes
from irsynth.synth.config import SynthConfig, SynthStats
from irsynth.synth.engine import Enumerator, compositions, spec_check, synthesize, within_tolerance
from irsynth.synth.space import filter_types, gen_regions, pick_operations, static_check
from irsynth.source_ir.interp import gen_random_batch
from irsynth.target_ir.candidate import ArgRef
from irsynth.target_ir.text import parse_candidate
from irsynth.tensor import ScalarKind, TensorType
from irsynth.validate import int_exhaustive_check


def T(*shape):
    return TensorType(ScalarKind.F64, shape)


def enumerator(f, d, seed=0, cfg=None):
    cfg = cfg or SynthConfig(seed=seed)
    I_n = gen_random_batch(f, cfg.n_small, seed=seed)
    return Enumerator(f, d, cfg, I_n, SynthStats(), time.monotonic() + 60)


def only(d, *names):
    return DialectDef(d.name, tuple(op for op in d.ops if op.name in names))


def test_identity_found_at_init(thlo):
    f = sir("dim N = 3\nfunc f(A: f64[N]) { return A; }")
    r = synthesize(f, thlo)
    assert r.status == "raised"
    assert r.candidate.op_count == 0 and r.candidate.nodes[r.candidate.root].head == ArgRef(0)
    assert r.stats.enumerated == 0


def test_transpose_found_in_first_round(thlo):
    f = sir(
        "dim N = 3\ndim M = 4\nfunc f(A: f64[N][M], B: f64[M][N]) {"
        " for i in 0 .. N { for j in 0 .. M { B[j][i] = A[i][j]; } } return B; }"
    )
    r = synthesize(distribute_loops(f)[0].projection("B"), only(thlo, "transpose"))
    assert r.status == "raised" and r.stats.rounds == 1
    root = r.candidate.nodes[r.candidate.root]
    assert root.head.name == "transpose" and dict(root.attrs)["permutation"] == (1, 0)


def test_unmatched_result_class_exhausts(thlo):
    f = sir("dim N = 3\nfunc f(A: f64[N], s: f64) { s = s + A[0] * A[1] - A[2]; return s; }")
    r = synthesize(f, only(thlo, "transpose"), SynthConfig(max_ops=2))
    assert r.status == "exhausted" and r.candidate is None


def test_init_candidates_matvec_shapes(thlo):
    f = sir(
        "dim N = 3\ndim M = 4\nfunc mv(A: f64[N][M], x: f64[M]) { local y: f64[N];"
        " for i in 0 .. N { y[i] = 0.0; for j in 0 .. M { y[i] += A[i][j] * x[j]; } } return y; }"
    )
    f = distribute_loops(f)[0].projection("y")
    en = enumerator(f, thlo)
    assert en.init_candidates() is None
    assert len(en.cs) <= 10
    types = {e.type for e in en.cs.entries}
    assert {T(3, 4), T(4), T(3), T()} <= types


def test_init_candidates_scalar_param(thlo):
    f = sir("func f(a: f64, b: f64) { b = a * a; return b; }")
    f = distribute_loops(f)[0].projection("b")
    en = enumerator(f, thlo)
    en.init_candidates()
    assert len(en.cs) == 3


def test_duplicate_argument_dropped_with_warning(thlo, caplog):
    f = sir("dim N = 3\nfunc f(A: f64[N], B: f64[N], C: f64[N]) { for i in 0 .. N { C[i] = A[i] * B[i]; } return C; }")
    f = distribute_loops(f)[0].projection("C")
    cfg = SynthConfig()
    I_n = gen_random_batch(f, 1, seed=0)
    I_n[1] = I_n[0].copy()
    with caplog.at_level(logging.WARNING):
        en = Enumerator(f, thlo, cfg, I_n, SynthStats(), time.monotonic() + 60)
        en.init_candidates()
    assert "dropped" in caplog.text
    assert sum(1 for e in en.cs.entries if e.arg >= 0) == 1


def test_filter_types_counts(thlo):
    members = [(0, T(3, 4)), (1, T())]
    assert [len(s) for s in filter_types(members, thlo.op("dot_general"))] == [1, 1]
    assert filter_types(members, thlo.op("constant")) == []
    three = [(k, T(3)) for k in range(3)]
    slots = filter_types(three, thlo.op("add"))
    assert len(slots[0]) * len(slots[1]) == 9


def test_region_counts(thlo):
    assert len(gen_regions(thlo.op("reduce"))) == 2
    assert [r.op for r in gen_regions(thlo.op("map"))] == ["add", "sub", "mul", "div"]
    assert gen_regions(thlo.op("transpose")) == []


def test_static_check_examples(thlo):
    contract = (("batching_dims", ()), ("contracting_dims", ((1, 0),)))
    assert static_check(thlo.op("dot_general"), [T(3, 4), T(3, 4)], contract, 4) is None
    assert static_check(thlo.op("transpose"), [T(3, 4)], (("permutation", (1, 0)),), 4) == T(4, 3)
    assert static_check(thlo.op("dot_general"), [T(3, 4), T(5, 7)], (("batching_dims", ()), ("contracting_dims", ())), 2) is None


def test_operation_order(thlo):
    names = lambda ops: [o.name for o in ops]
    f = kernel("gemm")
    assert names(pick_operations(f, thlo, SynthConfig(heuristics="none"))) == names(thlo.ops)
    both = names(pick_operations(f, thlo, SynthConfig(heuristics="both")))
    assert both[:2] == ["dot_general", "reduce"]
    assert set(both[2:5]) == {"add", "mul", "map"}
    assert sorted(both) == sorted(names(thlo.ops))
    g = sir("dim N = 3\nfunc f(A: f64[N], B: f64[N]) { for i in 0 .. N { B[i] = A[i] - B[i]; } return B; }")
    dia = names(pick_operations(g, thlo, SynthConfig(heuristics="dialect")))
    assert dia[:2] == ["sub", "map"]


@given(st.integers(0, 6), st.integers(0, 3))
def test_compositions(total, parts):
    out = list(compositions(total, parts))
    assert all(len(c) == parts and sum(c) == total for c in out)
    assert len(out) == len(set(out))
    assert out == sorted(out)
    if parts:
        from math import comb
        assert len(out) == comb(total + parts - 1, parts - 1)


def test_spec_check_examples(thlo):
    f, _ = minify_shapes(kernel("gemm"))
    f = distribute_loops(f)[-1].projection("C")
    I = gen_random_batch(f, 3, seed=4)
    partial = parse_candidate(
        "%0 = arg 2 : tensor<3x5xf64>; %1 = arg 3 : tensor<5x4xf64>; "
        "%2 = thlo.dot_general(%0, %1) {batching_dims = [], contracting_dims = [[1, 0]]} : tensor<3x4xf64>; return %2",
        thlo,
    )
    assert [p.name for p in f.params] == ["alpha", "C", "A", "B"]
    assert not spec_check(I, f, partial)
    nan = parse_candidate(
        "%0 = arg 1 : tensor<3x4xf64>; %1 = const 0.0 : tensor<3x4xf64>; "
        "%2 = thlo.div(%1, %1) : tensor<3x4xf64>; return %2",
        thlo,
    )
    assert not spec_check(I, f, nan)


def test_within_tolerance():
    ref = np.array([[1.0, 100.0]])
    assert within_tolerance(ref * (1 + 1e-7), ref, 1e-5).all()
    assert not within_tolerance(ref * (1 + 2e-5), ref, 1e-5).any()
    assert not within_tolerance(np.array([[np.nan, 1.0]]), ref, 1e-5).any()


def test_counters_balance(thlo):
    f, _ = minify_shapes(kernel("atax"))
    for sl in distribute_loops(f):
        for n in sl.produced:
            r = synthesize(sl.projection(n), thlo)
            s = r.stats
            assert s.enumerated == s.static_filtered + s.evaluated
            assert s.equiv_filtered + s.eval_failed <= s.evaluated
            assert r.status == "raised"


def test_doitgen_single_op(thlo):
    f, _ = minify_shapes(kernel("doitgen"))
    (sl,) = distribute_loops(f)
    (name,) = sl.produced
    r = synthesize(sl.projection(name), thlo)
    assert r.status == "raised" and r.candidate.op_count == 1


def test_gemm_solution_is_int_equivalent(thlo):
    f, _ = minify_shapes(kernel("gemm"))
    proj = distribute_loops(f)[-1].projection("C")
    r = synthesize(proj, thlo)
    assert r.status == "raised"
    ops = {n.head.name for n in r.candidate.nodes if n.is_op}
    assert "dot_general" in ops
    chk = int_exhaustive_check(proj, r.candidate, tuple(range(-2, 3)), {"NI": 2, "NJ": 2, "NK": 2})
    assert chk.equivalent and chk.cases == 10**6 and not chk.exhaustive


def test_same_seed_same_result(thlo):
    f, _ = minify_shapes(kernel("mvt"))
    proj = distribute_loops(f)[0].projection(distribute_loops(f)[0].produced[0])
    a = synthesize(proj, thlo, SynthConfig(seed=3))
    b = synthesize(proj, thlo, SynthConfig(seed=3))
    assert a.candidate == b.candidate
    assert a.stats.to_dict() | {"time_s": 0} == b.stats.to_dict() | {"time_s": 0}


def test_budget_stops_search(thlo):
    f, _ = minify_shapes(kernel("gemm"))
    proj = distribute_loops(f)[-1].projection("C")
    r = synthesize(proj, thlo, SynthConfig(max_evaluated=1000))
    assert r.status == "timeout" and "budget" in r.message


@pytest.mark.parametrize("bad", [dict(n_small=0), dict(n_large=5), dict(delta=0.0), dict(heuristics="x"), dict(input_range=(1, 1))])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SynthConfig(**bad)
