import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KERNELS, kernel, sir
from oracle import oracle_run
from irsynth.preprocess import minify_shapes
from irsynth.source_ir.ast import ForLoop
from irsynth.source_ir.interp import (
    IntDivisionByZero,
    gen_random_batch,
    gen_random_inputs,
    int_divide,
    interpret,
    run_batched,
)
from irsynth.source_ir.parser import SirSyntaxError, parse_function
from irsynth.source_ir.printer import print_function
from irsynth.tensor import ScalarKind, TensorType, ValueBox


def depth(body):
    return max((1 + depth(s.body) for s in body if isinstance(s, ForLoop)), default=0)


def test_gemm_parses_to_triple_nest():
    f = kernel("gemm")
    assert f.name == "gemm"
    assert [p.name for p in f.params] == ["alpha", "beta", "C", "A", "B"]
    assert depth(f.body) == 3
    assert f.returns == ("C",)


@pytest.mark.parametrize("text, msg", [
    ("dim N = 4\nfunc f(A: f64[N]) { for i in 0 .. N { A[i*i] = 1.0; } return A; }", "non-affine"),
    ("func f(A: f64[N]) { return A; }", "undeclared dimension"),
    ("dim N = 4\nfunc f(A: f64[N]) { }", "no return"),
    ("dim N = 4\nfunc f(A: f64[N]) { return B; }", "undefined"),
])
def test_syntax_errors(text, msg):
    with pytest.raises(SirSyntaxError, match=msg):
        parse_function(text)


def test_identity_function():
    f = sir("dim N = 3\nfunc ident(v: f64[N]) { return v; }")
    v = ValueBox(TensorType(ScalarKind.F64, (3,)), np.array([1.0, -2.0, 3.5]))
    (out,) = interpret(f, [v])
    assert out.same_bits(v)


def test_gemm_identity_matrix():
    f = kernel("gemm").with_dims({"NI": 2, "NJ": 2, "NK": 2})
    t = lambda *s: TensorType(ScalarKind.F64, s)
    args = [
        ValueBox(t(), 1.0), ValueBox(t(), 0.0), ValueBox(t(2, 2), np.zeros((2, 2))),
        ValueBox(t(2, 2), np.eye(2)), ValueBox(t(2, 2), np.array([[5.0, 6], [7, 8]])),
    ]
    (out,) = interpret(f, args)
    assert out.data.tolist() == [[5, 6], [7, 8]]


@pytest.mark.parametrize("name", KERNELS)
def test_print_parse_round_trip(name):
    f = kernel(name)
    assert parse_function(print_function(f)) == f


def test_random_inputs_shape_and_range():
    f = sir("dim N = 3\nfunc f(A: f64[N][N]) { return A; }")
    (tup,) = gen_random_inputs(f, 1, seed=3)
    assert len(tup) == 1 and tup[0].data.shape == (3, 3)
    assert np.all(np.abs(tup[0].data) <= 10)
    assert gen_random_inputs(f, 0) == []


def test_random_inputs_deterministic():
    f = kernel("gemm").with_dims({"NI": 3, "NJ": 4, "NK": 5})
    a = gen_random_inputs(f, 4, seed=11)
    b = gen_random_inputs(f, 4, seed=11)
    assert all(x.same_bits(y) for ta, tb in zip(a, b) for x, y in zip(ta, tb))


def test_doitgen_matches_oracle():
    f, _ = minify_shapes(kernel("doitgen"))
    args = gen_random_batch(f, 5, seed=0)
    outs, _ = run_batched(f, args)
    for b in range(5):
        ref = oracle_run(f, [a[b] for a in args])
        assert np.array(ref[0]).tobytes() == outs[0][b].tobytes()


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(KERNELS), st.integers(0, 2**32 - 1))
def test_interpreter_agrees_with_oracle(name, seed):
    f, _ = minify_shapes(kernel(name))
    args = gen_random_batch(f, 2, seed=seed)
    outs, _ = run_batched(f, args)
    for b in range(2):
        ref = oracle_run(f, [a[b] for a in args])
        for r, o in zip(ref, outs):
            assert np.array(r, dtype=np.float64).tobytes() == o[b].tobytes()


@given(st.integers(-10**6, 10**6), st.integers(-1000, 1000).filter(bool))
def test_int_divide_truncates(a, b):
    q = int(int_divide(a, b))
    expect = abs(a) // abs(b) * (1 if (a < 0) == (b < 0) else -1)
    assert q == expect


def test_int_division_by_zero_raises():
    f = sir("func f(a: i64, b: i64) { local c: i64; c = a / b; return c; }")
    t = TensorType(ScalarKind.I64, ())
    with pytest.raises(IntDivisionByZero):
        interpret(f, [ValueBox(t, 3), ValueBox(t, 0)])
    (q,) = interpret(f, [ValueBox(t, -7), ValueBox(t, 2)])
    assert int(q.data) == -3


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=4, max_size=4))
def test_int_mode_matches_oracle(vals):
    f = sir("dim N = 2\nfunc f(A: i64[N], B: i64[N]) { for i in 0 .. N { A[i] = A[i] * B[i] - A[i] / (B[i] + 100); } return A; }")
    a, b = np.array(vals[:2]), np.array(vals[2:])
    (out,), _ = run_batched(f, [a[None], b[None]], int_mode=True)
    assert out[0].tolist() == oracle_run(f, [a, b])[0]
