import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from irsynth.target_ir.candidate import ArgRef, Candidate, Node, compact
from irsynth.target_ir.eval import EvalFailure, eval_candidate, evaluate_batched, signature_of
from irsynth.target_ir.text import CandidateSyntaxError, parse_candidate, print_candidate
from irsynth.tensor import ScalarKind, TensorType, ValueBox


def T(*shape):
    return TensorType(ScalarKind.F64, shape)


def box(a):
    a = np.asarray(a, dtype=np.float64)
    return ValueBox(T(*a.shape), a)


MATMUL = (
    "%0 = arg 0 : tensor<2x3xf64>; %1 = arg 1 : tensor<3x2xf64>; "
    "%2 = thlo.dot_general(%0, %1) {batching_dims = [], contracting_dims = [[1, 0]]} : tensor<2x2xf64>; return %2"
)


def test_arg_candidate_is_identity():
    c = Candidate.of_arg("thlo", 0, T(3))
    v = box([1.0, 2.0, 3.0])
    assert eval_candidate(c, [v]).same_bits(v)
    assert print_candidate(c) == "%0 = arg 0 : tensor<3xf64>; return %0"


def test_hand_matrix_product(thlo):
    c = parse_candidate(MATMUL, thlo)
    out = eval_candidate(c, [box([[1, 2, 3], [4, 5, 6]]), box([[7, 8], [9, 10], [11, 12]])])
    assert out.data.tolist() == [[58, 64], [139, 154]]
    assert c.op_count == 1


def test_div_by_zero_fails(thlo):
    c = parse_candidate(
        "%0 = arg 0 : tensor<3xf64>; %1 = const 0.0 : tensor<3xf64>; "
        "%2 = thlo.map(%0, %1) region<2>(div) : tensor<3xf64>; return %2",
        thlo,
    )
    with pytest.raises(EvalFailure):
        eval_candidate(c, [box([1.0, 2.0, 3.0])])


def test_int_div_by_zero_fails(thlo):
    c = parse_candidate(
        "%0 = arg 0 : tensor<3xf64>; %1 = const 0.0 : tensor<3xf64>; "
        "%2 = thlo.div(%0, %1) : tensor<3xf64>; return %2",
        thlo,
    )
    _, bad = evaluate_batched(c, [np.array([[1, 2, 3]], dtype=np.int64)], int_mode=True)
    assert bad.all()


@pytest.mark.parametrize("text", [
    MATMUL,
    "%0 = arg 0 : tensor<3x4xf64>; %1 = thlo.transpose(%0) {permutation = [1, 0]} : tensor<4x3xf64>; return %1",
    "%0 = arg 0 : tensor<3x4xf64>; %1 = const 0.0 : tensor<f64>; "
    "%2 = thlo.reduce(%0, %1) {dimensions = [0]} region<2>(add) : tensor<4xf64>; return %2",
    "%0 = arg 0 : tensor<f64>; %1 = thlo.broadcast_in_dim(%0) {result_shape = [3, 4]} : tensor<3x4xf64>; return %1",
])
def test_print_parse_round_trip(thlo, text):
    c = parse_candidate(text, thlo)
    assert print_candidate(c) == text
    assert parse_candidate(print_candidate(c), thlo) == c


@pytest.mark.parametrize("text, msg", [
    ("%0 = arg 0 : tensor<3xf64>; return %1", "undefined"),
    ("%1 = arg 0 : tensor<3xf64>; return %1", "expected %0"),
    ("%0 = arg 0 : tensor<3xf64>; %1 = thlo.frobnicate(%0) : tensor<3xf64>; return %1", "unknown op"),
    ("%0 = arg 0 : tensor<3xf64>; %1 = other.add(%0, %0) : tensor<3xf64>; return %1", "dialect"),
])
def test_parse_errors(thlo, text, msg):
    with pytest.raises(CandidateSyntaxError, match=msg):
        parse_candidate(text, thlo)


def _inputs(shape, n, seed):
    return [np.random.default_rng(seed).uniform(-10, 10, (n,) + shape)]


def test_signatures_x_plus_x_and_two_x(thlo):
    plus = parse_candidate("%0 = arg 0 : tensor<3xf64>; %1 = thlo.add(%0, %0) : tensor<3xf64>; return %1", thlo)
    two = parse_candidate(
        "%0 = arg 0 : tensor<3xf64>; %1 = const 2.0 : tensor<3xf64>; %2 = thlo.mul(%1, %0) : tensor<3xf64>; return %2", thlo
    )
    I = _inputs((3,), 2, 0)
    assert signature_of(plus, I) == signature_of(two, I)


def test_transpose_involution(thlo):
    tt = parse_candidate(
        "%0 = arg 0 : tensor<3x4xf64>; %1 = thlo.transpose(%0) {permutation = [1, 0]} : tensor<4x3xf64>; "
        "%2 = thlo.transpose(%1) {permutation = [1, 0]} : tensor<3x4xf64>; return %2",
        thlo,
    )
    I = _inputs((3, 4), 3, 1)
    assert signature_of(tt, I) == signature_of(Candidate.of_arg("thlo", 0, T(3, 4)), I)


def test_x_plus_one_differs(thlo):
    c = parse_candidate(
        "%0 = arg 0 : tensor<3xf64>; %1 = const 1.0 : tensor<3xf64>; %2 = thlo.add(%0, %1) : tensor<3xf64>; return %2", thlo
    )
    I = _inputs((3,), 1, 2)
    assert signature_of(c, I) != signature_of(Candidate.of_arg("thlo", 0, T(3)), I)


def test_compact_drops_dead_nodes():
    c = Candidate("thlo", (Node(ArgRef(0), T(2)), Node(ArgRef(1), T(3))), 1)
    k = compact(c)
    assert len(k.nodes) == 1 and k.nodes[0].head == ArgRef(1)


shapes = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))


@settings(max_examples=40, deadline=None)
@given(shapes, st.integers(0, 2**31))
def test_dot_general_is_matmul(thlo, dims, seed):
    m, k, n = dims
    rng = np.random.default_rng(seed)
    a, b = rng.integers(-9, 9, (1, m, k)).astype(float), rng.integers(-9, 9, (1, k, n)).astype(float)
    c = parse_candidate(
        f"%0 = arg 0 : {T(m, k)}; %1 = arg 1 : {T(k, n)}; "
        f"%2 = thlo.dot_general(%0, %1) {{batching_dims = [], contracting_dims = [[1, 0]]}} : {T(m, n)}; return %2",
        thlo,
    )
    out, bad = evaluate_batched(c, [a, b])
    expect = [[sum(a[0, i, t] * b[0, t, j] for t in range(k)) for j in range(n)] for i in range(m)]
    assert not bad.any() and out[0].tolist() == expect


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=3, max_side=4),
                  elements=st.integers(-100, 100).map(float)), st.data())
def test_transpose_and_reduce_semantics(thlo, x, data):
    r = x.ndim
    perm = data.draw(st.permutations(range(r)))
    out_shape = tuple(x.shape[p] for p in perm)
    c = parse_candidate(
        f"%0 = arg 0 : {T(*x.shape)}; %1 = thlo.transpose(%0) {{permutation = {list(perm)}}} : {T(*out_shape)}; return %1",
        thlo,
    )
    got, _ = evaluate_batched(c, [x[None]])
    for idx in itertools.product(*map(range, out_shape)):
        src = [0] * r
        for axis, p in enumerate(perm):
            src[p] = idx[axis]
        assert got[0][idx] == x[tuple(src)]
    dims = sorted(data.draw(st.sets(st.integers(0, r - 1), min_size=1, max_size=r - 1)))
    keep = tuple(s for d, s in enumerate(x.shape) if d not in dims)
    c = parse_candidate(
        f"%0 = arg 0 : {T(*x.shape)}; %1 = const 0.0 : tensor<f64>; "
        f"%2 = thlo.reduce(%0, %1) {{dimensions = {dims}}} region<2>(add) : {T(*keep)}; return %2",
        thlo,
    )
    got, _ = evaluate_batched(c, [x[None]])
    assert np.array_equal(got[0], x.sum(axis=tuple(dims)))
