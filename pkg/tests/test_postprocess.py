import numpy as np
import pytest

from conftest import kernel
from irsynth.pipeline import raise_function
from irsynth.postprocess import AmbiguousDim, MissingSlice, compose_slices, restore_shapes
from irsynth.preprocess import ShapeMap, distribute_loops, minify_shapes
from irsynth.source_ir.interp import gen_random_batch, run_batched
from irsynth.target_ir.candidate import Candidate
from irsynth.target_ir.text import parse_candidate
from irsynth.tensor import ScalarKind, TensorType

M = ShapeMap((("N", 1000, 3), ("M", 1100, 4)))


def test_transpose_keeps_permutation(thlo):
    c = parse_candidate(
        "%0 = arg 0 : tensor<3x4xf64>; %1 = thlo.transpose(%0) {permutation = [1, 0]} : tensor<4x3xf64>; return %1", thlo
    )
    r = restore_shapes(c, M)
    assert r.nodes[0].type.shape == (1000, 1100)
    assert r.nodes[1].type.shape == (1100, 1000)
    assert dict(r.nodes[1].attrs)["permutation"] == (1, 0)


def test_zero_constant_resized(thlo):
    c = parse_candidate("%0 = const 0.0 : tensor<3xf64>; return %0", thlo)
    r = restore_shapes(c, M)
    assert r.result_type.shape == (1000,)
    assert r.nodes[0].head.value.data.shape == (1000,) and not r.nodes[0].head.value.data.any()


def test_size_valued_attrs_follow_dims(thlo):
    c = parse_candidate(
        "%0 = arg 0 : tensor<f64>; %1 = thlo.broadcast_in_dim(%0) {result_shape = [4, 3]} : tensor<4x3xf64>; return %1", thlo
    )
    r = restore_shapes(c, M)
    assert dict(r.nodes[1].attrs)["result_shape"] == (1100, 1000)


def test_unknown_size_is_ambiguous(thlo):
    c = Candidate.of_arg("thlo", 0, TensorType(ScalarKind.F64, (7,)))
    with pytest.raises(AmbiguousDim):
        restore_shapes(c, M)


@pytest.fixture(scope="module")
def doitgen(thlo):
    f = kernel("doitgen")
    return f, raise_function(f, thlo)


def test_doitgen_at_test_scale(doitgen):
    f, rep = doitgen
    assert rep.status == "raised" and rep.restored_check
    sizes = {"NR": 30, "NQ": 40, "NP": 50}
    g = f.with_dims(sizes)
    args = gen_random_batch(g, 3, seed=9)
    ref, _ = run_batched(g, args)
    out, bad = rep.program.evaluate(args, sizes)
    assert not bad.any()
    np.testing.assert_allclose(out[0], ref[0], rtol=1e-9, atol=1e-9)


def test_program_text(doitgen):
    _, rep = doitgen
    text = rep.program.to_text()
    assert text.startswith("func @doitgen(%A: tensor<150x140x160xf64>, %C4: tensor<160x160xf64>)")
    assert "thlo.dot_general" in text and text.rstrip().endswith("}")
    assert rep.program.to_text() == text


def test_2mm_composition(thlo):
    f = kernel("2mm")
    rep = raise_function(f, thlo)
    assert rep.status == "raised"
    parts = rep.program.parts
    assert parts[0].slice.produced == ("tmp",)
    assert any("tmp" in p.slice.consumed for p in parts[1:])
    assert rep.ops_total == 7 and rep.ops_max == 3


def test_missing_slice(thlo):
    fm, m = minify_shapes(kernel("2mm"))
    slices = distribute_loops(fm)
    with pytest.raises(MissingSlice) as e:
        compose_slices([(s, None) for s in slices], m, kernel("2mm"), "thlo")
    assert len(e.value.names) == len(slices)


def test_single_slice_wrapper(thlo):
    f = kernel("doitgen")
    fm, m = minify_shapes(f)
    (sl,) = distribute_loops(fm)
    c = Candidate.of_arg("thlo", 0, fm.type_of(sl.produced[0]))
    prog = compose_slices([(sl, c)], m, f, "thlo")
    assert len(prog.parts) == 1 and prog.ops_total == 0
