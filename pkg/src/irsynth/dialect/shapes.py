"""Result-type inference rules and attribute value domains.

Shape rules are looked up by the identifier an op names in its ``shape`` line.
Attribute bindings are tuples of ``(name, value)`` pairs in the op's declared order.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

from ..tensor import MAX_RANK, ScalarKind, TensorType
from .model import AttributeSpec, AttrKind, OpDef

AttrBinding = tuple[tuple[str, object], ...]


class TypeInferenceError(Exception):
    pass


class ShapeMismatch(TypeInferenceError):
    pass


class InvalidAttribute(TypeInferenceError):
    pass


ShapeRule = Callable[[OpDef, Sequence[TensorType], dict], TensorType]
SHAPE_RULES: dict[str, ShapeRule] = {}


def shape_rule(name: str):
    def register(fn: ShapeRule) -> ShapeRule:
        SHAPE_RULES[name] = fn
        return fn

    return register


def _make(elem: ScalarKind, shape) -> TensorType:
    if len(shape) > MAX_RANK:
        raise ShapeMismatch(f"result rank {len(shape)} exceeds {MAX_RANK}")
    return TensorType(elem, tuple(shape))


def _check_dims(dims, rank: int, what: str):
    if any(not 0 <= d < rank for d in dims):
        raise InvalidAttribute(f"{what} {list(dims)} out of range for rank {rank}")
    if len(set(dims)) != len(dims):
        raise InvalidAttribute(f"{what} {list(dims)} repeats a dimension")


@shape_rule("elementwise")
def _elementwise(op, ts, attrs):
    first = ts[0]
    for t in ts[1:]:
        if t.shape != first.shape:
            raise ShapeMismatch(f"{op.name}: operand shapes {first.shape} and {t.shape} differ")
    return first


@shape_rule("dot_general")
def _dot_general(op, ts, attrs):
    lhs, rhs = ts
    batch = tuple(attrs.get("batching_dims", ()))
    contract = tuple(attrs.get("contracting_dims", ()))
    pairs = batch + contract
    _check_dims([l for l, _ in pairs], lhs.rank, "lhs dims")
    _check_dims([r for _, r in pairs], rhs.rank, "rhs dims")
    for l, r in pairs:
        if lhs.shape[l] != rhs.shape[r]:
            raise ShapeMismatch(f"dot_general: lhs dim {l} ({lhs.shape[l]}) != rhs dim {r} ({rhs.shape[r]})")
    used_l = {l for l, _ in pairs}
    used_r = {r for _, r in pairs}
    shape = [lhs.shape[l] for l, _ in batch]
    shape += [s for i, s in enumerate(lhs.shape) if i not in used_l]
    shape += [s for i, s in enumerate(rhs.shape) if i not in used_r]
    return _make(lhs.elem, shape)


@shape_rule("reduce")
def _reduce(op, ts, attrs):
    x = ts[0]
    dims = tuple(attrs["dimensions"])
    _check_dims(dims, x.rank, "reduce dimensions")
    if list(dims) != sorted(dims) or not dims:
        raise InvalidAttribute("reduce dimensions must be a non-empty increasing list")
    return _make(x.elem, [s for i, s in enumerate(x.shape) if i not in dims])


@shape_rule("transpose")
def _transpose(op, ts, attrs):
    x = ts[0]
    perm = tuple(attrs["permutation"])
    if sorted(perm) != list(range(x.rank)):
        raise InvalidAttribute(f"permutation {list(perm)} is not a bijection on rank {x.rank}")
    return _make(x.elem, [x.shape[p] for p in perm])


def _embed(x: TensorType, shape, dims, exact: bool):
    if len(dims) != x.rank:
        raise InvalidAttribute(f"broadcast dimensions {list(dims)} do not match operand rank {x.rank}")
    _check_dims(dims, len(shape), "broadcast dimensions")
    if list(dims) != sorted(dims):
        raise InvalidAttribute("broadcast dimensions must be increasing")
    for i, d in enumerate(dims):
        if x.shape[i] != shape[d] and (exact or x.shape[i] != 1):
            raise ShapeMismatch(f"cannot broadcast dim {i} of {x.shape} to {tuple(shape)}")
    return _make(x.elem, shape)


@shape_rule("broadcast_in_dim")
def _broadcast_in_dim(op, ts, attrs):
    return _embed(ts[0], tuple(attrs["result_shape"]), tuple(attrs.get("broadcast_dimensions", ())), exact=False)


@shape_rule("broadcast")
def _broadcast(op, ts, attrs):
    return _embed(ts[0], tuple(attrs["shape"]), tuple(attrs["dimensions"]), exact=True)


@shape_rule("fill")
def _fill(op, ts, attrs):
    return _make(ts[0].elem, tuple(attrs["shape"]))


@shape_rule("constant")
def _constant(op, ts, attrs):
    return TensorType(ScalarKind(op.result_type.split("-")[0]), ())


@shape_rule("matmul")
def _matmul(op, ts, attrs):
    a, b = ts
    if a.rank != 2 or b.rank != 2:
        raise ShapeMismatch("matmul needs two matrices")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: inner dims {a.shape[1]} and {b.shape[0]} differ")
    return _make(a.elem, (a.shape[0], b.shape[1]))


@shape_rule("matvec")
def _matvec(op, ts, attrs):
    a, x = ts
    if a.rank != 2 or x.rank != 1:
        raise ShapeMismatch("matvec needs a matrix and a vector")
    if a.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"matvec: inner dims {a.shape[1]} and {x.shape[0]} differ")
    return _make(a.elem, (a.shape[0],))


@shape_rule("dot")
def _dot(op, ts, attrs):
    a, b = ts
    if a.rank != 1 or b.rank != 1 or a.shape != b.shape:
        raise ShapeMismatch("dot needs two vectors of equal length")
    return _make(a.elem, ())


@shape_rule("reshape")
def _reshape(op, ts, attrs):
    x = ts[0]
    shape = tuple(attrs["shape"])
    if _volume(shape) != x.size:
        raise ShapeMismatch(f"cannot reshape {x.shape} to {shape}")
    return _make(x.elem, shape)


def _volume(shape) -> int:
    n = 1
    for s in shape:
        n *= s
    return n


def infer_result_type(op: OpDef, operand_types: Sequence[TensorType], attrs) -> TensorType:
    """Concrete result type of ``op`` applied to operands of the given types.

    Raises ShapeMismatch or InvalidAttribute when the application is ill-typed.
    """
    if len(operand_types) != len(op.operand_types):
        raise ShapeMismatch(f"{op.name} takes {len(op.operand_types)} operands, got {len(operand_types)}")
    for k, (t, cls) in enumerate(zip(operand_types, op.operand_types)):
        if t.type_class != cls:
            raise ShapeMismatch(f"{op.name} operand {k} must be {cls}, got {t}")
    if len({t.elem for t in operand_types}) > 1:
        raise ShapeMismatch(f"{op.name}: mixed element kinds")
    attrs = dict(attrs)
    missing = [s.name for s in op.attr_specs if s.name not in attrs]
    if missing:
        raise InvalidAttribute(f"{op.name}: missing attributes {missing}")
    try:
        result = SHAPE_RULES[op.shape_rule](op, list(operand_types), attrs)
    except (IndexError, KeyError, TypeError) as e:
        raise InvalidAttribute(f"{op.name}: malformed attributes ({e})") from None
    if result.type_class != op.result_type:
        raise ShapeMismatch(f"{op.name}: result {result} is not a {op.result_type}")
    return result


# Longest dim_pairs list generated (dot_general may contract or batch over
# several dimension pairs at once).
DIM_PAIRS_MAX = 2


def attr_values(spec: AttributeSpec, operand_types: Sequence[TensorType], shapes: Iterable[tuple] = ()) -> list:
    """All candidate values for one attribute, in documented enumeration order."""
    rank = operand_types[0].rank if operand_types else 0
    if spec.kind is AttrKind.Permutation:
        return [tuple(p) for p in itertools.permutations(range(rank))]
    if spec.kind is AttrKind.DimSubset:
        return [c for n in range(1, rank + 1) for c in itertools.combinations(range(rank), n)]
    if spec.kind is AttrKind.IntScalar:
        lo, hi = spec.bounds
        return list(range(lo, hi + 1))
    if spec.domain == "dim_pairs":
        lhs, rhs = operand_types[0], operand_types[1]
        # Rank-aware only: size agreement is left to the shape rule, so
        # mismatched pairs are generated and then rejected statically.
        pairs = [(l, r) for l in range(lhs.rank) for r in range(rhs.rank)]
        return [c for n in range(DIM_PAIRS_MAX + 1) for c in itertools.combinations(pairs, n)]
    if spec.domain == "shapes":
        return [tuple(s) for s in shapes]
    if spec.domain == "embeddings":
        width = max((len(s) for s in shapes), default=0)
        return [c for c in itertools.combinations(range(width), rank)]
    raise ValueError(f"no enumeration for attribute {spec}")


def gen_attr_bindings(op: OpDef, operand_types: Sequence[TensorType], shapes: Iterable[tuple] = ()) -> list[AttrBinding]:
    shapes = list(shapes)
    per_spec = [attr_values(s, operand_types, shapes) for s in op.attr_specs]
    names = [s.name for s in op.attr_specs]
    return [tuple(zip(names, combo)) for combo in itertools.product(*per_spec)]
