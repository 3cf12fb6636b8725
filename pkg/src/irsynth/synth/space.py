"""Search-space pieces: operation order, operand typing, attributes, regions, static checks."""

from __future__ import annotations

from typing import Sequence

from ..dialect.model import DialectDef, OpDef
from ..dialect.shapes import AttrBinding, TypeInferenceError, gen_attr_bindings, infer_result_type
from ..preprocess import detect_reduction
from ..source_ir.ast import Function, expr_ops, walk_stmts
from ..target_ir.candidate import Candidate, RegionBody
from ..tensor import TensorType
from .config import SynthConfig


def known_shapes(f: Function) -> list[tuple[int, ...]]:
    """Non-scalar shapes of ``f``'s parameters and results, first occurrence first."""
    out = []
    for t in (*f.param_types, *f.result_types):
        if t.rank and t.shape not in out:
            out.append(t.shape)
    return out


def max_rank(f: Function) -> int:
    return max((t.rank for t in (*f.param_types, *f.result_types)), default=0)


def source_ops(f: Function) -> set[str]:
    ops = set()
    for s, _ in walk_stmts(f.body):
        ops |= expr_ops(s.expr)
    return ops


def pick_operations(f: Function, d: DialectDef, cfg: SynthConfig) -> list[OpDef]:
    """Dialect ops in exploration order. Heuristics only reorder, never drop."""
    ops = list(d.ops)
    mode = "none" if cfg.naive else cfg.heuristics
    if mode == "none":
        return ops
    first, second = [], []
    if mode in ("reduction", "both") and detect_reduction(f):
        first = [op for op in ops if op.is_reduction]
    if mode in ("dialect", "both"):
        used = source_ops(f)
        second = [op for op in ops if op not in first and op.kernel_ops & used]
    rest = [op for op in ops if op not in first and op not in second]
    return first + second + rest


def gen_attrs(op: OpDef, operand_types: Sequence[TensorType], shapes=()) -> list[AttrBinding]:
    return gen_attr_bindings(op, operand_types, shapes)


def gen_regions(op: OpDef) -> list[RegionBody]:
    if op.region_spec is None:
        return []
    return [RegionBody(op.region_spec.arity, o) for o in op.region_spec.allowed_ops]


def filter_types(members: Sequence[tuple[object, TensorType]], op: OpDef) -> list[list]:
    """Per operand slot, the members whose type class fits that slot."""
    return [[m for m, t in members if t.type_class == cls] for cls in op.operand_types]


def static_check(op: OpDef, operand_types: Sequence[TensorType], attrs, rank_limit: int) -> TensorType | None:
    """Result type if the application passes every static check, else None.

    Checks run cheapest first: operand classes, attribute validity and shapes
    (both inside infer_result_type), then realizability of the result rank.
    """
    try:
        t = infer_result_type(op, operand_types, attrs)
    except TypeInferenceError:
        return None
    if t.rank > rank_limit:
        return None
    return t


def static_check_candidate(c: Candidate, rank_limit: int) -> bool:
    for n in c.nodes:
        if n.is_op:
            t = static_check(n.head, [c.nodes[o].type for o in n.operands], n.attrs, rank_limit)
            if t is None or t != n.type:
                return False
    return True
