"""Evaluation of candidates and their observational signatures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..tensor import ScalarKind, TensorType, ValueBox
from .candidate import ArgRef, Candidate, Const
from .semantics import SEMANTICS, OpCall


class EvalFailure(Exception):
    """A candidate produced no usable value (non-finite, zero divisor, bad shape)."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def _flag(mask, lead):
    mask = np.asarray(mask)
    return mask.reshape(lead + (-1,)).any(axis=-1) if mask.ndim > len(lead) else np.broadcast_to(mask, lead)


def const_array(c: Const, lead, int_mode: bool):
    v = c.scalar
    if int_mode:
        if v != int(v):
            raise EvalFailure("NonIntegral", f"constant {v} in integer mode")
        return np.broadcast_to(np.int64(int(v)), lead + c.value.type.shape)
    return np.broadcast_to(np.float64(v), lead + c.value.type.shape)


def apply_op(node, operand_types, operand_values, lead, int_mode: bool):
    """Run one op node; returns ``(value, bad)`` where ``bad`` flags failed batch entries."""
    op = node.head
    call = OpCall(dict(node.attrs), node.region.op if node.region else None, tuple(operand_types), node.type, int_mode, lead)
    with np.errstate(all="ignore"):
        out = np.asarray(SEMANTICS[op.semantics](call, list(operand_values)))
    want = lead + node.type.shape
    if out.shape != want:
        if out.ndim == len(want) and np.broadcast_shapes(out.shape, want) == want:
            out = np.broadcast_to(out, want)
        else:
            raise EvalFailure("ShapeViolation", f"{op.name} produced {out.shape[len(lead):]}, expected {node.type.shape}")
    bad = np.zeros(lead, dtype=bool)
    if not int_mode:
        with np.errstate(all="ignore"):
            bad |= ~np.isfinite(out).reshape(lead + (-1,)).all(axis=-1)
    for p in call.poison:
        bad |= _flag(np.broadcast_to(p, np.broadcast_shapes(np.shape(p), want)), lead)
    return out, bad


def evaluate_batched(c: Candidate, args: Sequence[np.ndarray], int_mode: bool = False):
    """Evaluate on ``B`` inputs at once; ``args[k]`` has shape ``(B, *param_shape)``.

    Returns ``(output, bad)``; ``bad[b]`` marks inputs on which evaluation failed.
    """
    lead = (args[0].shape[0],) if args else (1,)
    values = []
    bad = np.zeros(lead, dtype=bool)
    with np.errstate(all="ignore"):
        for n in c.nodes:
            h = n.head
            if isinstance(h, ArgRef):
                if h.index >= len(args):
                    raise EvalFailure("ShapeViolation", f"no argument {h.index}")
                a = args[h.index]
                if a.shape != lead + n.type.shape:
                    raise EvalFailure("ShapeViolation", f"argument {h.index} has shape {a.shape[1:]}, expected {n.type.shape}")
                values.append(a)
            elif isinstance(h, Const):
                values.append(const_array(h, lead, int_mode))
            else:
                out, b = apply_op(n, [c.nodes[o].type for o in n.operands], [values[o] for o in n.operands], lead, int_mode)
                bad |= b
                values.append(out)
    return values[c.root], bad


def stack_inputs(inputs: Sequence[Sequence[ValueBox]]) -> list[np.ndarray]:
    if not inputs:
        return []
    return [np.stack([tup[k].data for tup in inputs]) for k in range(len(inputs[0]))]


def eval_candidate(c: Candidate, inputs: Sequence[ValueBox]) -> ValueBox:
    """Evaluate on one input tuple; raises EvalFailure."""
    int_mode = bool(inputs) and inputs[0].type.elem is ScalarKind.I64
    out, bad = evaluate_batched(c, [b.data[None] for b in inputs], int_mode)
    if bad.any():
        raise EvalFailure("DivByZero" if int_mode else "NonFinite")
    elem = ScalarKind.I64 if int_mode else c.result_type.elem
    return ValueBox(TensorType(elem, c.result_type.shape), out[0])


@dataclass(frozen=True)
class Signature:
    type: TensorType
    data: bytes


def canonical_bytes(a: np.ndarray) -> bytes:
    """Bytes with -0.0 folded into +0.0 and NaN payloads unified."""
    a = np.ascontiguousarray(a)
    if a.dtype.kind == "f":
        a = np.where(np.isnan(a), np.nan, a + 0.0)
    return a.tobytes()


def signature_of(c: Candidate, I_n) -> Signature:
    """Canonical outputs over all inputs in ``I_n`` (tuples of ValueBox or batched arrays)."""
    args = I_n if (I_n and isinstance(I_n[0], np.ndarray)) else stack_inputs(I_n)
    out, bad = evaluate_batched(c, args)
    if bad.any():
        raise EvalFailure("NonFinite")
    return Signature(c.result_type, canonical_bytes(out))
