"""Interpreter hooks for target-dialect ops.

Each hook takes an OpCall and the operand arrays and returns the result array.
Operand arrays carry any number of leading batch axes in front of the tensor
axes; hooks operate on the trailing axes and broadcast over the rest. Integer
mode divides truncating toward zero and flags zero divisors in ``call.poison``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..source_ir.interp import int_divide
from ..tensor import TensorType


@dataclass
class OpCall:
    attrs: dict
    region: str | None
    in_types: tuple[TensorType, ...]
    out_type: TensorType
    int_mode: bool = False
    lead: tuple[int, ...] = ()
    poison: list = field(default_factory=list)


Hook = Callable[[OpCall, list], np.ndarray]
SEMANTICS: dict[str, Hook] = {}


def hook(name: str):
    def register(fn):
        SEMANTICS[name] = fn
        return fn

    return register


def scalar_apply(op: str, a, b, call: OpCall | None = None, int_mode: bool = False):
    """One of add/sub/mul/div on arrays."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if int_mode or (call is not None and call.int_mode):
            if call is not None:
                call.poison.append(np.asarray(b) == 0)
            return int_divide(a, b)
        return a / b
    raise ValueError(f"unknown scalar op {op!r}")


def _binary(op):
    def run(call, args):
        return scalar_apply(op, args[0], args[1], call)

    return run


for _op in ("add", "sub", "mul", "div"):
    SEMANTICS[_op] = _binary(_op)


@hook("map")
def _map(call, args):
    a = args[0]
    b = args[1] if len(args) > 1 else args[0]
    return scalar_apply(call.region, a, b, call)


_LETTERS = "abcdefghijklmnop"


def _einsum(lhs_axes, rhs_axes, out_axes, a, b):
    spec = f"...{lhs_axes},...{rhs_axes}->...{out_axes}"
    return np.einsum(spec, a, b)


@hook("dot_general")
def _dot_general(call, args):
    lt, rt = call.in_types
    batch = tuple(call.attrs.get("batching_dims", ()))
    contract = tuple(call.attrs.get("contracting_dims", ()))
    lhs = list(_LETTERS[: lt.rank])
    rhs = list(_LETTERS[lt.rank : lt.rank + rt.rank])
    for l, r in (*batch, *contract):
        rhs[r] = lhs[l]
    paired_l = {l for l, _ in (*batch, *contract)}
    paired_r = {r for _, r in (*batch, *contract)}
    out = [lhs[l] for l, _ in batch]
    out += [lhs[i] for i in range(lt.rank) if i not in paired_l]
    out += [rhs[i] for i in range(rt.rank) if i not in paired_r]
    return _einsum("".join(lhs), "".join(rhs), "".join(out), args[0], args[1])


@hook("reduce")
def _reduce(call, args):
    x, init = args
    rank = call.in_types[0].rank
    axes = tuple(x.ndim - rank + d for d in call.attrs["dimensions"])
    init = np.asarray(init)[(...,) + (None,) * call.out_type.rank]
    if call.region == "add":
        return init + x.sum(axis=axes)
    if call.region == "mul":
        return init * x.prod(axis=axes)
    raise ValueError(f"reduce region {call.region!r} is not supported")


@hook("transpose")
def _transpose(call, args):
    x = args[0]
    rank = call.in_types[0].rank
    lead = x.ndim - rank
    perm = tuple(range(lead)) + tuple(lead + p for p in call.attrs["permutation"])
    return np.transpose(x, perm)


def _embed(x, in_rank, shape, dims):
    lead_shape = x.shape[: x.ndim - in_rank]
    expanded = x.reshape(lead_shape + tuple(x.shape[len(lead_shape) + dims.index(d)] if d in dims else 1 for d in range(len(shape))))
    return np.broadcast_to(expanded, lead_shape + tuple(shape))


@hook("broadcast_in_dim")
def _broadcast_in_dim(call, args):
    return _embed(args[0], call.in_types[0].rank, call.out_type.shape, tuple(call.attrs.get("broadcast_dimensions", ())))


@hook("broadcast")
def _broadcast(call, args):
    return _embed(args[0], call.in_types[0].rank, call.out_type.shape, tuple(call.attrs["dimensions"]))


@hook("fill")
def _fill(call, args):
    return _embed(args[0], 0, call.out_type.shape, ())


@hook("constant")
def _constant(call, args):
    dtype = np.int64 if call.int_mode else np.float64
    return np.full(call.lead, call.attrs["value"], dtype=dtype)


@hook("matmul")
def _matmul(call, args):
    return _einsum("ij", "jk", "ik", args[0], args[1])


@hook("matvec")
def _matvec(call, args):
    return _einsum("ij", "j", "i", args[0], args[1])


@hook("dot")
def _dot(call, args):
    return _einsum("i", "i", "", args[0], args[1])


@hook("reshape")
def _reshape(call, args):
    x = args[0]
    lead = x.shape[: x.ndim - call.in_types[0].rank]
    return np.reshape(x, lead + call.out_type.shape)
