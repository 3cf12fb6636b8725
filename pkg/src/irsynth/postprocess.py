"""Shape restoration and re-composition of raised slices into one target function."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .preprocess import ShapeMap, Slice
from .source_ir.ast import Function
from .target_ir.candidate import ArgRef, Candidate, Const, Node
from .target_ir.eval import evaluate_batched
from .target_ir.text import format_attrs, format_float
from .tensor import TensorType


class AmbiguousDim(ValueError):
    """A dimension size that maps to no minified dimension, or to several."""


class MissingSlice(RuntimeError):
    def __init__(self, names: Sequence[str]):
        super().__init__("no solution for slice(s): " + ", ".join(names))
        self.names = tuple(names)


def restore_type(t: TensorType, m: ShapeMap) -> TensorType:
    return t.with_shape(m.to_original(s) for s in t.shape)


def restore_shapes(c: Candidate, m: ShapeMap) -> Candidate:
    """Re-type ``c`` at ``m``'s original sizes.

    Index-valued attributes are kept as they are; size-valued ones and splat
    constants follow the dims they mention.
    """
    nodes = []
    for n in c.nodes:
        t = restore_type(n.type, m)
        head, attrs = n.head, n.attrs
        if isinstance(head, Const):
            head = Const.splat(t, head.scalar)
        elif n.is_op:
            specs = {s.name: s for s in head.attr_specs}
            attrs = tuple(
                (k, tuple(m.to_original(s) for s in v) if specs[k].size_valued else v) for k, v in attrs
            )
        nodes.append(Node(head, t, n.operands, attrs, n.region))
    out = Candidate(c.dialect, tuple(nodes), c.root)
    out.validate()
    return out


@dataclass(frozen=True)
class RaisedPart:
    slice: Slice
    solutions: tuple[tuple[str, Candidate], ...]

    @property
    def ops(self) -> int:
        return sum(c.op_count for _, c in self.solutions)


@dataclass(frozen=True)
class RaisedProgram:
    """Per-slice solutions at minified sizes, wired together by tensor name."""

    function: Function
    shape_map: ShapeMap
    dialect: str
    parts: tuple[RaisedPart, ...]

    @property
    def ops_total(self) -> int:
        return sum(p.ops for p in self.parts)

    @property
    def ops_max(self) -> int:
        return max((c.op_count for p in self.parts for _, c in p.solutions), default=0)

    def _map(self, sizes: Mapping[str, int] | None) -> ShapeMap:
        return self.shape_map if sizes is None else self.shape_map.with_originals(sizes)

    def restored(self, sizes: Mapping[str, int] | None = None) -> list[tuple[Slice, list[tuple[str, Candidate]]]]:
        m = self._map(sizes)
        return [(p.slice, [(n, restore_shapes(c, m)) for n, c in p.solutions]) for p in self.parts]

    def signature(self, sizes=None) -> Function:
        return self.function if sizes is None else self.function.with_dims(sizes)

    def evaluate(self, args: Sequence[np.ndarray], sizes: Mapping[str, int] | None = None, int_mode: bool = False):
        """Run on batched inputs (leading batch axis); returns ``(outputs, bad)``."""
        f = self.signature(sizes)
        env = {p.name: a for p, a in zip(f.params, args)}
        batch = args[0].shape[0] if args else 1
        bad = np.zeros(batch, dtype=bool)
        for sl, sols in self.restored(sizes):
            inputs = [env[n] for n in sl.consumed]
            for name, c in sols:
                out, b = evaluate_batched(c, inputs, int_mode)
                env[name] = np.broadcast_to(out, (batch,) + c.result_type.shape)
                bad |= np.broadcast_to(b, bad.shape)
        outs = []
        for n in f.returns:
            if n in env:
                outs.append(env[n])
            else:
                t = f.type_of(n)
                outs.append(np.zeros((batch,) + t.shape, dtype=t.elem.dtype))
        return outs, bad

    def to_text(self, sizes: Mapping[str, int] | None = None) -> str:
        """The whole program as a single function in the target dialect."""
        f = self.signature(sizes)
        env = {p.name: f"%{p.name}" for p in f.params}
        lines = []
        counter = 0
        for sl, sols in self.restored(sizes):
            inputs = [env[n] for n in sl.consumed]
            for name, c in sols:
                local = {}
                for k, n in enumerate(c.nodes):
                    h = n.head
                    if isinstance(h, ArgRef):
                        local[k] = inputs[h.index]
                        continue
                    ssa = f"%{counter}"
                    counter += 1
                    if isinstance(h, Const):
                        lines.append(f"  {ssa} = const {format_float(h.scalar)} : {n.type}")
                    else:
                        args = ", ".join(local[o] for o in n.operands)
                        region = f" {n.region}" if n.region else ""
                        lines.append(f"  {ssa} = {self.dialect}.{h.name}({args}){format_attrs(n.attrs)}{region} : {n.type}")
                    local[k] = ssa
                env[name] = local[c.root]
                lines.append(f"  // {name} = {local[c.root]}")
        params = ", ".join(f"%{p.name}: {f.type_of(p.name)}" for p in f.params)
        results = ", ".join(str(f.type_of(n)) for n in f.returns)
        rets = []
        for n in f.returns:
            if n not in env:
                ssa = f"%{counter}"
                counter += 1
                lines.append(f"  {ssa} = const 0.0 : {f.type_of(n)}")
                env[n] = ssa
            rets.append(env[n])
        head = f"func @{f.name}({params}) -> ({results}) {{"
        return "\n".join([head, *lines, "  return " + ", ".join(rets), "}"]) + "\n"


def compose_slices(
    slices: Sequence[tuple[Slice, Candidate | Mapping[str, Candidate] | None]],
    m: ShapeMap,
    f: Function,
    dialect: str,
) -> RaisedProgram:
    """Wire per-slice solutions into one program; raises MissingSlice if any is absent."""
    parts, missing = [], []
    for sl, sol in slices:
        if isinstance(sol, Candidate):
            if len(sl.produced) != 1:
                raise ValueError(f"{sl.sub_function.name} produces {sl.produced}; pass one candidate per result")
            sol = {sl.produced[0]: sol}
        if sol is None or any(sol.get(n) is None for n in sl.produced):
            missing.append(sl.sub_function.name)
            continue
        parts.append(RaisedPart(sl, tuple((n, sol[n]) for n in sl.produced)))
    if missing:
        raise MissingSlice(missing)
    return RaisedProgram(f, m, dialect, tuple(parts))
