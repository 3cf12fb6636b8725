"""Candidate programs: expression DAGs over target-dialect ops."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..dialect.model import OpDef
from ..dialect.shapes import AttrBinding, infer_result_type
from ..tensor import TensorType, ValueBox


@dataclass(frozen=True)
class ArgRef:
    index: int


@dataclass(frozen=True)
class Const:
    """A splat constant: every element equals ``value.data.flat[0]``."""

    value: ValueBox

    @staticmethod
    def splat(t: TensorType, v: float) -> "Const":
        return Const(ValueBox(t, np.full(t.shape, v, dtype=t.elem.dtype)))

    @property
    def scalar(self) -> float:
        return self.value.data.reshape(-1)[0].item()


@dataclass(frozen=True)
class RegionBody:
    arity: int
    op: str

    def __str__(self):
        return f"region<{self.arity}>({self.op})"


Head = Union[OpDef, ArgRef, Const]


@dataclass(frozen=True)
class Node:
    head: Head
    type: TensorType
    operands: tuple[int, ...] = ()
    attrs: AttrBinding = ()
    region: RegionBody | None = None

    @property
    def is_op(self) -> bool:
        return isinstance(self.head, OpDef)


@dataclass(frozen=True)
class Candidate:
    dialect: str
    nodes: tuple[Node, ...]
    root: int

    @property
    def result_type(self) -> TensorType:
        return self.nodes[self.root].type

    @property
    def op_count(self) -> int:
        return sum(1 for n in self.nodes if n.is_op)

    @staticmethod
    def of_arg(dialect: str, index: int, t: TensorType) -> "Candidate":
        return Candidate(dialect, (Node(ArgRef(index), t),), 0)

    def validate(self) -> None:
        """Check the structural invariants; raises AssertionError or TypeInferenceError."""
        assert 0 <= self.root < len(self.nodes)
        for k, n in enumerate(self.nodes):
            assert all(0 <= o < k for o in n.operands), f"node {k} uses a later node"
            if n.is_op:
                got = infer_result_type(n.head, [self.nodes[o].type for o in n.operands], n.attrs)
                assert got == n.type, f"node {k}: annotated {n.type}, inferred {got}"
                assert (n.region is None) == (n.head.region_spec is None)
            else:
                assert not n.operands


class DagBuilder:
    """Hash-consing node list; structurally equal subterms share one node."""

    def __init__(self, dialect: str):
        self.dialect = dialect
        self.nodes: list[Node] = []
        self.index: dict[Node, int] = {}

    def add(self, node: Node) -> int:
        k = self.index.get(node)
        if k is None:
            k = self.index[node] = len(self.nodes)
            self.nodes.append(node)
        return k

    def build(self, root: int) -> Candidate:
        return Candidate(self.dialect, tuple(self.nodes), root)


def compact(c: Candidate) -> Candidate:
    """Drop nodes unreachable from the root, renumbering the rest."""
    live = set()
    stack = [c.root]
    while stack:
        k = stack.pop()
        if k not in live:
            live.add(k)
            stack.extend(c.nodes[k].operands)
    b = DagBuilder(c.dialect)
    remap = {}
    for k, n in enumerate(c.nodes):
        if k in live:
            remap[k] = b.add(Node(n.head, n.type, tuple(remap[o] for o in n.operands), n.attrs, n.region))
    return b.build(remap[c.root])
