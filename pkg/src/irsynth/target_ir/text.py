"""Printing and parsing candidates.

One node per statement, statements separated by ``;`` or newlines::

    %0 = arg 0 : tensor<3x5xf64>; %1 = arg 1 : tensor<5x4xf64>;
    %2 = thlo.dot_general(%0, %1) {batching_dims = [], contracting_dims = [[1, 0]]} : tensor<3x4xf64>;
    return %2
"""

from __future__ import annotations

import json
import re

from ..dialect.model import DialectDef
from ..dialect.shapes import TypeInferenceError
from ..tensor import TensorType
from .candidate import ArgRef, Candidate, Const, Node, RegionBody


class CandidateSyntaxError(ValueError):
    def __init__(self, msg: str, line: int = 1, col: int = 1):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.msg, self.line, self.col = msg, line, col


def _to_json(v):
    if isinstance(v, tuple):
        return [_to_json(x) for x in v]
    return v


def _from_json(v):
    if isinstance(v, list):
        return tuple(_from_json(x) for x in v)
    return v


def format_attrs(attrs) -> str:
    if not attrs:
        return ""
    return " {" + ", ".join(f"{k} = {json.dumps(_to_json(v))}" for k, v in attrs) + "}"


def format_float(v: float) -> str:
    return repr(float(v))


def format_node(k: int, n: Node, dialect: str) -> str:
    h = n.head
    if isinstance(h, ArgRef):
        return f"%{k} = arg {h.index} : {n.type}"
    if isinstance(h, Const):
        return f"%{k} = const {format_float(h.scalar)} : {n.type}"
    args = ", ".join(f"%{o}" for o in n.operands)
    region = f" {n.region}" if n.region else ""
    return f"%{k} = {dialect}.{h.name}({args}){format_attrs(n.attrs)}{region} : {n.type}"


def print_candidate(c: Candidate, sep: str = "; ") -> str:
    parts = [format_node(k, n, c.dialect) for k, n in enumerate(c.nodes)]
    parts.append(f"return %{c.root}")
    return sep.join(parts)


_ARG = re.compile(r"%(\d+)\s*=\s*arg\s+(\d+)(?:\s*:\s*(\S+))?")
_CONST = re.compile(r"%(\d+)\s*=\s*const\s+(\S+)\s*:\s*(\S+)")
_OP = re.compile(
    r"%(\d+)\s*=\s*([A-Za-z_]\w*)\.([A-Za-z_]\w*)\s*\(([^)]*)\)"
    r"\s*(\{[^}]*\})?\s*(region<(\d+)>\((\w+)\))?\s*:\s*(\S+)"
)
_RET = re.compile(r"return\s+%(\d+)")


def _statements(text: str):
    line = 1
    for raw_line in text.split("\n"):
        for chunk in raw_line.split(";"):
            if chunk.strip():
                yield line, chunk.strip()
        line += 1


def _attrs(block: str, line: int) -> tuple:
    inner = block.strip()[1:-1].strip()
    if not inner:
        return ()
    try:
        obj = json.loads("{" + re.sub(r"([A-Za-z_]\w*)\s*=", r'"\1":', inner) + "}")
    except json.JSONDecodeError as e:
        raise CandidateSyntaxError(f"bad attribute block: {e.msg}", line) from None
    return tuple((k, _from_json(v)) for k, v in obj.items())


def parse_candidate(text: str, dialect: DialectDef, param_types=None) -> Candidate:
    """Inverse of print_candidate. ``param_types`` supplies types for untyped ``arg`` lines."""
    nodes: list[Node] = []
    root = None

    def ty(s, line):
        try:
            return TensorType.parse(s)
        except ValueError as e:
            raise CandidateSyntaxError(str(e), line) from None

    def expect_id(k, line):
        if int(k) != len(nodes):
            raise CandidateSyntaxError(f"expected %{len(nodes)}, found %{k}", line)

    for line, st in _statements(text):
        if root is not None:
            raise CandidateSyntaxError("statement after return", line)
        if m := _RET.fullmatch(st):
            root = int(m.group(1))
            if root >= len(nodes):
                raise CandidateSyntaxError(f"return of undefined %{root}", line)
        elif m := _ARG.fullmatch(st):
            expect_id(m.group(1), line)
            index = int(m.group(2))
            if m.group(3):
                t = ty(m.group(3), line)
            elif param_types is not None and index < len(param_types):
                t = param_types[index]
            else:
                raise CandidateSyntaxError(f"arg {index} needs a type", line)
            nodes.append(Node(ArgRef(index), t))
        elif m := _CONST.fullmatch(st):
            expect_id(m.group(1), line)
            try:
                value = float(m.group(2))
            except ValueError:
                raise CandidateSyntaxError(f"bad constant {m.group(2)!r}", line) from None
            nodes.append(Node(Const.splat(ty(m.group(3), line), value), ty(m.group(3), line)))
        elif m := _OP.fullmatch(st):
            expect_id(m.group(1), line)
            if m.group(2) != dialect.name:
                raise CandidateSyntaxError(f"op from dialect {m.group(2)!r}, expected {dialect.name!r}", line)
            if m.group(3) not in dialect:
                raise CandidateSyntaxError(f"unknown op {m.group(3)!r}", line)
            op = dialect.op(m.group(3))
            operands = tuple(int(a.strip()[1:]) for a in m.group(4).split(",") if a.strip())
            if any(o >= len(nodes) for o in operands):
                raise CandidateSyntaxError("operand used before definition", line)
            region = RegionBody(int(m.group(7)), m.group(8)) if m.group(6) else None
            attrs = _attrs(m.group(5) or "{}", line)
            given = dict(attrs)
            if set(given) == {a.name for a in op.attr_specs}:
                attrs = tuple((a.name, given[a.name]) for a in op.attr_specs)
            nodes.append(Node(op, ty(m.group(9), line), operands, attrs, region))
        else:
            raise CandidateSyntaxError(f"cannot parse {st!r}", line)
    if root is None:
        raise CandidateSyntaxError("missing return", 1)
    c = Candidate(dialect.name, tuple(nodes), root)
    try:
        c.validate()
    except (AssertionError, ValueError, TypeInferenceError) as e:
        raise CandidateSyntaxError(f"ill-formed candidate: {e}", 1) from None
    return c
