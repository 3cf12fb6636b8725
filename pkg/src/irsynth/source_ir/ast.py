"""Data model for the loop-nest source language."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..tensor import ScalarKind, TensorType


@dataclass(frozen=True)
class Affine:
    """``const + sum(coef * var)`` over loop variables and symbolic dims.

    Terms are kept sorted by name with zero coefficients removed so structural
    equality is semantic equality.
    """

    terms: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def make(coefs: dict, const: int = 0) -> "Affine":
        return Affine(tuple(sorted((k, v) for k, v in coefs.items() if v != 0)), const)

    @staticmethod
    def var(name: str) -> "Affine":
        return Affine(((name, 1),), 0)

    def names(self) -> set[str]:
        return {n for n, _ in self.terms}

    def coef(self, name: str) -> int:
        return dict(self.terms).get(name, 0)

    def __add__(self, other: "Affine") -> "Affine":
        c = dict(self.terms)
        for k, v in other.terms:
            c[k] = c.get(k, 0) + v
        return Affine.make(c, self.const + other.const)

    def scale(self, k: int) -> "Affine":
        return Affine.make({n: v * k for n, v in self.terms}, self.const * k)

    def evaluate(self, env: dict) -> int:
        return self.const + sum(v * env[n] for n, v in self.terms)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Load:
    """Element read. Scalars are loads with no subscripts."""

    name: str
    subs: tuple[Affine, ...] = ()


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Num, Load, BinOp, Neg]


@dataclass(frozen=True)
class Assign:
    target: str
    subs: tuple[Affine, ...]
    expr: Expr

    @property
    def ref(self) -> Load:
        return Load(self.target, self.subs)


@dataclass(frozen=True)
class ForLoop:
    iv: str
    lower: Affine
    upper: Affine
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class Return:
    values: tuple[str, ...]


Stmt = Union[ForLoop, Assign, Return]


@dataclass(frozen=True)
class Var:
    name: str
    elem: ScalarKind
    dims: tuple[str, ...] = ()


@dataclass(frozen=True)
class Function:
    name: str
    dims: tuple[tuple[str, int], ...]
    params: tuple[Var, ...]
    body: tuple[Stmt, ...]
    returns: tuple[str, ...]
    locals: tuple[Var, ...] = field(default=())

    @property
    def dim_sizes(self) -> dict[str, int]:
        return dict(self.dims)

    def var(self, name: str) -> Var:
        for v in (*self.params, *self.locals):
            if v.name == name:
                return v
        raise KeyError(f"{self.name}: no tensor named {name!r}")

    def type_of(self, name: str) -> TensorType:
        v = self.var(name)
        sizes = self.dim_sizes
        return TensorType(v.elem, tuple(sizes[d] for d in v.dims))

    @property
    def param_types(self) -> list[TensorType]:
        return [self.type_of(p.name) for p in self.params]

    @property
    def result_types(self) -> list[TensorType]:
        return [self.type_of(r) for r in self.returns]

    def with_dims(self, sizes: dict) -> "Function":
        """Same program with some symbolic dimensions rebound."""
        return Function(
            self.name,
            tuple((d, int(sizes.get(d, s))) for d, s in self.dims),
            self.params,
            self.body,
            self.returns,
            self.locals,
        )

    def with_kind(self, elem: ScalarKind) -> "Function":
        """Same program with every tensor retyped to ``elem``."""
        retype = lambda vs: tuple(Var(v.name, elem, v.dims) for v in vs)
        return Function(self.name, self.dims, retype(self.params), self.body, self.returns, retype(self.locals))


def walk_stmts(body, loops=()):
    """Yield ``(stmt, enclosing loops)`` for every assignment, in program order."""
    for s in body:
        if isinstance(s, ForLoop):
            yield from walk_stmts(s.body, loops + (s,))
        elif isinstance(s, Assign):
            yield s, loops


def expr_loads(e) -> list[Load]:
    if isinstance(e, Load):
        return [e]
    if isinstance(e, BinOp):
        return expr_loads(e.lhs) + expr_loads(e.rhs)
    if isinstance(e, Neg):
        return expr_loads(e.operand)
    return []


def expr_ops(e) -> set[str]:
    """Scalar operator names (add/sub/mul/div) used in an expression."""
    names = {"+": "add", "-": "sub", "*": "mul", "/": "div"}
    if isinstance(e, BinOp):
        return {names[e.op]} | expr_ops(e.lhs) | expr_ops(e.rhs)
    if isinstance(e, Neg):
        return {"sub"} | expr_ops(e.operand)
    return set()
