from __future__ import annotations

import enum
from dataclasses import dataclass, field

SCALAR_OPS = ("add", "sub", "mul", "div")


class AttrKind(enum.Enum):
    IntScalar = "IntScalar"
    IntList = "IntList"
    Permutation = "Permutation"
    DimSubset = "DimSubset"


# Domains an IntList attribute can enumerate over.
INT_LIST_DOMAINS = ("dim_pairs", "shapes", "embeddings")


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: AttrKind
    domain: str | None = None
    bounds: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind is AttrKind.IntList and self.domain not in INT_LIST_DOMAINS:
            raise ValueError(f"IntList attribute {self.name!r} needs a domain from {INT_LIST_DOMAINS}")
        if self.kind is AttrKind.IntScalar:
            bounds = self.bounds or (0, 1)
            if bounds[0] > bounds[1]:
                raise ValueError(f"empty bounds for attribute {self.name!r}")
            object.__setattr__(self, "bounds", tuple(bounds))

    @property
    def size_valued(self) -> bool:
        """True when values are dimension sizes rather than dimension indices."""
        return self.kind is AttrKind.IntList and self.domain == "shapes"


@dataclass(frozen=True)
class RegionSpec:
    arity: int
    allowed_ops: tuple[str, ...]

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError(f"region arity must be 1 or 2, got {self.arity}")
        if not self.allowed_ops:
            raise ValueError("region must allow at least one scalar op")
        bad = [o for o in self.allowed_ops if o not in SCALAR_OPS]
        if bad:
            raise ValueError(f"unsupported region ops {bad}")


@dataclass(frozen=True)
class OpDef:
    name: str
    operand_types: tuple[str, ...]
    result_type: str
    attr_specs: tuple[AttributeSpec, ...] = ()
    region_spec: RegionSpec | None = None
    shape_rule: str = ""
    semantics: str = ""
    traits: frozenset[str] = field(default_factory=frozenset)
    kernel_ops: frozenset[str] = field(default_factory=frozenset)

    @property
    def is_reduction(self) -> bool:
        return "reduction" in self.traits

    def attr_spec(self, name: str) -> AttributeSpec:
        for spec in self.attr_specs:
            if spec.name == name:
                return spec
        raise KeyError(name)


@dataclass(frozen=True)
class DialectDef:
    name: str
    ops: tuple[OpDef, ...]

    def __post_init__(self):
        seen = set()
        for op in self.ops:
            if op.name in seen:
                raise ValueError(f"duplicate op name {op.name!r}")
            seen.add(op.name)

    def op(self, name: str) -> OpDef:
        for op in self.ops:
            if op.name == name:
                return op
        raise KeyError(f"dialect {self.name} has no op {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(op.name == name for op in self.ops)


@dataclass(frozen=True)
class Production:
    op: str
    operands: tuple[str, ...]
    result: str

    def __str__(self) -> str:
        return f"{self.result} ::= {self.op}({', '.join(self.operands)})"


@dataclass(frozen=True)
class Grammar:
    dialect: str
    nonterminals: tuple[str, ...]
    productions: tuple[Production, ...]

    def productions_for(self, nonterminal: str) -> tuple[Production, ...]:
        return tuple(p for p in self.productions if p.result == nonterminal)
