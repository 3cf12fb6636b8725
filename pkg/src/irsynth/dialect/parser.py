"""Reader and writer for the line-oriented dialect definition format.

See docs/dialect_format.md for the grammar. Short version::

    dialect thlo
    op transpose
      operands f64-tensor
      result f64-tensor
      attr permutation Permutation
      shape transpose
      semantics transpose
    end
"""

from __future__ import annotations

import re
from pathlib import Path

from .model import AttributeSpec, AttrKind, DialectDef, OpDef, RegionSpec
from .shapes import SHAPE_RULES

DIALECT_DIR = Path(__file__).resolve().parent.parent / "dialects"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TYPE_CLASS = re.compile(r"(f64|i64)-(tensor|scalar)")


class DialectSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


def _semantics_ids() -> set[str]:
    from ..target_ir.semantics import SEMANTICS

    return set(SEMANTICS)


def _tokens(line: str) -> list[tuple[str, int]]:
    """Whitespace-split tokens of a line with their 1-based columns."""
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


class _OpBuilder:
    def __init__(self, name: str, line: int, col: int):
        self.name, self.line, self.col = name, line, col
        self.operands: tuple[str, ...] = ()
        self.result: str | None = None
        self.attrs: list[AttributeSpec] = []
        self.region: RegionSpec | None = None
        self.shape: str | None = None
        self.semantics: str | None = None
        self.traits: frozenset[str] = frozenset()
        self.kernel: frozenset[str] = frozenset()


def load_dialect(text: str) -> DialectDef:
    """Parse dialect definition text into a validated DialectDef."""
    name = None
    ops: list[OpDef] = []
    seen: set[str] = set()
    cur: _OpBuilder | None = None
    sem_ids = _semantics_ids()

    def fail(msg, ln, col=1):
        raise DialectSyntaxError(msg, ln, col)

    def type_class(tok, ln, col):
        if not _TYPE_CLASS.fullmatch(tok):
            fail(f"bad type class {tok!r}", ln, col)
        return tok

    for ln, raw in enumerate(text.splitlines(), start=1):
        toks = _tokens(raw.split("#", 1)[0])
        if not toks:
            continue
        (kw, kcol), args = toks[0], toks[1:]
        if kw == "dialect":
            if name is not None:
                fail("dialect name given twice", ln, kcol)
            if len(args) != 1 or not _IDENT.fullmatch(args[0][0]):
                fail("expected 'dialect <name>'", ln, kcol)
            name = args[0][0]
            continue
        if name is None:
            fail("definition must start with 'dialect <name>'", ln, kcol)
        if kw == "op":
            if cur is not None:
                fail(f"op {cur.name!r} is missing 'end'", ln, kcol)
            if len(args) != 1 or not _IDENT.fullmatch(args[0][0]):
                fail("expected 'op <name>'", ln, kcol)
            if args[0][0] in seen:
                fail(f"duplicate op name {args[0][0]!r}", ln, args[0][1])
            cur = _OpBuilder(args[0][0], ln, kcol)
            seen.add(cur.name)
            continue
        if cur is None:
            fail(f"unexpected {kw!r} outside an op stanza", ln, kcol)
        if kw == "end":
            if args:
                fail("'end' takes no arguments", ln, args[0][1])
            if cur.result is None:
                fail(f"op {cur.name!r} has no result", ln, kcol)
            if cur.shape is None or cur.semantics is None:
                fail(f"op {cur.name!r} needs both 'shape' and 'semantics'", ln, kcol)
            ops.append(
                OpDef(
                    cur.name,
                    cur.operands,
                    cur.result,
                    tuple(cur.attrs),
                    cur.region,
                    cur.shape,
                    cur.semantics,
                    cur.traits,
                    cur.kernel,
                )
            )
            cur = None
        elif kw == "operands":
            cur.operands = tuple(type_class(t, ln, c) for t, c in args)
        elif kw == "result":
            if len(args) != 1:
                fail("expected exactly one result type class", ln, kcol)
            cur.result = type_class(args[0][0], ln, args[0][1])
        elif kw == "attr":
            cur.attrs.append(_parse_attr(args, ln, kcol))
            if len({a.name for a in cur.attrs}) != len(cur.attrs):
                fail(f"duplicate attribute {cur.attrs[-1].name!r}", ln, args[0][1])
        elif kw == "region":
            if len(args) < 2 or not args[0][0].isdigit():
                fail("expected 'region <arity> <op>...'", ln, kcol)
            try:
                cur.region = RegionSpec(int(args[0][0]), tuple(t for t, _ in args[1:]))
            except ValueError as e:
                fail(str(e), ln, args[0][1])
        elif kw == "shape":
            if len(args) != 1:
                fail("expected 'shape <rule>'", ln, kcol)
            if args[0][0] not in SHAPE_RULES:
                fail(f"unknown shape rule {args[0][0]!r}", ln, args[0][1])
            cur.shape = args[0][0]
        elif kw == "semantics":
            if len(args) != 1:
                fail("expected 'semantics <hook>'", ln, kcol)
            if args[0][0] not in sem_ids:
                fail(f"unknown semantics {args[0][0]!r}", ln, args[0][1])
            cur.semantics = args[0][0]
        elif kw == "traits":
            cur.traits = frozenset(t for t, _ in args)
        elif kw == "kernel":
            cur.kernel = frozenset(t for t, _ in args)
        else:
            fail(f"unknown keyword {kw!r}", ln, kcol)
    if cur is not None:
        raise DialectSyntaxError(f"op {cur.name!r} is missing 'end'", cur.line, cur.col)
    if name is None:
        raise DialectSyntaxError("empty definition", 1, 1)
    return DialectDef(name, tuple(ops))


def _parse_attr(args, ln, kcol) -> AttributeSpec:
    if len(args) < 2:
        raise DialectSyntaxError("expected 'attr <name> <kind> ...'", ln, kcol)
    (name, _), (kind_s, kind_col) = args[0], args[1]
    rest = args[2:]
    try:
        kind = AttrKind(kind_s)
    except ValueError:
        raise DialectSyntaxError(f"unknown attribute kind {kind_s!r}", ln, kind_col) from None
    try:
        if kind is AttrKind.IntList:
            if len(rest) != 1:
                raise ValueError("IntList needs exactly one domain")
            return AttributeSpec(name, kind, domain=rest[0][0])
        if kind is AttrKind.IntScalar:
            if rest and len(rest) != 2:
                raise ValueError("IntScalar takes '<lo> <hi>' bounds")
            bounds = (int(rest[0][0]), int(rest[1][0])) if rest else None
            return AttributeSpec(name, kind, bounds=bounds)
        if rest:
            raise ValueError(f"{kind_s} takes no parameters")
        return AttributeSpec(name, kind)
    except ValueError as e:
        raise DialectSyntaxError(str(e), ln, kind_col) from None


def dump_dialect(d: DialectDef) -> str:
    """Inverse of load_dialect: ``load_dialect(dump_dialect(d)) == d``."""
    out = [f"dialect {d.name}"]
    for op in d.ops:
        out.append("")
        out.append(f"op {op.name}")
        if op.operand_types:
            out.append("  operands " + " ".join(op.operand_types))
        out.append(f"  result {op.result_type}")
        for a in op.attr_specs:
            extra = ""
            if a.kind is AttrKind.IntList:
                extra = f" {a.domain}"
            elif a.kind is AttrKind.IntScalar:
                extra = f" {a.bounds[0]} {a.bounds[1]}"
            out.append(f"  attr {a.name} {a.kind.value}{extra}")
        if op.region_spec:
            out.append(f"  region {op.region_spec.arity} " + " ".join(op.region_spec.allowed_ops))
        out.append(f"  shape {op.shape_rule}")
        out.append(f"  semantics {op.semantics}")
        if op.traits:
            out.append("  traits " + " ".join(sorted(op.traits)))
        if op.kernel_ops:
            out.append("  kernel " + " ".join(sorted(op.kernel_ops)))
        out.append("end")
    return "\n".join(out) + "\n"


def load_dialect_file(path) -> DialectDef:
    return load_dialect(Path(path).read_text())


def find_dialect(name_or_path: str, search_dirs=()) -> Path:
    """Resolve a dialect name (e.g. ``thlo``) or a path to a definition file."""
    p = Path(name_or_path)
    if p.suffix == ".dialect" and p.is_file():
        return p
    for d in (*map(Path, search_dirs), Path.cwd() / "dialects", DIALECT_DIR):
        cand = d / f"{name_or_path}.dialect"
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"no dialect named {name_or_path!r}")


def load_dialect_by_name(name_or_path: str, search_dirs=()) -> DialectDef:
    return load_dialect_file(find_dialect(name_or_path, search_dirs))
