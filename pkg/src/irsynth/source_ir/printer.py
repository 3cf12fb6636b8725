"""Canonical ``.sir`` text for a Function. Compound assignments are printed expanded."""

from __future__ import annotations

from .ast import Affine, Assign, BinOp, ForLoop, Function, Load, Neg, Num, Var

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_affine(a: Affine) -> str:
    parts = []
    for name, coef in a.terms:
        mag = abs(coef)
        term = name if mag == 1 else f"{mag} * {name}"
        parts.append(("-" if coef < 0 else "+", term))
    if a.const or not parts:
        parts.append(("-" if a.const < 0 else "+", str(abs(a.const))))
    sign, first = parts[0]
    out = ("-" + first) if sign == "-" else first
    for sign, term in parts[1:]:
        out += f" {sign} {term}"
    return out


def format_num(v: float) -> str:
    text = repr(float(v))
    return text if ("." in text or "e" in text or "n" in text) else text + ".0"


def format_expr(e, prec: int = 0) -> str:
    if isinstance(e, Num):
        return format_num(e.value)
    if isinstance(e, Load):
        return e.name + "".join(f"[{format_affine(s)}]" for s in e.subs)
    if isinstance(e, Neg):
        return "-" + format_expr(e.operand, 3)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # left-assoc: the right operand needs parens at equal precedence
        text = f"{format_expr(e.lhs, p)} {e.op} {format_expr(e.rhs, p + 1)}"
        return f"({text})" if p < prec else text
    raise TypeError(f"not an expression: {e!r}")


def _decl(v: Var) -> str:
    return f"{v.name}: {v.elem.value}" + "".join(f"[{d}]" for d in v.dims)


def _stmt(s, indent: int, out: list[str]):
    pad = "  " * indent
    if isinstance(s, ForLoop):
        out.append(f"{pad}for {s.iv} in {format_affine(s.lower)} .. {format_affine(s.upper)} {{")
        for b in s.body:
            _stmt(b, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, Assign):
        out.append(f"{pad}{format_expr(s.ref)} = {format_expr(s.expr)};")
    else:
        raise TypeError(f"not a statement: {s!r}")


def print_function(f: Function) -> str:
    out = [f"dim {d} = {n}" for d, n in f.dims]
    if out:
        out.append("")
    out.append(f"func {f.name}(" + ", ".join(_decl(p) for p in f.params) + ") {")
    for v in f.locals:
        out.append(f"  local {_decl(v)};")
    for s in f.body:
        _stmt(s, 1, out)
    out.append("  return " + ", ".join(f.returns) + ";")
    out.append("}")
    return "\n".join(out) + "\n"
