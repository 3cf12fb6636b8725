"""Recursive-descent parser for ``.sir`` loop-nest programs (grammar in docs/sir_format.md)."""

from __future__ import annotations

import re

from ..tensor import MAX_RANK, ScalarKind
from .ast import Affine, Assign, BinOp, ForLoop, Function, Load, Neg, Num, Var

KEYWORDS = {"dim", "func", "local", "for", "in", "return"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\.\.|\+=|-=|\*=|/=|[-+*/=(){}\[\],:;])
    """,
    re.VERBOSE,
)


class SirSyntaxError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)
        self.msg, self.line, self.col = msg, line, col


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


def tokenize(text: str) -> list[_Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SirSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            if kind == "ident" and m.group() in KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.dims: dict[str, int] = {}
        self.vars: dict[str, Var] = {}
        self.ivs: list[str] = []

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise SirSyntaxError(msg, tok.line, tok.col)

    def accept(self, text) -> _Tok | None:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            self.i += 1
            return self.toks[self.i - 1]
        return None

    def expect(self, text) -> _Tok:
        t = self.accept(text)
        if t is None:
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return t

    def ident(self) -> _Tok:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        self.i += 1
        return self.toks[self.i - 1]

    # grammar
    def program(self) -> Function:
        while self.accept("dim"):
            name = self.ident()
            self.expect("=")
            if self.tok.kind != "num" or not self.tok.text.isdigit():
                self.error("dimension size must be a positive integer")
            size = int(self.tok.text)
            self.i += 1
            if size < 1:
                self.error("dimension size must be a positive integer")
            if name.text in self.dims:
                self.error(f"dimension {name.text!r} declared twice", name)
            self.dims[name.text] = size
        self.expect("func")
        fname = self.ident().text
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                params.append(self.decl())
                if self.accept(")"):
                    break
                self.expect(",")
        self.expect("{")
        locals_ = []
        while self.accept("local"):
            locals_.append(self.decl())
            self.expect(";")
        body, returns = [], None
        while not self.accept("}"):
            if self.tok.text == "return" and self.tok.kind == "kw":
                self.i += 1
                names = [self.ident()]
                while self.accept(","):
                    names.append(self.ident())
                self.expect(";")
                for n in names:
                    if n.text not in self.vars:
                        self.error(f"use of undefined tensor {n.text!r}", n)
                returns = tuple(n.text for n in names)
                if self.tok.text != "}":
                    self.error("return must be the last statement")
                continue
            if self.tok.kind == "kw" and self.tok.text == "local":
                self.error("locals must be declared at the top of the function body")
            body.append(self.stmt())
        if returns is None:
            self.error("function has no return statement")
        if self.tok.kind != "eof":
            self.error("trailing input after function")
        return Function(fname, tuple(self.dims.items()), tuple(params), tuple(body), returns, tuple(locals_))

    def decl(self) -> Var:
        name = self.ident()
        if name.text in self.vars or name.text in self.dims:
            self.error(f"name {name.text!r} already defined", name)
        self.expect(":")
        kind_tok = self.ident()
        try:
            elem = ScalarKind.parse(kind_tok.text)
        except ValueError as e:
            self.error(str(e), kind_tok)
        dims = []
        while self.accept("["):
            d = self.ident()
            if d.text not in self.dims:
                self.error(f"undeclared dimension {d.text!r}", d)
            dims.append(d.text)
            self.expect("]")
        if len(dims) > MAX_RANK:
            self.error(f"rank {len(dims)} exceeds {MAX_RANK}", name)
        v = Var(name.text, elem, tuple(dims))
        self.vars[v.name] = v
        return v

    def stmt(self):
        if self.accept("for"):
            iv = self.ident()
            if iv.text in self.vars or iv.text in self.dims or iv.text in self.ivs:
                self.error(f"loop variable {iv.text!r} shadows another name", iv)
            self.expect("in")
            lower = self.affine("bound")
            self.expect("..")
            upper = self.affine("bound")
            self.expect("{")
            self.ivs.append(iv.text)
            body = []
            while not self.accept("}"):
                body.append(self.stmt())
            self.ivs.pop()
            return ForLoop(iv.text, lower, upper, tuple(body))
        target = self.ref()
        for op in ("=", "+=", "-=", "*=", "/="):
            if self.accept(op):
                break
        else:
            self.error(f"expected assignment, found {self.tok.text!r}")
        rhs = self.expr()
        self.expect(";")
        if op != "=":
            rhs = BinOp(op[0], target, rhs)
        return Assign(target.name, target.subs, rhs)

    def ref(self) -> Load:
        name = self.ident()
        if name.text not in self.vars:
            self.error(f"use of undefined tensor {name.text!r}", name)
        subs = []
        while self.accept("["):
            subs.append(self.affine("subscript"))
            self.expect("]")
        want = len(self.vars[name.text].dims)
        if len(subs) != want:
            self.error(f"{name.text} has rank {want} but {len(subs)} subscripts given", name)
        return Load(name.text, tuple(subs))

    def expr(self):
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        if self.tok.kind == "num":
            self.i += 1
            return Num(float(self.toks[self.i - 1].text))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.tok.kind == "ident":
            return self.ref()
        self.error(f"unexpected {self.tok.text or 'end of input'!r} in expression")

    # affine index expressions
    def affine(self, what: str) -> Affine:
        tok = self.tok
        a = self._aff_sum(what)
        for n in a.names():
            if n not in self.dims and n not in self.ivs:
                self.error(f"{n!r} is not a loop variable or dimension", tok)
        return a

    def _aff_sum(self, what):
        a = self._aff_term(what)
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            sign = 1 if self.tok.text == "+" else -1
            self.i += 1
            a = a + self._aff_term(what).scale(sign)
        return a

    def _aff_term(self, what):
        a = self._aff_atom(what)
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op_tok = self.tok
            self.i += 1
            b = self._aff_atom(what)
            if op_tok.text == "/" or (a.terms and b.terms):
                self.error(f"non-affine {what}", op_tok)
            a = b.scale(a.const) if not a.terms else a.scale(b.const)
        return a

    def _aff_atom(self, what):
        if self.accept("-"):
            return self._aff_atom(what).scale(-1)
        if self.tok.kind == "num":
            if not self.tok.text.isdigit():
                self.error(f"non-affine {what}")
            self.i += 1
            return Affine((), int(self.toks[self.i - 1].text))
        if self.accept("("):
            a = self._aff_sum(what)
            self.expect(")")
            return a
        if self.tok.kind == "ident":
            name = self.ident()
            if self.tok.text == "[":
                self.error(f"non-affine {what}")
            return Affine.var(name.text)
        self.error(f"unexpected {self.tok.text or 'end of input'!r} in {what}")


def parse_function(text: str) -> Function:
    """Parse ``.sir`` text into a Function.

    >>> f = parse_function("dim N = 2\\nfunc id(A: f64[N]) { return A; }")
    >>> f.name, len(f.params)
    ('id', 1)
    """
    return _Parser(text).program()


def parse_file(path) -> Function:
    from pathlib import Path

    return parse_function(Path(path).read_text())
