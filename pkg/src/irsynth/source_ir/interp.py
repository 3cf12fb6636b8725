"""Batched reference interpreter.

Every tensor is held as one numpy array of shape ``(B, *dims)``; each scalar
statement executes once per loop iteration for all ``B`` inputs at once. F64
runs in IEEE double precision with left-to-right evaluation, I64 wraps and
divides truncating toward zero.
"""

from __future__ import annotations

import builtins
from typing import Sequence

import numpy as np

from ..tensor import ScalarKind, ValueBox
from .ast import Affine, Assign, BinOp, ForLoop, Function, Load, Neg, Num


class InterpError(RuntimeError):
    pass


class OutOfBounds(InterpError):
    pass


class IntDivisionByZero(InterpError):
    pass


def int_divide(a, b):
    """C-style truncating integer division; zero divisors yield 0 (callers mask them)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    safe = np.where(b == 0, 1, b)
    with np.errstate(over="ignore"):
        q = a // safe
        fix = (a % safe != 0) & ((a < 0) != (safe < 0))
        q = q + fix
    return np.where(b == 0, 0, q)


class _State:
    __slots__ = ("arrays", "ivs", "poison")

    def __init__(self, arrays, n_ivs, batch):
        self.arrays = arrays
        self.ivs = [0] * n_ivs
        self.poison = np.zeros(batch, dtype=bool)


class _Compiler:
    def __init__(self, f: Function, int_mode: bool):
        self.f = f
        self.sizes = f.dim_sizes
        self.int_mode = int_mode
        self.slots: dict[str, int] = {}
        self.n_slots = 0
        self.shapes = {v.name: tuple(self.sizes[d] for d in v.dims) for v in (*f.params, *f.locals)}

    def affine(self, a: Affine):
        const = a.const
        terms = []
        for name, coef in a.terms:
            if name in self.slots:
                terms.append((self.slots[name], coef))
            else:
                const += coef * self.sizes[name]
        if not terms:
            return lambda ivs: const
        if len(terms) == 1 and terms[0][1] == 1:
            slot = terms[0][0]
            return lambda ivs: ivs[slot] + const
        terms = tuple(terms)
        return lambda ivs: const + sum(c * ivs[s] for s, c in terms)

    def index(self, ref: Load):
        shape = self.shapes[ref.name]
        subs = [self.affine(s) for s in ref.subs]
        name = ref.name

        def idx(ivs):
            out = [slice(None)]
            for k, (fn, n) in enumerate(zip(subs, shape)):
                v = fn(ivs)
                if not 0 <= v < n:
                    raise OutOfBounds(f"{name}: subscript {k} = {v} outside [0, {n})")
                out.append(v)
            return tuple(out)

        return idx

    def expr(self, e):
        if isinstance(e, Num):
            if self.int_mode:
                if e.value != int(e.value):
                    raise InterpError(f"non-integral constant {e.value} in integer mode")
                c = np.int64(int(e.value))
            else:
                c = np.float64(e.value)
            return lambda st: c
        if isinstance(e, Load):
            idx = self.index(e)
            name = e.name
            return lambda st: st.arrays[name][idx(st.ivs)]
        if isinstance(e, Neg):
            inner = self.expr(e.operand)
            return lambda st: -inner(st)
        if isinstance(e, BinOp):
            l, r = self.expr(e.lhs), self.expr(e.rhs)
            if e.op == "+":
                return lambda st: l(st) + r(st)
            if e.op == "-":
                return lambda st: l(st) - r(st)
            if e.op == "*":
                return lambda st: l(st) * r(st)
            if self.int_mode:
                def div(st):
                    a, b = l(st), r(st)
                    st.poison |= np.asarray(b) == 0
                    return int_divide(a, b)

                return div
            return lambda st: l(st) / r(st)
        raise TypeError(f"bad expression {e!r}")

    def stmt(self, s):
        if isinstance(s, Assign):
            idx = self.index(s.ref)
            rhs = self.expr(s.expr)
            name = s.target

            def assign(st):
                st.arrays[name][idx(st.ivs)] = rhs(st)

            return assign
        if isinstance(s, ForLoop):
            lo = self.affine(s.lower)
            hi = self.affine(s.upper)
            slot = self.n_slots
            self.slots[s.iv] = slot
            self.n_slots += 1
            body = [self.stmt(b) for b in s.body]
            del self.slots[s.iv]

            def loop(st):
                ivs = st.ivs
                for v in range(lo(ivs), hi(ivs)):
                    ivs[slot] = v
                    for b in body:
                        b(st)

            return loop
        raise TypeError(f"bad statement {s!r}")

    def compile(self):
        body = [self.stmt(s) for s in self.f.body]
        return body, max(self.n_slots, 1)


_CACHE: dict = {}


def _compiled(f: Function, int_mode: bool):
    key = (f, int_mode)
    hit = _CACHE.get(key)
    if hit is None:
        if len(_CACHE) > 256:
            _CACHE.clear()
        hit = _CACHE[key] = _Compiler(f, int_mode).compile()
    return hit


def run_batched(f: Function, args: Sequence[np.ndarray], int_mode: bool | None = None):
    """Run ``f`` on a batch of inputs.

    ``args[k]`` has shape ``(B, *param_shape_k)``. Returns ``(outputs, poison)``
    where ``poison[b]`` marks inputs that hit an integer division by zero.
    """
    if int_mode is None:
        int_mode = bool(f.params) and f.params[0].elem is ScalarKind.I64
    dtype = np.int64 if int_mode else np.float64
    if len(args) != len(f.params):
        raise InterpError(f"{f.name} takes {len(f.params)} inputs, got {len(args)}")
    batch = args[0].shape[0] if args else 1
    sizes = f.dim_sizes
    arrays = {}
    for p, a in zip(f.params, args):
        want = (batch,) + tuple(sizes[d] for d in p.dims)
        if a.shape != want:
            raise InterpError(f"input {p.name} has shape {a.shape[1:]}, expected {want[1:]}")
        arrays[p.name] = np.array(a, dtype=dtype, copy=True)
    for v in f.locals:
        arrays[v.name] = np.zeros((batch,) + tuple(sizes[d] for d in v.dims), dtype=dtype)
    body, n_ivs = _compiled(f, int_mode)
    st = _State(arrays, n_ivs, batch)
    with np.errstate(all="ignore"):
        for s in body:
            s(st)
    return [arrays[r].copy() for r in f.returns], st.poison


def interpret(f: Function, inputs: Sequence[ValueBox]) -> list[ValueBox]:
    """Run ``f`` on one input tuple."""
    types = f.param_types
    if len(inputs) != len(types):
        raise InterpError(f"{f.name} takes {len(types)} inputs, got {len(inputs)}")
    for k, (box, t) in enumerate(zip(inputs, types)):
        if box.type != t:
            raise InterpError(f"input {k} has type {box.type}, expected {t}")
    int_mode = bool(types) and types[0].elem is ScalarKind.I64
    outs, poison = run_batched(f, [b.data[None] for b in inputs], int_mode)
    if poison.any():
        raise IntDivisionByZero(f"{f.name}: integer division by zero")
    return [ValueBox(t, o[0]) for t, o in zip(f.result_types, outs)]


def gen_random_batch(f: Function, count: int, lo: float = -10.0, hi: float = 10.0, rng=None, seed=None):
    """Arrays of shape ``(count, *param_shape)`` with i.i.d. uniform elements."""
    if not lo < hi:
        raise ValueError(f"empty input range [{lo}, {hi}]")
    rng = rng if rng is not None else np.random.default_rng(seed)
    out = []
    for t in f.param_types:
        shape = (count,) + t.shape
        if t.elem is ScalarKind.I64:
            out.append(rng.integers(int(lo), int(hi), size=shape, endpoint=True, dtype=np.int64))
        else:
            out.append(rng.uniform(lo, hi, size=shape))
    return out


def gen_random_inputs(f: Function, count: int, range=(-10.0, 10.0), seed=0) -> list[tuple[ValueBox, ...]]:
    """``count`` seeded input tuples matching ``f``'s parameter types."""
    lo, hi = range
    arrays = gen_random_batch(f, count, lo, hi, seed=seed)
    types = f.param_types
    return [tuple(ValueBox(t, a[b]) for t, a in zip(types, arrays)) for b in builtins.range(count)]
