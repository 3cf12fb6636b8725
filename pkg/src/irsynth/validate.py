"""Post-synthesis checking: integer small-domain equivalence, randomized delta tests, mutants."""

from __future__ import annotations

import enum
import itertools
from fractions import Fraction
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .dialect.model import DialectDef
from .dialect.shapes import gen_attr_bindings
from .postprocess import restore_shapes
from .preprocess import ShapeMap
from .seeding import rng
from .source_ir.ast import Function
from .source_ir.interp import gen_random_batch, run_batched
from .synth.engine import within_tolerance
from .synth.space import source_ops, static_check
from .target_ir.candidate import ArgRef, Candidate, Const, Node, RegionBody, compact
from .target_ir.eval import EvalFailure, evaluate_batched
from .target_ir.semantics import SEMANTICS, OpCall
from .tensor import MAX_RANK, ScalarKind, TensorType, ValueBox


class GuaranteeLevel(enum.IntEnum):
    """Strength of the check a solution passed; larger is stronger."""

    ObsTested = 1
    DeltaTested = 2
    IntExhaustive = 3

    def __str__(self):
        return self.name


class DomainTooLarge(ValueError):
    pass


MAX_CASES = 1_000_000
INT_DOMAINS = ((-2, -1, 0, 1, 2), (-1, 0, 1), (-1, 2))


@dataclass
class IntCheckResult:
    equivalent: bool
    exhaustive: bool
    cases: int
    domain: tuple[int, ...]
    dims: dict
    counterexample: tuple | None = None
    skipped: int = 0  # cases where the source itself divides by zero

    @property
    def passed(self) -> bool:
        return self.equivalent


@dataclass
class DeltaResult:
    passed: bool
    n: int
    delta: float
    failing_input: tuple | None = None


def _retarget(f: Function, c: Candidate, dims: Mapping[str, int]):
    """``f`` and ``c`` re-sized to ``dims`` (missing dims keep their sizes)."""
    sizes = f.dim_sizes
    if all(dims.get(d, s) == s for d, s in sizes.items()):
        return f, c
    m = ShapeMap(tuple((d, int(dims.get(d, s)), s) for d, s in sizes.items()))
    return f.with_dims(dims), restore_shapes(c, m)


def _cases_to_arrays(f: Function, digits: np.ndarray, domain: np.ndarray) -> list[np.ndarray]:
    vals = domain[digits]
    out, at = [], 0
    for t in f.param_types:
        n = t.size
        out.append(np.ascontiguousarray(vals[:, at : at + n]).reshape((len(vals),) + t.shape))
        at += n
    return out


def _digits(start: int, stop: int, base: int, width: int) -> np.ndarray:
    """Base-``base`` digits of ``start..stop-1``, most significant first."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), width), dtype=np.int64)
    for k in range(width - 1, -1, -1):
        idx, out[:, k] = np.divmod(idx, base)
    return out


def int_exhaustive_check(
    f: Function,
    c: Candidate,
    value_domain: Sequence[int] = INT_DOMAINS[0],
    dims: Mapping[str, int] | None = None,
    max_cases: int = MAX_CASES,
    sample: bool = True,
    seed: int = 0,
    chunk: int = 1 << 15,
) -> IntCheckResult:
    """Compare ``f`` and ``c`` in 64-bit integer arithmetic on every input over ``value_domain``.

    ``dims`` overrides dimension sizes (default: every dim is 2). When the
    case count exceeds ``max_cases`` the inputs are sampled instead, and the
    result is marked non-exhaustive. The reported counterexample is the first
    mismatch in enumeration (or sampling) order.
    """
    dims = dict(dims) if dims is not None else {d: 2 for d, _ in f.dims}
    g, c2 = _retarget(f, c, dims)
    domain = np.array(sorted(set(int(v) for v in value_domain)), dtype=np.int64)
    width = sum(t.size for t in g.param_types)
    total = len(domain) ** width
    exhaustive = total <= max_cases
    if not exhaustive and not sample:
        raise DomainTooLarge(f"{total} cases exceed the limit of {max_cases}")
    n_cases = total if exhaustive else max_cases
    gen = None if exhaustive else rng(seed, "intcheck", f.name)
    skipped = 0
    for start in range(0, n_cases, chunk):
        stop = min(n_cases, start + chunk)
        if exhaustive:
            digits = _digits(start, stop, len(domain), width)
        else:
            digits = gen.integers(0, len(domain), size=(stop - start, width))
        args = _cases_to_arrays(g, digits, domain)
        refs, poison = run_batched(g, args, int_mode=True)
        try:
            out, bad = evaluate_batched(c2, args, int_mode=True)
        except EvalFailure:
            out, bad = None, np.ones(stop - start, dtype=bool)
        ref = refs[0]
        if out is None:
            same = np.zeros(stop - start, dtype=bool)
        else:
            out = np.broadcast_to(out, ref.shape)
            same = (out == ref).reshape(len(ref), -1).all(axis=1)
        wrong = ~poison & (bad | ~same)
        skipped += int(poison.sum())
        if wrong.any():
            b = int(np.argmax(wrong))
            cex = tuple(ValueBox(TensorType(ScalarKind.I64, t.shape), a[b]) for t, a in zip(g.param_types, args))
            return IntCheckResult(False, exhaustive, start + b + 1, tuple(domain.tolist()), dims, cex, skipped)
    return IntCheckResult(True, exhaustive, n_cases, tuple(domain.tolist()), dims, None, skipped)


def int_check_ladder(f: Function, c: Candidate, max_cases: int = MAX_CASES, seed: int = 0) -> IntCheckResult:
    """Try shrinking domains at all-2 dims; the first one small enough is checked exhaustively.

    If none fits, the widest domain is sampled (which never earns IntExhaustive).
    """
    dims = {d: 2 for d, _ in f.dims}
    width = sum(t.size for t in f.with_dims(dims).param_types)
    for dom in INT_DOMAINS:
        if len(dom) ** width <= max_cases:
            return int_exhaustive_check(f, c, dom, dims, max_cases, seed=seed)
    return int_exhaustive_check(f, c, INT_DOMAINS[0], dims, max_cases, seed=seed)


def delta_test(f: Function, c: Candidate, N: int = 20, delta: float = 1e-5, seed: int = 0, input_range=(-10.0, 10.0)) -> DeltaResult:
    """Compare on ``N`` fresh random inputs at the current (minified) sizes."""
    if N < 10:
        raise ValueError("delta_test needs N >= 10")
    args = gen_random_batch(f, N, *input_range, rng=rng(seed, "delta", f.name))
    ref = run_batched(f, args)[0][0]
    try:
        out, bad = evaluate_batched(c, args)
    except EvalFailure:
        return DeltaResult(False, N, delta, tuple(ValueBox(t, a[0]) for t, a in zip(f.param_types, args)))
    ok = within_tolerance(np.broadcast_to(out, ref.shape), ref, delta) & ~bad
    if ok.all():
        return DeltaResult(True, N, delta)
    b = int(np.argmin(ok))
    return DeltaResult(False, N, delta, tuple(ValueBox(t, a[b]) for t, a in zip(f.param_types, args)))


def classify_guarantee(int_result: IntCheckResult | None, delta_result: DeltaResult | None) -> GuaranteeLevel:
    if int_result is not None and int_result.equivalent and int_result.exhaustive:
        return GuaranteeLevel.IntExhaustive
    if delta_result is not None and delta_result.passed and delta_result.n >= 20:
        return GuaranteeLevel.DeltaTested
    return GuaranteeLevel.ObsTested


def int_meaningful(f: Function, c: Candidate) -> bool:
    """Integer equivalence only says something when neither side divides."""
    if "div" in source_ops(f):
        return False
    for n in c.nodes:
        if n.is_op and ("div" in (n.head.name, n.head.semantics) or (n.region is not None and n.region.op == "div")):
            return False
    return True


@dataclass
class SolutionCheck:
    delta: DeltaResult
    int_check: IntCheckResult | None
    level: GuaranteeLevel

    @property
    def refuted(self) -> bool:
        return not self.delta.passed or (self.int_check is not None and not self.int_check.equivalent)


def check_solution(f: Function, c: Candidate, N: int = 20, delta: float = 1e-5, seed: int = 0, int_check: bool = True) -> SolutionCheck:
    """Delta test plus, where it is meaningful, the integer check."""
    d = delta_test(f, c, N, delta, seed)
    ic = int_check_ladder(f, c, seed=seed) if int_check and int_meaningful(f, c) else None
    return SolutionCheck(d, ic, classify_guarantee(ic, d))


def rejects(f: Function, c: Candidate, N: int = 20, delta: float = 1e-5, seed: int = 0) -> bool:
    """Whether validation refutes ``c`` as an implementation of ``f``."""
    return check_solution(f, c, N, delta, seed).refuted


# --- mutants -----------------------------------------------------------------

MUTATION_KINDS = ("operand_swap", "attribute", "region", "constant", "op_substitution")
_COMMUTATIVE = {"add", "mul"}


@dataclass(frozen=True)
class Mutant:
    kind: str
    node: int
    detail: str
    candidate: Candidate


def _trivially_commutative(c: Candidate, n: Node) -> bool:
    """Exchanging the operands of ``n`` cannot change its value."""
    op = n.head
    if op.semantics in _COMMUTATIVE:
        return True
    if op.semantics == "map" and n.region is not None and n.region.op in _COMMUTATIVE:
        return True
    if op.semantics == "dot":
        return True
    if op.semantics == "dot_general":
        # with only same-index pairs, exchanging the operands swaps the two
        # blocks of free output dims; nothing moves if one block is empty
        a, b = (c.nodes[o].type for o in n.operands)
        pairs = [p for _, v in n.attrs for p in v]
        if all(l == r for l, r in pairs):
            free_a = a.rank - len(pairs)
            free_b = b.rank - len(pairs)
            return free_a == 0 or free_b == 0
    return False


def _with_node(c: Candidate, k: int, node: Node) -> Candidate:
    nodes = list(c.nodes)
    nodes[k] = node
    return Candidate(c.dialect, tuple(nodes), c.root)


def _typed(c: Candidate, k: int, node: Node) -> Candidate | None:
    """``c`` with node ``k`` replaced, if the new node type-checks to the same type."""
    if node.is_op:
        t = static_check(node.head, [c.nodes[o].type for o in node.operands], node.attrs, MAX_RANK)
        if t is None or t != c.nodes[k].type:
            return None
    return _with_node(c, k, node)


def _with_leaf(c: Candidate, k: int, slot: int, leaf: Node) -> Candidate:
    """Operand ``slot`` of node ``k`` replaced by a fresh leaf."""
    shifted = [Node(n.head, n.type, tuple(o + 1 for o in n.operands), n.attrs, n.region) for n in c.nodes]
    ops = list(shifted[k].operands)
    ops[slot] = 0
    shifted[k] = replace(shifted[k], operands=tuple(ops))
    return compact(Candidate(c.dialect, (leaf, *shifted), c.root + 1))


def _operand_mutants(c: Candidate, k: int, n: Node, param_types) -> list[Mutant]:
    out = []
    if len(n.operands) >= 2 and not _trivially_commutative(c, n):
        for i, j in itertools.combinations(range(len(n.operands)), 2):
            if n.operands[i] == n.operands[j]:
                continue
            ops = list(n.operands)
            ops[i], ops[j] = ops[j], ops[i]
            m = _typed(c, k, replace(n, operands=tuple(ops)))
            if m is not None:
                out.append(Mutant("operand_swap", k, f"exchange operands {i} and {j} of %{k}", m))
    # replace one operand by a different value of the same type
    for slot, o in enumerate(n.operands):
        t = c.nodes[o].type
        for other in range(k):
            if other != o and c.nodes[other].type == t:
                ops = list(n.operands)
                ops[slot] = other
                out.append(Mutant("operand_swap", k, f"operand {slot} of %{k}: %{o} -> %{other}", _with_node(c, k, replace(n, operands=tuple(ops)))))
        used_args = {c.nodes[x].head.index for x in range(len(c.nodes)) if isinstance(c.nodes[x].head, ArgRef)}
        for a, pt in enumerate(param_types or ()):
            if pt == t and a not in used_args:
                out.append(Mutant("operand_swap", k, f"operand {slot} of %{k} -> arg {a}", _with_leaf(c, k, slot, Node(ArgRef(a), t))))
        for v in (0.0, 1.0):
            leaf = Node(Const.splat(t, v), t)
            if c.nodes[o] != leaf:
                out.append(Mutant("operand_swap", k, f"operand {slot} of %{k} -> const {v}", _with_leaf(c, k, slot, leaf)))
    return out


def single_op_mutants(c: Candidate, dialect: DialectDef, param_types=None) -> dict[str, list[Mutant]]:
    """Every well-typed single-node mutation of ``c``, grouped by kind.

    Operand exchanges on commutative operations are left out. ``param_types``
    lets operands be replaced by inputs the candidate does not use yet.
    """
    shapes = sorted({n.type.shape for n in c.nodes if n.type.rank})
    out: dict[str, list[Mutant]] = {k: [] for k in MUTATION_KINDS}
    for k, n in enumerate(c.nodes):
        if isinstance(n.head, Const):
            v = n.head.scalar
            node = Node(Const.splat(n.type, v + 1.0), n.type)
            out["constant"].append(Mutant("constant", k, f"%{k}: {v} -> {v + 1.0}", _with_node(c, k, node)))
            continue
        if not n.is_op:
            continue
        op = n.head
        out["operand_swap"] += _operand_mutants(c, k, n, param_types)
        types = [c.nodes[o].type for o in n.operands]
        for attrs in gen_attr_bindings(op, types, shapes):
            if attrs != n.attrs:
                m = _typed(c, k, replace(n, attrs=attrs))
                if m is not None:
                    kind = "constant" if op.semantics == "constant" else "attribute"
                    out[kind].append(Mutant(kind, k, f"%{k} attrs {dict(attrs)}", m))
        if n.region is not None:
            for r in op.region_spec.allowed_ops:
                if r != n.region.op:
                    m = _with_node(c, k, replace(n, region=RegionBody(n.region.arity, r)))
                    out["region"].append(Mutant("region", k, f"%{k} region {n.region.op} -> {r}", m))
        for other in dialect.ops:
            if other.name == op.name or other.operand_types != op.operand_types:
                continue
            if [(a.name, a.kind) for a in other.attr_specs] != [(a.name, a.kind) for a in op.attr_specs]:
                continue
            if (other.region_spec is None) != (n.region is None):
                continue
            if n.region is not None and n.region.op not in other.region_spec.allowed_ops:
                continue
            m = _typed(c, k, replace(n, head=other))
            if m is not None:
                out["op_substitution"].append(Mutant("op_substitution", k, f"%{k} {op.name} -> {other.name}", m))
    return out


def _exact_eval(c: Candidate, args: list) -> np.ndarray:
    """Evaluate on a single input of Fraction object arrays, without rounding."""
    values = []
    for n in c.nodes:
        h = n.head
        if isinstance(h, ArgRef):
            values.append(args[h.index][None])
        elif isinstance(h, Const):
            values.append(np.full((1,) + n.type.shape, Fraction(h.scalar), dtype=object))
        elif h.semantics == "constant":
            values.append(np.full((1,), Fraction(dict(n.attrs)["value"]), dtype=object))
        else:
            call = OpCall(dict(n.attrs), n.region.op if n.region else None, tuple(c.nodes[o].type for o in n.operands), n.type, False, (1,))
            out = np.asarray(SEMANTICS[h.semantics](call, [values[o] for o in n.operands]), dtype=object)
            values.append(np.broadcast_to(out, (1,) + n.type.shape))
    return values[c.root][0]


def exactly_equivalent(a: Candidate, b: Candidate, param_types, trials: int = 3, seed: int = 0) -> bool:
    """Whether ``a`` and ``b`` agree exactly at random rational points.

    Both are rational functions of their inputs, so agreement at random
    points drawn from a large range means they are identical with
    overwhelming probability. A zero divisor on either side counts as a
    difference.
    """
    g = rng(seed, "exact")
    for _ in range(trials):
        args = [np.array([Fraction(int(x)) for x in g.integers(-10**6, 10**6, size=t.size)], dtype=object).reshape(t.shape) for t in param_types]
        try:
            if not np.array_equal(_exact_eval(a, args), _exact_eval(b, args)):
                return False
        except ZeroDivisionError:
            return False
    return True


def pick_mutants(pools: Mapping[str, Sequence], count: int = 5, seed: int = 0, keep=None) -> list:
    """``count`` mutants taken round-robin over kinds, each kind in seeded random order.

    ``keep`` filters items as they are drawn (used to skip equivalent mutants).
    """
    queues = []
    for kind in MUTATION_KINDS:
        items = list(pools.get(kind, ()))
        order = rng(seed, "mutants", kind).permutation(len(items))
        queues.append([items[i] for i in order])
    picked = []
    while len(picked) < count and any(queues):
        for q in queues:
            while q and len(picked) < count:
                item = q.pop(0)
                if keep is None or keep(item):
                    picked.append(item)
                    break
    return picked


def kernel_mutants(program, dialect: DialectDef, count: int = 5, seed: int = 0) -> list[tuple[Function, Candidate, Mutant]]:
    """Seeded non-equivalent single-op mutants drawn across all solutions of a raised program.

    Returns ``(single-result slice function, original solution, mutant)``.
    """
    pools: dict[str, list] = {k: [] for k in MUTATION_KINDS}
    for part in program.parts:
        for name, c in part.solutions:
            proj = part.slice.projection(name)
            for kind, ms in single_op_mutants(c, dialect, proj.param_types).items():
                pools[kind] += [(proj, c, m) for m in ms]

    def non_equivalent(item):
        proj, c, m = item
        return not exactly_equivalent(c, m.candidate, proj.param_types, seed=seed)

    return pick_mutants(pools, count, seed, keep=non_equivalent)
