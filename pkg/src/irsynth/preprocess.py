"""Shape minification, loop distribution into slices, and reduction detection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .source_ir.ast import Assign, ForLoop, Function, Var, expr_loads, walk_stmts
from .source_ir.interp import run_batched

MINI_SIZES = (3, 4, 5, 7, 11)


class TooManyDims(ValueError):
    pass


@dataclass(frozen=True)
class ShapeMap:
    """``(dim name, original size, minified size)`` per symbolic dimension."""

    entries: tuple[tuple[str, int, int], ...] = ()

    def __post_init__(self):
        mini = [m for _, _, m in self.entries]
        if len(set(mini)) != len(mini) or any(m < 2 for m in mini):
            raise ValueError(f"minified sizes must be distinct and >= 2, got {mini}")

    def __len__(self):
        return len(self.entries)

    def as_dict(self) -> dict[str, tuple[int, int]]:
        return {d: (o, m) for d, o, m in self.entries}

    @property
    def minified(self) -> dict[str, int]:
        return {d: m for d, _, m in self.entries}

    @property
    def original(self) -> dict[str, int]:
        return {d: o for d, o, _ in self.entries}

    def to_original(self, size: int) -> int:
        hits = [o for _, o, m in self.entries if m == size]
        if len(hits) != 1:
            from .postprocess import AmbiguousDim

            raise AmbiguousDim(f"size {size} matches {len(hits)} minified dims")
        return hits[0]

    def with_originals(self, sizes: dict) -> "ShapeMap":
        """Same minified sizes, different originals (used to restore at test scale)."""
        return ShapeMap(tuple((d, int(sizes.get(d, o)), m) for d, o, m in self.entries))


def _dim_order(f: Function) -> list[str]:
    order: list[str] = []

    def see(name):
        if name not in order:
            order.append(name)

    for v in (*f.params, *f.locals):
        for d in v.dims:
            see(d)
    declared = {d for d, _ in f.dims}

    def scan(body):
        for s in body:
            if isinstance(s, ForLoop):
                for n in sorted(s.lower.names() | s.upper.names()):
                    if n in declared:
                        see(n)
                scan(s.body)

    scan(f.body)
    for d, _ in f.dims:
        see(d)
    return order


def minify_shapes(f: Function, sizes=MINI_SIZES) -> tuple[Function, ShapeMap]:
    """Rebind every symbolic dim to a small distinct size, in first-occurrence order."""
    order = _dim_order(f)
    if len(order) > len(sizes):
        raise TooManyDims(f"{f.name} has {len(order)} symbolic dims but only {len(sizes)} small sizes exist")
    original = f.dim_sizes
    entries = tuple((d, original[d], s) for d, s in zip(order, sizes))
    m = ShapeMap(entries)
    return f.with_dims(m.minified), m


def detect_reduction(f: Function) -> bool:
    """True when some statement accumulates into one element across loop iterations.

    That is, it reads the exact reference it writes, and at least one enclosing
    loop variable does not occur in that reference.
    """
    for s, loops in walk_stmts(f.body):
        if s.ref not in expr_loads(s.expr):
            continue
        used = set().union(*(a.names() for a in s.subs)) if s.subs else set()
        if any(l.iv not in used for l in loops):
            return True
    return False


# ---------------------------------------------------------------------------
# dynamic access trace


@dataclass(frozen=True)
class Access:
    stmt: int
    reads: tuple[tuple[str, tuple[int, ...]], ...]
    write: tuple[str, tuple[int, ...]]


def number_statements(f: Function) -> list[Assign]:
    """Assignments in program order; the index is the statement id."""
    return [s for s, _ in walk_stmts(f.body)]


def trace(f: Function) -> list[Access]:
    """Every dynamic statement instance with the concrete elements it touches."""
    sizes = f.dim_sizes
    ids = {}
    for k, (s, _) in enumerate(walk_stmts(f.body)):
        ids[id(s)] = k
    events: list[Access] = []

    def go(body, env):
        for s in body:
            if isinstance(s, ForLoop):
                lo, hi = s.lower.evaluate(env), s.upper.evaluate(env)
                for v in range(lo, hi):
                    env[s.iv] = v
                    go(s.body, env)
                env.pop(s.iv, None)
            else:
                reads = tuple((l.name, tuple(a.evaluate(env) for a in l.subs)) for l in expr_loads(s.expr))
                write = (s.target, tuple(a.evaluate(env) for a in s.subs))
                events.append(Access(ids[id(s)], reads, write))

    go(f.body, dict(sizes))
    return events


def dependence_edges(events: list[Access]) -> set[tuple[int, int]]:
    """Statement pairs ``(a, b)`` with some instance of ``b`` depending on an earlier one of ``a``.

    Flow, anti and output dependences are all reported; transitively implied
    edges may be omitted.
    """
    last_write: dict = {}
    readers: dict = {}
    edges = set()
    for ev in events:
        for ref in ev.reads:
            w = last_write.get(ref)
            if w is not None and w != ev.stmt:
                edges.add((w, ev.stmt))
            readers.setdefault(ref, set()).add(ev.stmt)
        ref = ev.write
        for r in readers.pop(ref, ()):
            if r != ev.stmt:
                edges.add((r, ev.stmt))
        w = last_write.get(ref)
        if w is not None and w != ev.stmt:
            edges.add((w, ev.stmt))
        last_write[ref] = ev.stmt
    return edges


def _sccs(n: int, edges: set[tuple[int, int]]) -> list[list[int]]:
    """Tarjan's algorithm; each component is returned sorted."""
    succ = {i: sorted(b for a, b in edges if a == i) for i in range(n)}
    index, low, on, stack, out = {}, {}, set(), [], []
    counter = itertools.count()

    def visit(v):
        index[v] = low[v] = next(counter)
        stack.append(v)
        on.add(v)
        for w in succ[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp))

    for v in range(n):
        if v not in index:
            visit(v)
    return out


def _toposort(groups: list[list[int]], edges) -> list[list[int]] | None:
    """Order groups so every edge goes forward; ties broken by first statement id."""
    owner = {s: g for g, members in enumerate(groups) for s in members}
    succ = {g: set() for g in range(len(groups))}
    indeg = {g: 0 for g in range(len(groups))}
    for a, b in edges:
        ga, gb = owner[a], owner[b]
        if ga != gb and gb not in succ[ga]:
            succ[ga].add(gb)
            indeg[gb] += 1
    ready = sorted((groups[g][0], g) for g in indeg if indeg[g] == 0)
    order = []
    while ready:
        _, g = ready.pop(0)
        order.append(groups[g])
        for h in succ[g]:
            indeg[h] -= 1
            if indeg[h] == 0:
                ready.append((groups[h][0], h))
        ready.sort()
    return order if len(order) == len(groups) else None


def _is_constant_init(stmts: list[Assign], ids) -> bool:
    return all(not expr_loads(stmts[i].expr) for i in ids)


def _prune(body, keep: set[int], ids: dict) -> tuple:
    out = []
    for s in body:
        if isinstance(s, ForLoop):
            inner = _prune(s.body, keep, ids)
            if inner:
                out.append(ForLoop(s.iv, s.lower, s.upper, inner))
        elif ids[id(s)] in keep:
            out.append(s)
    return tuple(out)


@dataclass(frozen=True)
class Slice:
    sub_function: Function
    produced: tuple[str, ...]
    consumed: tuple[str, ...]
    statements: tuple[int, ...] = ()

    def projection(self, name: str) -> Function:
        """The slice restricted to a single result tensor."""
        f = self.sub_function
        if name not in f.returns:
            raise KeyError(name)
        return Function(f.name, f.dims, f.params, f.body, (name,), f.locals)


def group_statements(f: Function) -> list[list[int]]:
    """Statement-id groups, one per slice, in execution order."""
    stmts = number_statements(f)
    if not stmts:
        return []
    edges = dependence_edges(trace(f))
    groups = _toposort(_sccs(len(stmts), edges), edges)
    assert groups is not None, "condensation of a digraph is acyclic"
    # fold pure constant initialisations into their first later user
    groups = _merge_forward(groups, edges, lambda g: _is_constant_init(stmts, g), lambda g: _touched(stmts, g), stmts)
    # a temporary that one group defines only in part is completed in the same slice
    local_names = {v.name for v in f.locals}

    def partial_locals(g):
        return {n for n in _slice_effects(f, [g])[0][2] if n in local_names}

    groups = _merge_forward(groups, edges, partial_locals, lambda g: {stmts[i].target for i in g}, stmts)
    return groups


def _touched(stmts, g) -> set[str]:
    out = {stmts[i].target for i in g}
    for i in g:
        out |= {l.name for l in expr_loads(stmts[i].expr)}
    return out


def _merge_forward(groups, edges, pick, later_names, stmts):
    """Merge each group selected by ``pick`` into the first later group whose
    ``later_names`` meet the tensors it writes, keeping a legal order."""
    k = 0
    while k < len(groups):
        g = groups[k]
        sel = pick(g)
        if sel:
            written = {stmts[i].target for i in g} if sel is True else set(sel)
            for j in range(k + 1, len(groups)):
                if written & later_names(groups[j]):
                    merged = groups[:k] + groups[k + 1 : j] + [sorted(g + groups[j])] + groups[j + 1 :]
                    reordered = _toposort(merged, edges)
                    if reordered is not None:
                        groups = reordered
                        k = -1
                    break
        k += 1
    return groups


def _slice_effects(f: Function, groups: list[list[int]]):
    """Per group: (upward-exposed reads, written tensors, partially written tensors)."""
    events = trace(f)
    sizes = f.dim_sizes
    full = {v.name: int(np.prod([sizes[d] for d in v.dims], dtype=np.int64)) for v in (*f.params, *f.locals)}
    owner = {s: g for g, members in enumerate(groups) for s in members}
    per = [([], set(), {}) for _ in groups]  # exposed reads (ordered), written elems, written names -> elems
    for ev in events:
        g = owner.get(ev.stmt)
        if g is None:
            continue
        exposed, written, by_name = per[g]
        for ref in ev.reads:
            if ref not in written and ref[0] not in exposed:
                exposed.append(ref[0])
        written.add(ev.write)
        by_name.setdefault(ev.write[0], set()).add(ev.write[1])
    out = []
    for exposed, _, by_name in per:
        partial = {n for n, elems in by_name.items() if len(elems) < full[n]}
        out.append((exposed, list(by_name), partial))
    return out


def distribute_loops(f: Function) -> list[Slice]:
    """Split ``f`` into dependence-respecting slices.

    Each slice is a Function over the tensors it consumes and returns the
    tensors later slices (or ``f`` itself) need from it.
    """
    return _build_slices(f, group_statements(f))


def whole_function_slice(f: Function) -> list[Slice]:
    """The trivial distribution: one slice holding the entire body."""
    stmts = number_statements(f)
    return _build_slices(f, [list(range(len(stmts)))] if stmts else [])


def _build_slices(f: Function, groups: list[list[int]]) -> list[Slice]:
    stmts = number_statements(f)
    ids = {id(s): k for k, s in enumerate(stmts)}
    effects = _slice_effects(f, groups)
    param_names = [p.name for p in f.params]
    # which tensors carry a meaningful value into each slice
    available = set(param_names)
    consumed_per = []
    for (exposed, written, partial), g in zip(effects, groups):
        cons = {n for n in exposed if n in available}
        cons |= {n for n in partial if n in available}
        consumed_per.append(cons)
        available |= set(written)
    # last writer before each consumer decides who produces what
    produced_per = [set() for _ in groups]
    last_writer: dict[str, int] = {}
    for k, (_, written, _) in enumerate(effects):
        for n in consumed_per[k]:
            if n in last_writer:
                produced_per[last_writer[n]].add(n)
        for n in written:
            last_writer[n] = k
    for n in f.returns:
        if n in last_writer:
            produced_per[last_writer[n]].add(n)

    decl_order = [v.name for v in (*f.params, *f.locals)]
    slices = []
    for k, g in enumerate(groups):
        if not produced_per[k]:
            continue
        body = _prune(f.body, set(g), ids)
        used = set()
        for i in g:
            used.add(stmts[i].target)
            used |= {l.name for l in expr_loads(stmts[i].expr)}
        cons = [n for n in decl_order if n in consumed_per[k]]
        prod = [n for n in decl_order if n in produced_per[k]]
        params = tuple(_as_var(f, n) for n in cons)
        locals_ = tuple(_as_var(f, n) for n in decl_order if n in used and n not in consumed_per[k])
        name = f"{f.name}_s{len(slices)}"
        sub = Function(name, f.dims, params, body, tuple(prod), locals_)
        slices.append(Slice(sub, tuple(prod), tuple(cons), tuple(g)))
    return slices


def _as_var(f: Function, name: str) -> Var:
    v = f.var(name)
    return Var(v.name, v.elem, v.dims)


def run_slices(f: Function, slices: list[Slice], args, int_mode=None):
    """Interpret the slice composition on batched inputs; returns ``f``'s outputs."""
    env = {p.name: a for p, a in zip(f.params, args)}
    batch = args[0].shape[0] if args else 1
    for sl in slices:
        outs, _ = run_batched(sl.sub_function, [env[n] for n in sl.consumed], int_mode)
        env.update(zip(sl.produced, outs))
    result = []
    for n in f.returns:
        if n in env:
            result.append(env[n])
        else:
            t = f.type_of(n)
            result.append(np.zeros((batch,) + t.shape, dtype=t.elem.dtype))
    return result
