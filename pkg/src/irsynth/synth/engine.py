"""Bottom-up enumerative synthesis with observational-equivalence pruning.

Candidates are grown in rounds of increasing tree size (arguments and constants
have size 0, every op application adds 1). Round ``k`` applies each operation,
in pick_operations order, to operand tuples whose sizes sum to ``k - 1``.
Operand tuples are grouped by the concrete types of their members, so one
static check settles a whole group; passing groups are evaluated in vectorized
chunks on the small input set ``I_n``. A value already present in the
candidate set is discarded, and the first value matching the reference on
``I_n`` is re-checked on a fresh, larger ``I_N``.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from ..dialect.model import DialectDef, OpDef
from ..dialect.shapes import AttrBinding, TypeInferenceError, infer_result_type
from ..seeding import rng as make_rng
from ..source_ir.ast import Function
from ..source_ir.interp import gen_random_batch, run_batched
from ..target_ir.candidate import ArgRef, Candidate, Const, DagBuilder, Node, RegionBody
from ..target_ir.eval import EvalFailure, apply_op, canonical_bytes, evaluate_batched
from ..tensor import TensorType
from .config import SynthConfig, SynthStats
from .space import gen_attrs, gen_regions, known_shapes, max_rank, pick_operations, static_check

log = logging.getLogger("irsynth.synth")


@dataclass(frozen=True)
class Entry:
    """How a member of the candidate set was built."""

    type: TensorType
    size: int
    arg: int = -1
    const: float | None = None
    op: OpDef | None = None
    operands: tuple[int, ...] = ()
    attrs: AttrBinding = ()
    region: RegionBody | None = None


class CandidateSet:
    """Members with their values on ``I_n``, indexed by concrete type, size and signature."""

    def __init__(self, dedup: bool = True):
        self.dedup = dedup
        self.entries: list[Entry] = []
        self.values: list[np.ndarray] = []
        self.types: list[TensorType] = []
        self._sigs: dict[TensorType, dict[bytes, int]] = {}
        self._groups: dict[tuple[TensorType, int], list[int]] = {}
        self._stacks: dict[tuple[TensorType, int], tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self):
        return len(self.entries)

    def lookup(self, t: TensorType, key: bytes) -> int | None:
        return self._sigs.get(t, {}).get(key)

    def add(self, entry: Entry, value: np.ndarray, key: bytes | None = None) -> int | None:
        """Insert unless an equal signature exists (when deduplicating). Returns the new id."""
        t = entry.type
        if key is None:
            key = canonical_bytes(value)
        sigs = self._sigs.setdefault(t, {})
        if self.dedup and key in sigs:
            return None
        k = len(self.entries)
        sigs.setdefault(key, k)
        self.entries.append(entry)
        self.values.append(value)
        if t not in self.types:
            self.types.append(t)
        self._groups.setdefault((t, entry.size), []).append(k)
        return k

    def count(self, t: TensorType, size: int) -> int:
        return len(self._groups.get((t, size), ()))

    def group(self, t: TensorType, size: int) -> tuple[np.ndarray, np.ndarray]:
        """``(ids, stacked values)`` of the members with this type and size."""
        key = (t, size)
        hit = self._stacks.get(key)
        ids = self._groups.get(key, [])
        if hit is None or len(hit[0]) != len(ids):
            vals = np.stack([self.values[i] for i in ids]) if ids else np.zeros((0,))
            hit = self._stacks[key] = (np.asarray(ids, dtype=np.int64), vals)
        return hit

    def signatures(self) -> list[tuple[TensorType, bytes]]:
        return [(t, b) for t, d in self._sigs.items() for b in d]

    def members(self):
        return [(k, e.type) for k, e in enumerate(self.entries)]


@dataclass
class SynthResult:
    status: str  # raised | timeout | exhausted
    candidate: Candidate | None
    stats: SynthStats
    message: str = ""


class _Stop(Exception):
    def __init__(self, status, message=""):
        self.status, self.message = status, message


def compositions(total: int, parts: int):
    """Ordered ways to write ``total`` as ``parts`` non-negative integers, lexicographic."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def within_tolerance(out: np.ndarray, ref: np.ndarray, delta: float) -> np.ndarray:
    """Per leading index, whether every element satisfies the mixed relative/absolute bound."""
    with np.errstate(all="ignore"):
        ok = np.abs(out - ref) < delta * np.maximum(1.0, np.abs(ref))
    return ok.reshape(ok.shape[: ok.ndim - ref.ndim] + (-1,)).all(axis=-1)


def spec_check(I, f: Function, f_prime: Candidate, delta: float = 1e-5) -> bool:
    """Whether ``f_prime`` matches ``f`` on every input in ``I`` (batched arrays)."""
    ref, _ = run_batched(f, I)
    try:
        out, bad = evaluate_batched(f_prime, I)
    except EvalFailure:
        return False
    if bad.any() or out.shape != ref[0].shape:
        return False
    return bool(within_tolerance(out, ref[0], delta).all())


class Enumerator:
    def __init__(self, f: Function, dialect: DialectDef, cfg: SynthConfig, I_n, stats: SynthStats, deadline: float):
        if len(f.returns) != 1:
            raise ValueError("synthesis works on single-result functions; project the slice first")
        self.f = f
        self.dialect = dialect
        self.cfg = cfg
        self.I_n = I_n
        self.n = cfg.n_small
        self.stats = stats
        self.deadline = deadline
        self.ref_type = f.result_types[0]
        ref, _ = run_batched(f, I_n)
        self.ref = ref[0]
        self.rank_limit = max_rank(f)
        self.shapes = known_shapes(f)
        self.ops = pick_operations(f, dialect, cfg)
        self.cs = CandidateSet(dedup=not cfg.naive)
        self.naive = cfg.naive

    # -- candidate construction -------------------------------------------
    @staticmethod
    def _node(b: DagBuilder, e: Entry, operands) -> int:
        if e.op is None and e.const is None:
            return b.add(Node(ArgRef(e.arg), e.type))
        if e.op is None:
            return b.add(Node(Const.splat(e.type, e.const), e.type))
        return b.add(Node(e.op, e.type, operands, e.attrs, e.region))

    def candidate_from(self, entry: Entry) -> Candidate:
        b = DagBuilder(self.dialect.name)
        memo: dict[int, int] = {}

        def build(i):
            if i not in memo:
                e = self.cs.entries[i]
                memo[i] = self._node(b, e, tuple(build(o) for o in e.operands))
            return memo[i]

        return b.build(self._node(b, entry, tuple(build(o) for o in entry.operands)))

    # -- initial set -------------------------------------------------------
    def init_candidates(self) -> Candidate | None:
        elem = self.ref_type.elem
        leaves: list[tuple[Entry, np.ndarray]] = []
        for k, (t, a) in enumerate(zip(self.f.param_types, self.I_n)):
            leaves.append((Entry(t, 0, arg=k), a))
        consts = [TensorType(elem, ())] + [TensorType(elem, s) for s in self.shapes]
        for t in consts:
            for v in (0.0, 1.0):
                leaves.append((Entry(t, 0, const=v), np.full((self.n,) + t.shape, v, dtype=elem.dtype)))
        for e, val in leaves:
            val = np.ascontiguousarray(val)
            if e.type == self.ref_type and within_tolerance(val[None], self.ref, self.cfg.delta)[0]:
                return self.candidate_from(e)
            if self.cs.add(e, val) is None and e.arg >= 0:
                log.warning("argument %d is observationally equal to an earlier member; dropped", e.arg)
        return None

    # -- main loop ---------------------------------------------------------
    def run(self) -> Candidate | None:
        hit = self.init_candidates()
        if hit is not None:
            return hit
        for k in range(1, self.cfg.max_ops + 1):
            before = len(self.cs)
            self.stats.rounds += 1
            hit = self.round(k)
            log.info(
                "round %d: %d new candidates, %d total, enumerated=%d evaluated=%d",
                k, len(self.cs) - before, len(self.cs), self.stats.enumerated, self.stats.evaluated,
            )
            if hit is not None:
                return hit
        return None

    def _slot_types(self, op: OpDef, comp) -> list[list[TensorType]]:
        out = []
        for cls, size in zip(op.operand_types, comp):
            out.append([t for t in self.cs.types if (self.naive or t.type_class == cls) and self.cs.count(t, size)])
        return out

    def round(self, k: int) -> Candidate | None:
        for op in self.ops:
            arity = len(op.operand_types)
            if arity == 0 and k != 1:
                continue
            regions = gen_regions(op) or [None]
            for comp in compositions(k - 1, arity):
                for combo in itertools.product(*self._slot_types(op, comp)):
                    n_tuples = math.prod(self.cs.count(t, s) for t, s in zip(combo, comp))
                    for attrs in gen_attrs(op, combo, self.shapes):
                        for region in regions:
                            self._check_limits()
                            out_t = self._static(op, combo, attrs)
                            before = (self.stats.enumerated, self.stats.evaluated)
                            try:
                                hit = self._group(op, combo, comp, attrs, region, out_t, k, n_tuples)
                            finally:
                                per = self.stats.extra.setdefault("per_op", {}).setdefault(op.name, [0, 0])
                                per[0] += self.stats.enumerated - before[0]
                                per[1] += self.stats.evaluated - before[1]
                            if hit is not None:
                                return hit
        return None

    def _group(self, op, combo, comp, attrs, region, out_t, k, n_tuples):
        if out_t is None:
            self.stats.enumerated += n_tuples
            if self.naive:
                self.stats.evaluated += n_tuples
                self.stats.eval_failed += n_tuples
            else:
                self.stats.static_filtered += n_tuples
            return None
        return self.eval_group(op, combo, comp, attrs, region, out_t, k)

    def _static(self, op, combo, attrs):
        if self.naive:
            try:
                return infer_result_type(op, combo, attrs)
            except TypeInferenceError:
                return None
        return static_check(op, combo, attrs, self.rank_limit)

    def _check_limits(self):
        if time.monotonic() > self.deadline:
            raise _Stop("timeout", "wall-clock limit reached")
        if self.stats.evaluated >= self.cfg.max_evaluated:
            raise _Stop("timeout", f"evaluation budget of {self.cfg.max_evaluated} reached")
        if len(self.cs) >= self.cfg.max_candidates:
            raise _Stop("timeout", f"candidate budget of {self.cfg.max_candidates} reached")

    def eval_group(self, op, combo, comp, attrs, region, out_t, k) -> Candidate | None:
        groups = [self.cs.group(t, s) for t, s in zip(combo, comp)]
        dims = tuple(len(g[0]) for g in groups)
        total = math.prod(dims)
        per = self.n * (sum(t.size for t in combo) + out_t.size) + 1
        chunk = max(1, self.cfg.chunk_elems // per)
        node = Node(op, out_t, (), attrs, region)
        check = out_t == self.ref_type
        for start in range(0, total, chunk):
            self._check_limits()
            stop = min(total, start + chunk)
            c = stop - start
            if groups:
                idx = np.unravel_index(np.arange(start, stop), dims)
                operands = [g[1][ix] for g, ix in zip(groups, idx)]
            else:
                idx = ()
                operands = []
            try:
                out, bad = apply_op(node, combo, operands, (c, self.n), False)
            except EvalFailure:
                self.stats.enumerated += c
                self.stats.evaluated += c
                self.stats.eval_failed += c
                continue
            bad_t = bad.any(axis=1)
            limit = c
            match_at = None
            if check:
                hits = np.flatnonzero(~bad_t & within_tolerance(out, self.ref, self.cfg.delta))
                if len(hits):
                    match_at = int(hits[0])
                    limit = match_at + 1
            self.stats.enumerated += limit
            self.stats.evaluated += limit
            n_bad = int(bad_t[:limit].sum())
            self.stats.eval_failed += n_bad
            operand_ids = [g[0][ix[:limit]] for g, ix in zip(groups, idx)] if groups else []
            if match_at is not None:
                ops = tuple(int(ids[match_at]) for ids in operand_ids)
                return self.candidate_from(Entry(out_t, k, op=op, operands=ops, attrs=attrs, region=region))
            self._insert(out[:limit], bad_t[:limit], operand_ids, out_t, k, op, attrs, region, limit - n_bad)
        return None

    def _insert(self, out, bad_t, operand_ids, out_t, k, op, attrs, region, n_ok):
        keep = np.flatnonzero(~bad_t)
        if not len(keep):
            return
        vals = np.ascontiguousarray(out[keep])
        if vals.dtype.kind == "f":
            vals = vals + 0.0  # fold -0.0
        rows = vals.reshape(len(keep), -1)
        if self.cs.dedup:
            width = rows.shape[1] * rows.itemsize
            view = np.ascontiguousarray(rows).view(np.dtype((np.void, width))).reshape(-1)
            _, first = np.unique(view, return_index=True)
            order = np.sort(first)
        else:
            order = np.arange(len(keep))
        inserted = 0
        for i in order:
            src = int(keep[i])
            entry = Entry(out_t, k, op=op, operands=tuple(int(ids[src]) for ids in operand_ids), attrs=attrs, region=region)
            if self.cs.add(entry, vals[i].copy(), rows[i].tobytes()) is not None:
                inserted += 1
        self.stats.equiv_filtered += n_ok - inserted


def synthesize(f: Function, dialect: DialectDef, cfg: SynthConfig | None = None, label: str = "") -> SynthResult:
    """Find a candidate over ``dialect`` equivalent to single-result ``f`` on random inputs."""
    cfg = cfg or SynthConfig()
    stats = SynthStats()
    start = time.monotonic()
    deadline = start + cfg.timeout_seconds
    lo, hi = cfg.input_range
    status, message = "exhausted", f"no candidate with at most {cfg.max_ops} ops"
    found = None
    for attempt in range(cfg.max_restarts + 1):
        I_n = gen_random_batch(f, cfg.n_small, lo, hi, rng=make_rng(cfg.seed, label, "small", attempt))
        en = Enumerator(f, dialect, cfg, I_n, stats, deadline)
        try:
            cand = en.run()
        except _Stop as stop:
            status, message, cand = stop.status, stop.message, None
        finally:
            stats.candidates = len(en.cs)
        if cand is None:
            break
        I_N = gen_random_batch(f, cfg.n_large, lo, hi, rng=make_rng(cfg.seed, label, "large", attempt))
        if spec_check(I_N, f, cand, cfg.delta):
            found = cand
            status, message = "raised", ""
            break
        log.info("candidate failed on the large input set; restarting with fresh inputs")
        stats.restarts += 1
    else:
        status, message = "exhausted", f"gave up after {cfg.max_restarts} restarts"
    stats.time_s = time.monotonic() - start
    if found is not None:
        stats.ops = found.op_count
    stats.check()
    return SynthResult(status, found, stats, message)
