"""End-to-end raising of one source function."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dialect.model import DialectDef
from .postprocess import MissingSlice, RaisedProgram, compose_slices
from .preprocess import distribute_loops, minify_shapes, whole_function_slice
from .seeding import rng
from .source_ir.ast import Function
from .source_ir.interp import gen_random_batch, run_batched
from .synth.config import SynthConfig, SynthStats
from .synth.engine import synthesize, within_tolerance
from .target_ir.text import print_candidate
from .validate import GuaranteeLevel, check_solution

log = logging.getLogger("irsynth.pipeline")

EXIT_RAISED, EXIT_TIMEOUT, EXIT_PARTIAL, EXIT_INPUT = 0, 2, 3, 4
TEST_SCALE = 4  # restored sizes used for the end-to-end check: minified size times this


@dataclass
class SubReport:
    """One synthesis problem: a single result tensor of one slice."""

    slice: str
    result: str
    status: str
    stats: SynthStats
    ops: int = 0
    guarantee: GuaranteeLevel | None = None
    solution: str = ""
    message: str = ""
    int_check: dict | None = None

    def to_dict(self) -> dict:
        return {
            "slice": self.slice,
            "result": self.result,
            "status": self.status,
            "ops": self.ops,
            "guarantee": str(self.guarantee) if self.guarantee else None,
            "solution": self.solution,
            "message": self.message,
            "int_check": self.int_check,
            "stats": self.stats.to_dict(),
        }


@dataclass
class KernelReport:
    name: str
    status: str  # raised | failed | timeout
    stats: SynthStats
    subproblems: list[SubReport] = field(default_factory=list)
    program: RaisedProgram | None = None
    guarantee: GuaranteeLevel | None = None
    message: str = ""
    restored_check: bool | None = None

    @property
    def ops_total(self) -> int:
        return sum(s.ops for s in self.subproblems if s.status == "raised")

    @property
    def ops_max(self) -> int:
        return max((s.ops for s in self.subproblems if s.status == "raised"), default=0)

    @property
    def exit_code(self) -> int:
        if self.status == "raised":
            return EXIT_RAISED
        solved = any(s.status == "raised" for s in self.subproblems)
        if not solved and self.status == "timeout":
            return EXIT_TIMEOUT
        return EXIT_PARTIAL

    def to_dict(self) -> dict:
        return {
            "benchmark": self.name,
            "status": self.status,
            "guarantee": str(self.guarantee) if self.guarantee else None,
            "ops_total": self.ops_total,
            "ops_max": self.ops_max,
            "message": self.message,
            "restored_check": self.restored_check,
            "stats": self.stats.to_dict(),
            "subproblems": [s.to_dict() for s in self.subproblems],
        }


def _remaining(cfg: SynthConfig, deadline: float) -> SynthConfig:
    return dataclasses.replace(cfg, timeout_seconds=max(0.0, deadline - time.monotonic()))


def check_restored(program: RaisedProgram, f: Function, seed: int = 0, count: int = 3, delta: float = 1e-5) -> bool:
    """Interpret ``program`` at enlarged sizes and compare with ``f`` on seeded inputs."""
    sizes = {d: TEST_SCALE * m for d, m in program.shape_map.minified.items()}
    g = f.with_dims(sizes)
    args = gen_random_batch(g, count, rng=rng(seed, "restored", f.name))
    refs, _ = run_batched(g, args)
    outs, bad = program.evaluate(args, sizes)
    if bad.any():
        return False
    return all(bool(within_tolerance(np.asarray(o), r, delta).all()) for o, r in zip(outs, refs))


def raise_function(
    f: Function,
    dialect: DialectDef,
    cfg: SynthConfig | None = None,
    distribute: bool = True,
    validate: bool = True,
    int_check: bool = True,
) -> KernelReport:
    """Minify, slice, synthesize each slice result, validate and recompose."""
    cfg = cfg or SynthConfig()
    start = time.monotonic()
    deadline = start + cfg.timeout_seconds
    fm, shape_map = minify_shapes(f)
    slices = distribute_loops(fm) if distribute else whole_function_slice(fm)
    total = SynthStats()
    subs: list[SubReport] = []
    solved: list[tuple] = []
    levels = []
    statuses = []
    for sl in slices:
        sols = {}
        for name in sl.produced:
            proj = sl.projection(name)
            label = f"{sl.sub_function.name}/{name}"
            res = synthesize(proj, dialect, _remaining(cfg, deadline), label=label)
            total.add(res.stats)
            sub = SubReport(sl.sub_function.name, name, res.status, res.stats, message=res.message)
            if res.candidate is not None:
                sub.ops = res.candidate.op_count
                sub.solution = print_candidate(res.candidate)
                if validate:
                    chk = check_solution(proj, res.candidate, cfg.n_large, cfg.delta, cfg.seed, int_check)
                    sub.guarantee = chk.level
                    if chk.int_check is not None:
                        ic = chk.int_check
                        sub.int_check = {
                            "equivalent": ic.equivalent,
                            "exhaustive": ic.exhaustive,
                            "cases": ic.cases,
                            "domain": list(ic.domain),
                        }
                    if chk.refuted:
                        sub.status = "failed"
                        sub.message = "refuted by validation"
                else:
                    sub.guarantee = GuaranteeLevel.ObsTested
                if sub.status == "raised":
                    sols[name] = res.candidate
                    levels.append(sub.guarantee)
            statuses.append(sub.status)
            subs.append(sub)
            log.info("%s: %s (%s ops, %.1fs)", label, sub.status, sub.ops, res.stats.time_s)
        solved.append((sl, sols))
    total.time_s = time.monotonic() - start
    report = KernelReport(f.name, "raised", total, subs)
    try:
        report.program = compose_slices(solved, shape_map, f, dialect.name)
    except MissingSlice as e:
        report.status = "timeout" if "timeout" in statuses else "failed"
        report.message = str(e)
        return report
    report.guarantee = min(levels) if levels else GuaranteeLevel.ObsTested
    if validate:
        report.restored_check = check_restored(report.program, f, cfg.seed, delta=cfg.delta)
        if not report.restored_check:
            report.status = "failed"
            report.message = "restored program disagrees with the source"
    return report
