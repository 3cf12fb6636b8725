"""Command-line driver: ``irsynth raise`` and ``irsynth bench``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .dialect.parser import DialectSyntaxError, load_dialect_by_name
from .pipeline import EXIT_INPUT, KernelReport, raise_function
from .source_ir.parser import SirSyntaxError, parse_file
from .synth.config import HEURISTICS, SynthConfig

CSV_HEADER = (
    "benchmark",
    "enumerated",
    "static_filtered",
    "evaluated",
    "equiv_filtered",
    "ops_total",
    "ops_max",
    "time_s",
    "guarantee",
    "status",
)


class InputError(Exception):
    pass


def _config(args, timeout: float) -> SynthConfig:
    kw = dict(timeout_seconds=timeout, seed=args.seed, heuristics=args.heuristics, naive=args.naive)
    if args.max_evaluated is not None:
        kw["max_evaluated"] = args.max_evaluated
    if args.max_candidates is not None:
        kw["max_candidates"] = args.max_candidates
    if args.max_ops is not None:
        kw["max_ops"] = args.max_ops
    return SynthConfig(**kw)


def _dialect(name: str):
    try:
        return load_dialect_by_name(name)
    except FileNotFoundError as e:
        raise InputError(str(e)) from None
    except DialectSyntaxError as e:
        raise InputError(f"dialect {name}: {e}") from None


def _source(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such input file: {path}")
    try:
        return parse_file(p)
    except SirSyntaxError as e:
        raise InputError(f"{path}: {e}") from None


def csv_row(r: KernelReport, with_time: bool = True) -> list:
    s = r.stats
    return [
        r.name,
        s.enumerated,
        s.static_filtered,
        s.evaluated,
        s.equiv_filtered,
        r.ops_total,
        r.ops_max,
        f"{s.time_s:.2f}" if with_time else "0",
        str(r.guarantee) if r.guarantee else "",
        r.status,
    ]


def format_csv(reports, with_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(reports, key=lambda r: r.name):
        w.writerow(csv_row(r, with_time))
    return buf.getvalue()


def _stats_json(r: KernelReport, cfg: SynthConfig, with_time: bool = True) -> str:
    d = r.to_dict()
    d["config"] = cfg.to_dict()
    if not with_time:
        d["stats"]["time_s"] = 0.0
        for s in d["subproblems"]:
            s["stats"]["time_s"] = 0.0
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def cmd_raise(args) -> int:
    try:
        f = _source(args.input)
        d = _dialect(args.dialect)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    cfg = _config(args, args.timeout)
    report = raise_function(f, d, cfg, distribute=not args.no_distribute)
    if args.emit_stats:
        Path(args.emit_stats).write_text(_stats_json(report, cfg))
    if report.status != "raised":
        print(f"{f.name}: {report.status}: {report.message}", file=sys.stderr)
        return report.exit_code
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".tir")
    out.write_text(report.program.to_text())
    print(out)
    return report.exit_code


def cmd_bench(args) -> int:
    try:
        d = _dialect(args.dialect)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        print(f"error: no such corpus directory: {corpus}", file=sys.stderr)
        return EXIT_INPUT
    files = sorted(corpus.glob("*.sir"))
    if args.kernels:
        wanted = set(args.kernels.split(","))
        files = [p for p in files if p.stem in wanted]
    cfg = _config(args, args.timeout)
    sol_dir = Path(args.solutions) if args.solutions else None
    if sol_dir:
        sol_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for p in files:
        try:
            f = parse_file(p)
        except SirSyntaxError as e:
            print(f"{p}: {e}", file=sys.stderr)
            continue
        r = raise_function(f, d, cfg, distribute=not args.no_distribute)
        r.name = p.stem
        reports.append(r)
        print(f"{p.stem}: {r.status} ops={r.ops_total}({r.ops_max}) {r.stats.time_s:.1f}s", file=sys.stderr)
        if sol_dir:
            if r.program is not None and r.status == "raised":
                (sol_dir / f"{p.stem}.tir").write_text(r.program.to_text())
            (sol_dir / f"{p.stem}.json").write_text(_stats_json(r, cfg, with_time=not args.no_time))
    text = format_csv(reports, with_time=not args.no_time)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dialect", required=True, help="dialect name or path to a .dialect file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heuristics", choices=HEURISTICS, default="both")
    p.add_argument("--naive", action="store_true", help="no type filtering, no equivalence pruning, no heuristics")
    p.add_argument("--no-distribute", action="store_true", help="synthesize the whole function as one slice")
    p.add_argument("--max-ops", type=int, default=None)
    p.add_argument("--max-evaluated", type=int, default=None, help="evaluation budget per sub-problem")
    p.add_argument("--max-candidates", type=int, default=None, help="candidate-set size limit per sub-problem")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irsynth", description="Raise loop kernels to a tensor dialect by enumerative synthesis.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("raise", help="raise one source file")
    r.add_argument("--input", required=True)
    _common(r)
    r.add_argument("--timeout", type=float, default=600.0, help="seconds for the whole kernel")
    r.add_argument("--emit-stats", metavar="FILE.json")
    r.add_argument("-o", "--output", metavar="FILE.tir")
    r.set_defaults(func=cmd_raise)

    b = sub.add_parser("bench", help="raise every kernel of a corpus and write a CSV report")
    _common(b)
    b.add_argument("--corpus", default="corpus/polybench")
    b.add_argument("--timeout", type=float, default=600.0, help="seconds per kernel")
    b.add_argument("--out", metavar="REPORT.csv")
    b.add_argument("--solutions", metavar="DIR", help="write .tir solutions and JSON stats here")
    b.add_argument("--kernels", help="comma-separated subset of kernel names")
    b.add_argument("--no-time", action="store_true", help="write 0 in the time_s column")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
