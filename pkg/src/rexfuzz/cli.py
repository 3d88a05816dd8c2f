"""Command-line front end.

Exit codes are uniform across subcommands: 0 for a clean run, 1 when bug
reports or findings were produced, 2 for usage or configuration errors, and
3 when an external engine process could not be started.

Engines are addressed by spec string: "builtin", "builtin+fault:<ID>" for a
seeded-defect build, or "cmd:<command line>" for an external adapter speaking
the stdio protocol (see the harness module).
"""
from __future__ import annotations

import argparse
import base64
import dataclasses
import json
import os
import random
import sys
from importlib import resources

from . import pattern as P
from .engines import FAULT_IDS
from .fuzzer import (
    FuzzConfig,
    MODES,
    fuzz_loop,
    fuzz_parallel,
    make_engine,
    parse_engine_spec,
    parse_seed_corpus,
    seed_lines,
    write_coverage_csv,
)
from .harness import SpawnError
from .nfa import GenLimits, NonKleeneInput, compile_nfa, negative_strings, positive_strings
from .relations import RELATION_IDS, get_relation, run_mt
from .reports import (
    NonReproducible,
    dedup,
    from_crash,
    from_finding,
    minimize,
    read_reports,
    to_json,
    write_reports,
)

EXIT_OK = 0
EXIT_BUGS = 1
EXIT_USAGE = 2
EXIT_SPAWN = 3


def _engine_options(ap: argparse.ArgumentParser) -> None:
    ap.add_argument(
        "--engine",
        default="builtin",
        help="engine spec: builtin, builtin+fault:ID, or cmd:COMMAND "
        f"(faults: {', '.join(FAULT_IDS)})",
    )
    ap.add_argument("--step-budget", type=int, default=None, help="built-in engine step cap")
    ap.add_argument("--timeout", type=float, default=None, help="external request timeout, seconds")


def _limits_options(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--max-strings", type=int, default=None, help="generated strings per pattern")
    ap.add_argument("--max-input-len", type=int, default=None, help="generated string length cap")
    ap.add_argument("--star-unroll", type=int, default=None, help="loop iterations to aim for")


def _spec_from(args) -> "EngineSpec":
    spec = parse_engine_spec(args.engine)
    updates = {}
    if args.step_budget is not None:
        updates["step_budget"] = args.step_budget
    if args.timeout is not None:
        updates["timeout"] = args.timeout
    return dataclasses.replace(spec, **updates) if updates else spec


def _limits_from(args) -> GenLimits:
    base = GenLimits()
    updates = {}
    if args.max_strings is not None:
        updates["max_strings"] = args.max_strings
    if args.max_input_len is not None:
        updates["max_string_len"] = args.max_input_len
    if args.star_unroll is not None:
        updates["star_unroll"] = args.star_unroll
    return dataclasses.replace(base, **updates) if updates else base


def _relations_from(args) -> tuple[str, ...] | None:
    if not args.relations:
        return None
    ids = tuple(r.strip() for r in args.relations.split(",") if r.strip())
    for rid in ids:
        try:
            get_relation(rid)
        except KeyError:
            raise ValueError(
                f"unknown relation {rid!r}; expected one of {', '.join(RELATION_IDS)}"
            ) from None
    return ids


def _bundled_seeds() -> bytes:
    return resources.files("rexfuzz").joinpath("data/seeds.txt").read_bytes()


def _display(data: bytes) -> str:
    return "".join(
        chr(c) if 32 <= c < 127 and c != 0x5C else f"\\x{c:02x}" for c in data
    )


# --- fuzz -------------------------------------------------------------------


def _cmd_fuzz(args) -> int:
    spec = _spec_from(args)
    relations = _relations_from(args)
    config = FuzzConfig(
        iterations=args.iterations,
        mode=args.mode,
        seed=args.rng_seed,
        limits=_limits_from(args),
        relations=relations,
        relations_enabled=not args.no_relations,
        max_sites=args.max_sites,
        stop_after_bugs=args.stop_after_bugs,
        snapshot_every=args.snapshot_every,
    )
    if args.no_seeds:
        raw = b""
    elif args.seeds:
        with open(args.seeds, "rb") as f:
            raw = f.read()
    else:
        raw = _bundled_seeds()

    os.makedirs(args.out, exist_ok=True)

    if args.workers > 1:
        results = fuzz_parallel(spec, seed_lines(raw), config, args.workers)
        timelines = {f"worker {i}": r.timeline for i, r in enumerate(results)}
        for i, r in enumerate(results):
            write_coverage_csv(os.path.join(args.out, f"coverage_w{i}.csv"), r.timeline)
        reports = dedup([rep for r in results for rep in r.reports])
        edges = len(set().union(*(r.coverage for r in results)))
        executions = sum(r.stats.executions for r in results)
    else:
        seeds, skipped = parse_seed_corpus(raw)
        if skipped:
            print(f"seeds: skipped {skipped} line(s) outside the dialect", file=sys.stderr)
        engine = make_engine(spec)
        try:
            result = fuzz_loop(engine, seeds, config)
        finally:
            close = getattr(engine, "close", None)
            if close:
                close()
        timelines = result.timeline
        write_coverage_csv(os.path.join(args.out, "coverage.csv"), result.timeline)
        reports = result.unique_reports
        edges = len(result.coverage)
        executions = result.stats.executions

    if args.minimize and reports:
        engine = make_engine(spec)
        try:
            shrunk = []
            for rep in reports:
                try:
                    shrunk.append(minimize(engine, rep, budget=args.minimize_budget))
                except NonReproducible as e:
                    print(f"minimize: {e}", file=sys.stderr)
                    shrunk.append(rep)
            reports = dedup(shrunk)
        finally:
            close = getattr(engine, "close", None)
            if close:
                close()

    bugs_path = os.path.join(args.out, "bugs.jsonl")
    write_reports(bugs_path, reports)
    png_path = os.path.join(args.out, "coverage.png")
    from .plotting import plot_coverage  # deferred: pulls in matplotlib

    plot_coverage(timelines, png_path, x_axis=args.plot_x)

    print(f"executions: {executions}")
    print(f"edges: {edges}")
    print(f"unique bugs: {len(reports)}")
    print(f"wrote {bugs_path}")
    print(f"wrote {png_path}")
    return EXIT_BUGS if reports else EXIT_OK


# --- mt-check ---------------------------------------------------------------


def _cmd_mt_check(args) -> int:
    if not args.pattern and not args.patterns_file:
        print("error: provide --pattern or --patterns-file", file=sys.stderr)
        return EXIT_USAGE
    patterns: list[bytes] = [p.encode("utf-8") for p in args.pattern or []]
    if args.patterns_file:
        with open(args.patterns_file, "rb") as f:
            patterns.extend(seed_lines(f.read()))

    spec = _spec_from(args)
    engine = make_engine(spec)
    try:
        result = run_mt(
            engine,
            patterns,
            relations=_relations_from(args),
            limits=_limits_from(args),
            rng=random.Random(args.rng_seed),
            max_sites=args.max_sites,
            stop_after_findings=args.stop_after,
        )
        reports = dedup(
            [from_finding(f, engine.label) for f in result.findings]
            + [from_crash(c, engine.label) for c in result.crashes]
        )
    finally:
        close = getattr(engine, "close", None)
        if close:
            close()

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rep in reports:
            out.write(json.dumps(to_json(rep)) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    s = result.stats
    print(
        f"patterns={s.patterns} skipped={s.skipped} variants={s.variants} "
        f"checks={s.checks} failures={s.failures} dialect_gaps={s.dialect_gaps} "
        f"timeouts={s.timeouts} crashes={s.crashes}",
        file=sys.stderr,
    )
    return EXIT_BUGS if reports else EXIT_OK


# --- gen-strings ------------------------------------------------------------


def _cmd_gen_strings(args) -> int:
    try:
        ast = P.parse(args.pattern)
    except P.ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    limits = _limits_from(args)
    try:
        nfa = compile_nfa(ast)
    except (NonKleeneInput, P.PatternTooLarge) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    pos = positive_strings(nfa, limits)
    neg = (
        negative_strings(ast, pos, random.Random(args.rng_seed), limits)
        if args.negatives
        else []
    )
    encode = (lambda b: base64.b64encode(b).decode("ascii")) if args.b64 else _display
    for s in pos:
        print(f"+\t{encode(s)}" if args.negatives else encode(s))
    for s in neg:
        print(f"-\t{encode(s)}")
    return EXIT_OK


# --- minimize ---------------------------------------------------------------


def _cmd_minimize(args) -> int:
    reports, errors = read_reports(args.reports)
    for lineno, msg in errors:
        print(f"{args.reports}:{lineno}: {msg}", file=sys.stderr)
    if not reports:
        print("error: no usable reports", file=sys.stderr)
        return EXIT_USAGE

    spec = _spec_from(args)
    engine = make_engine(spec)
    out: list = []
    try:
        for rep in reports:
            try:
                out.append(minimize(engine, rep, budget=args.budget))
            except NonReproducible as e:
                print(f"minimize: {e}", file=sys.stderr)
                out.append(rep)
    finally:
        close = getattr(engine, "close", None)
        if close:
            close()
    if args.out:
        write_reports(args.out, out)
        print(f"wrote {args.out}")
    else:
        for rep in out:
            print(json.dumps(to_json(rep)))
    return EXIT_OK


# --- parser wiring ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rexfuzz", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    fz = sub.add_parser("fuzz", help="run a coverage-guided campaign")
    _engine_options(fz)
    _limits_options(fz)
    fz.add_argument("--seeds", default=None, help="seed corpus file (default: bundled)")
    fz.add_argument("--no-seeds", action="store_true", help="bootstrap from random patterns")
    fz.add_argument("--iterations", type=int, default=1000)
    fz.add_argument("--mode", choices=MODES, default="retest")
    fz.add_argument("--rng-seed", type=int, default=0)
    fz.add_argument("--out", default="rexfuzz-out", help="output directory")
    fz.add_argument("--relations", default=None, help="comma-separated relation ids")
    fz.add_argument("--no-relations", action="store_true", help="coverage only, no oracle")
    fz.add_argument("--max-sites", type=int, default=2)
    fz.add_argument("--stop-after-bugs", type=int, default=None)
    fz.add_argument("--snapshot-every", type=int, default=64)
    fz.add_argument("--workers", type=int, default=1)
    fz.add_argument("--minimize", action="store_true", help="shrink reports after the run")
    fz.add_argument("--minimize-budget", type=int, default=200)
    fz.add_argument("--plot-x", choices=("iteration", "elapsed_ms"), default="iteration")
    fz.set_defaults(func=_cmd_fuzz)

    mt = sub.add_parser("mt-check", help="run the metamorphic oracle on given patterns")
    _engine_options(mt)
    _limits_options(mt)
    mt.add_argument("--pattern", action="append", help="pattern to check (repeatable)")
    mt.add_argument("--patterns-file", default=None)
    mt.add_argument("--relations", default=None, help="comma-separated relation ids")
    mt.add_argument("--max-sites", type=int, default=4)
    mt.add_argument("--stop-after", type=int, default=None)
    mt.add_argument("--rng-seed", type=int, default=0)
    mt.add_argument("--out", default=None, help="write findings JSONL here instead of stdout")
    mt.set_defaults(func=_cmd_mt_check)

    gs = sub.add_parser("gen-strings", help="generate member / near-miss strings")
    _limits_options(gs)
    gs.add_argument("pattern")
    gs.add_argument("--negatives", action="store_true", help="also emit near-miss strings")
    gs.add_argument("--b64", action="store_true", help="base64 output instead of escaped text")
    gs.add_argument("--rng-seed", type=int, default=0)
    gs.set_defaults(func=_cmd_gen_strings)

    mn = sub.add_parser("minimize", help="shrink reports from a JSONL file")
    _engine_options(mn)
    mn.add_argument("--reports", required=True)
    mn.add_argument("--out", default=None)
    mn.add_argument("--budget", type=int, default=200)
    mn.set_defaults(func=_cmd_minimize)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpawnError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPAWN
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
