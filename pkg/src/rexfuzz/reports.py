"""Bug reports: JSONL persistence, deduplication, and test-case shrinking.

A report is one line of JSON with a fixed field set:

    {"kind": "mt" | "crash", "relation": ..., "pattern": ..., "variant": ...,
     "input_b64": ..., "mode": ..., "base": ..., "variant_result": ...,
     "engine": ..., "iteration": ..., "minimized": ...}

Crash reports additionally carry "exit_code", "signal", and
"sanitizer_report".  Patterns are stored as text (the serializer emits pure
ASCII); inputs are arbitrary bytes, hence base64.

Deduplication keys on (kind, relation-or-signal, pattern), preferring the
minimized pattern when present, so shrinking first makes duplicates from
different fuzz iterations collapse onto one line.
"""
from __future__ import annotations

import base64
import dataclasses
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import pattern as P
from .engines import MatchResult
from .nfa import GenLimits
from .relations import CrashRecord, MtFinding, mt_check_pattern

DEFAULT_MINIMIZE_BUDGET = 200


class NonReproducible(RuntimeError):
    """The report's behavior did not recur when replayed."""


@dataclass(frozen=True)
class BugReport:
    kind: str
    engine: str
    pattern: str
    input: bytes
    relation: str | None = None
    mode: str | None = None
    variant: str | None = None
    base: MatchResult | None = None
    variant_result: MatchResult | None = None
    exit_code: int | None = None
    signal: int | None = None
    sanitizer_report: str | None = None
    iteration: int | None = None
    minimized: str | None = None


def from_finding(f: MtFinding, engine: str, iteration: int | None = None) -> BugReport:
    return BugReport(
        kind="mt",
        engine=engine,
        pattern=f.pattern.decode("ascii"),
        input=f.input,
        relation=f.relation,
        mode=f.mode,
        variant=f.variant.decode("ascii"),
        base=f.base,
        variant_result=f.variant_result,
        iteration=iteration,
    )


def from_crash(c: CrashRecord, engine: str, iteration: int | None = None) -> BugReport:
    return BugReport(
        kind="crash",
        engine=engine,
        pattern=c.pattern.decode("ascii"),
        input=c.input,
        relation=c.relation,
        exit_code=c.info.exit_code,
        signal=c.info.signal,
        sanitizer_report=c.info.sanitizer_report,
        iteration=iteration,
    )


def _result_to_json(r: MatchResult | None):
    if r is None:
        return None
    return {
        "matched": r.matched,
        "span": list(r.span) if r.span is not None else None,
        "fullmatch": r.fullmatch,
    }


def _result_from_json(obj) -> MatchResult | None:
    if obj is None:
        return None
    span = obj["span"]
    return MatchResult(
        matched=bool(obj["matched"]),
        span=tuple(span) if span is not None else None,
        fullmatch=bool(obj["fullmatch"]),
    )


def to_json(report: BugReport) -> dict:
    obj = {
        "kind": report.kind,
        "relation": report.relation,
        "pattern": report.pattern,
        "variant": report.variant,
        "input_b64": base64.b64encode(report.input).decode("ascii"),
        "mode": report.mode,
        "base": _result_to_json(report.base),
        "variant_result": _result_to_json(report.variant_result),
        "engine": report.engine,
        "iteration": report.iteration,
        "minimized": report.minimized,
    }
    if report.kind == "crash":
        obj["exit_code"] = report.exit_code
        obj["signal"] = report.signal
        obj["sanitizer_report"] = report.sanitizer_report
    return obj


def from_json(obj: dict) -> BugReport:
    if not isinstance(obj, dict):
        raise ValueError("report line is not an object")
    for key in ("kind", "pattern", "input_b64", "engine"):
        if key not in obj:
            raise ValueError(f"report missing field {key!r}")
    return BugReport(
        kind=obj["kind"],
        engine=obj["engine"],
        pattern=obj["pattern"],
        input=base64.b64decode(obj["input_b64"]),
        relation=obj.get("relation"),
        mode=obj.get("mode"),
        variant=obj.get("variant"),
        base=_result_from_json(obj.get("base")),
        variant_result=_result_from_json(obj.get("variant_result")),
        exit_code=obj.get("exit_code"),
        signal=obj.get("signal"),
        sanitizer_report=obj.get("sanitizer_report"),
        iteration=obj.get("iteration"),
        minimized=obj.get("minimized"),
    )


def write_reports(path: str, reports: Iterable[BugReport]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(json.dumps(to_json(r)) + "\n")


def read_reports(path: str) -> tuple[list[BugReport], list[tuple[int, str]]]:
    """Load a JSONL report file.  Bad lines are collected as (lineno,
    message) instead of aborting the whole read."""
    reports: list[BugReport] = []
    errors: list[tuple[int, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                reports.append(from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as e:
                errors.append((lineno, str(e)))
    return reports, errors


def dedup_key(report: BugReport) -> tuple[str, str, str]:
    pat = report.minimized if report.minimized is not None else report.pattern
    if report.kind == "crash":
        if report.signal is not None:
            disc = f"signal:{report.signal}"
        else:
            disc = f"exit:{report.exit_code}"
    else:
        disc = report.relation or ""
    return (report.kind, disc, pat)


def dedup(reports: Sequence[BugReport]) -> list[BugReport]:
    """Keep the first report for each (kind, discriminator, pattern) key."""
    seen: set[tuple[str, str, str]] = set()
    out: list[BugReport] = []
    for r in reports:
        k = dedup_key(r)
        if k not in seen:
            seen.add(k)
            out.append(r)
    return out


# --- shrinking --------------------------------------------------------------


def _shrink_candidates(ast: P.Node):
    """One-step structural reductions of a pattern tree, preorder.

    Yields whole-tree candidates: dropped alternation options, dropped
    concatenation parts, dequantified or emptied repetitions, unwrapped
    groups, and classes narrowed to their lowest byte.
    """
    for path, node in P.walk(ast):
        k = node.kind
        if k == "alt":
            for i in range(len(node.options)):
                rest = node.options[:i] + node.options[i + 1 :]
                yield P.replace(ast, path, P.alternation(list(rest)))
        elif k == "concat":
            for i in range(len(node.parts)):
                rest = node.parts[:i] + node.parts[i + 1 :]
                yield P.replace(ast, path, P.concat(list(rest)))
        elif k in ("star", "plus", "optional", "repeat"):
            yield P.replace(ast, path, node.child)
            yield P.replace(ast, path, P.Empty())
        elif k == "group":
            yield P.replace(ast, path, node.child)
        elif k == "class" and node.items:
            ranges = P.char_class_ranges(node.items, node.negated)
            if ranges:
                yield P.replace(ast, path, P.Literal(byte=ranges[0][0]))


def _minimize_pattern(src: str, reproduces, budget: int) -> tuple[str, int]:
    """Greedy shrink: accept any candidate that still reproduces, restart
    from it, stop at fixpoint or when the budget is spent."""
    current = P.parse(src)
    current_src = src
    improved = True
    while improved and budget > 0:
        improved = False
        for cand in _shrink_candidates(current):
            if budget <= 0:
                break
            cand_src = P.serialize(cand)
            if cand_src == current_src:
                continue
            budget -= 1
            if reproduces(cand_src):
                current, current_src = cand, cand_src
                improved = True
                break
    return current_src, budget


def _minimize_input(data: bytes, reproduces, budget: int) -> tuple[bytes, int]:
    """Byte-level chunk deletion, halving chunk size down to one byte."""
    chunk = max(1, len(data) // 2)
    while chunk >= 1 and budget > 0:
        i = 0
        while i < len(data) and budget > 0:
            cand = data[:i] + data[i + chunk :]
            budget -= 1
            if len(cand) < len(data) and reproduces(cand):
                data = cand
            else:
                i += chunk
        chunk //= 2
    return data, budget


def minimize(
    engine,
    report: BugReport,
    budget: int = DEFAULT_MINIMIZE_BUDGET,
    limits: GenLimits | None = None,
) -> BugReport:
    """Shrink a report's pattern (and, for crashes, its input).

    Every candidate is replayed against the engine; the returned report has
    `minimized` set (and for crashes a shortened `input`).  Raises
    NonReproducible when even the original no longer shows the behavior.
    """
    limits = limits or GenLimits(max_strings=8, max_string_len=32)

    if report.kind == "crash":
        data = report.input

        def crash_repro_pattern(src: str) -> bool:
            v = engine.search(src.encode("ascii"), data)
            return v.status == "crash"

        if not crash_repro_pattern(report.pattern):
            raise NonReproducible(f"pattern {report.pattern!r} no longer crashes")
        min_src, budget = _minimize_pattern(report.pattern, crash_repro_pattern, budget)

        def crash_repro_input(d: bytes) -> bool:
            return engine.search(min_src.encode("ascii"), d).status == "crash"

        min_input, budget = _minimize_input(data, crash_repro_input, budget)
        return dataclasses.replace(report, minimized=min_src, input=min_input)

    relation = report.relation

    def mt_repro(src: str) -> bool:
        try:
            ast = P.parse(src)
        except P.ParseError:
            return False
        r = mt_check_pattern(
            engine,
            ast,
            relations=[relation],
            limits=limits,
            max_sites=8,
            stop_after_findings=1,
        )
        return bool(r.findings)

    if not mt_repro(report.pattern):
        raise NonReproducible(
            f"relation {relation} no longer fails on pattern {report.pattern!r}"
        )
    min_src, _ = _minimize_pattern(report.pattern, mt_repro, budget)
    return dataclasses.replace(report, minimized=min_src)
