"""Match engines: a built-in backtracking engine plus fault-injected variants.

The built-in engine compiles patterns to a small instruction program and runs
a leftmost-first greedy backtracking VM over it, the same strategy as the
PCRE family: alternatives are tried in source order, quantifiers prefer the
longest iteration count, and a quantified subexpression that matches empty
width at its own entry position terminates the loop.  A configurable step
budget turns catastrophic backtracking into a Timeout verdict instead of a
hang.

Edge coverage for the fuzzer hashes pairs of consecutively visited
instruction indices into a 16-bit space.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Any

from . import pattern as P
from .pattern import Node, ParseError, PatternTooLarge

DEFAULT_STEP_BUDGET = 1_000_000
MAX_PROGRAM_LEN = 20_000

FAULT_IDS = (
    "ALT_FIRST_ONLY",
    "STAR_DROP_LAST",
    "CLASS_OFF_BY_ONE",
    "EMPTY_LOOP_SKIP",
)


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    span: tuple[int, int] | None
    fullmatch: bool


@dataclass(frozen=True)
class CrashInfo:
    exit_code: int | None = None
    signal: int | None = None
    sanitizer_report: str | None = None
    last_request: dict[str, Any] | None = None


@dataclass(frozen=True)
class EngineVerdict:
    status: str  # "ok" | "compile_error" | "crash" | "timeout"
    result: MatchResult | None = None
    message: str | None = None
    crash: CrashInfo | None = None

    @classmethod
    def ok(cls, result: MatchResult) -> "EngineVerdict":
        return cls(status="ok", result=result)

    @classmethod
    def compile_error(cls, message: str) -> "EngineVerdict":
        return cls(status="compile_error", message=message)

    @classmethod
    def crashed(cls, info: CrashInfo) -> "EngineVerdict":
        return cls(status="crash", crash=info)

    @classmethod
    def timeout(cls) -> "EngineVerdict":
        return cls(status="timeout")

    @property
    def is_ok(self) -> bool:
        return self.status == "ok"


class CompileFailure(ValueError):
    """Internal: pattern is parseable but the engine refuses to compile it."""


# Instruction opcodes.  Each instruction is a (op, a, b) tuple.
OP_CLASS = 0   # a = 256-bit member mask; consume one byte
OP_SPLIT = 1   # try a first, queue (b, here) as backtrack point
OP_JMP = 2
OP_MATCH = 3
OP_FAIL = 4
OP_BOL = 5
OP_EOL = 6
OP_PUSH = 7        # push current position on the loop-mark stack
OP_LOOP = 8        # a = continue target, b = exit: exit when no progress
OP_LOOP_DROP = 9   # one-fewer-than-maximal star iteration (fault)
OP_LOOP_PURGE = 10  # empty-width iteration discards pending body branches (fault)

_ALL_MASK = (1 << 256) - 1
_DOT_MASK = _ALL_MASK ^ (1 << 0x0A)


def _class_mask(node: Node, fault: str | None) -> int:
    if node.kind == "literal":
        return 1 << node.byte
    if node.kind == "dot":
        return _DOT_MASK
    items = node.items
    if fault == "CLASS_OFF_BY_ONE":
        # Range upper bounds treated exclusively; singletons keep working.
        adjusted = []
        for lo, hi in items:
            if hi > lo:
                hi -= 1
            adjusted.append((lo, hi))
        items = tuple(adjusted)
    mask = 0
    for lo, hi in P.char_class_ranges(items, negated=False):
        mask |= ((1 << (hi - lo + 1)) - 1) << lo
    if node.negated:
        mask ^= _ALL_MASK
    return mask


def compile_program(ast: Node, fault: str | None = None) -> list[tuple[int, int, int]]:
    """Lower a pattern tree to VM instructions.

    Raises CompileFailure for lazy quantifiers, oversized repeat expansions,
    and programs beyond MAX_PROGRAM_LEN.
    """
    for _, node in P.walk(ast):
        if node.kind in ("star", "plus", "optional", "repeat") and not node.greedy:
            raise CompileFailure("lazy quantifiers are not executable")
    try:
        ast = P.expand_repeats(ast)
    except PatternTooLarge as e:
        raise CompileFailure(str(e)) from e

    prog: list[list[int]] = []

    def emit(op: int, a: int = 0, b: int = 0) -> int:
        prog.append([op, a, b])
        if len(prog) > MAX_PROGRAM_LEN:
            raise CompileFailure("pattern program too large")
        return len(prog) - 1

    def here() -> int:
        return len(prog)

    def code(node: Node, in_quant: bool) -> None:
        k = node.kind
        if k in ("literal", "dot", "class"):
            emit(OP_CLASS, _class_mask(node, fault))
        elif k == "empty":
            pass
        elif k == "fail":
            emit(OP_FAIL)
        elif k == "anchor-start":
            emit(OP_BOL)
        elif k == "anchor-end":
            emit(OP_EOL)
        elif k == "group":
            code(node.child, in_quant)
        elif k == "concat":
            for part in node.parts:
                code(part, in_quant)
        elif k == "alt":
            if fault == "ALT_FIRST_ONLY" and in_quant:
                code(node.options[0], in_quant)
                return
            jumps = []
            for opt in node.options[:-1]:
                split_at = emit(OP_SPLIT)
                code(opt, in_quant)
                jumps.append(emit(OP_JMP))
                prog[split_at][1] = split_at + 1
                prog[split_at][2] = here()
            code(node.options[-1], in_quant)
            for j in jumps:
                prog[j][1] = here()
        elif k == "star":
            head = emit(OP_SPLIT)
            body = emit(OP_PUSH)
            code(node.child, True)
            if fault == "STAR_DROP_LAST":
                emit(OP_LOOP_DROP, body, 0)
            elif fault == "EMPTY_LOOP_SKIP":
                emit(OP_LOOP_PURGE, head, 0)
            else:
                emit(OP_LOOP, head, 0)
            end = here()
            prog[head][1] = head + 1
            prog[head][2] = end
            prog[end - 1][2] = end
        elif k == "plus":
            body = emit(OP_PUSH)
            code(node.child, True)
            check = emit(OP_LOOP, 0, 0)
            again = emit(OP_SPLIT, body, 0)
            end = here()
            prog[check][1] = again
            prog[check][2] = end
            prog[again][2] = end
        elif k == "optional":
            split_at = emit(OP_SPLIT)
            code(node.child, True)
            prog[split_at][1] = split_at + 1
            prog[split_at][2] = here()
        else:
            raise CompileFailure(f"cannot compile {k} node")

    code(ast, False)
    emit(OP_MATCH)
    return [tuple(ins) for ins in prog]


class _OutOfSteps(Exception):
    pass


def _run(
    prog: list[tuple[int, int, int]],
    data: bytes,
    start: int,
    require_end: bool,
    budget: int,
    trace: set[int] | None,
    edge_ids: dict[int, int] | None,
) -> tuple[int | None, int]:
    """One anchored attempt.  Returns (end position or None, budget left)."""
    n = len(data)
    pc = 0
    pos = start
    marks: tuple | None = None  # cons cells: (entry pos, stack depth, parent)
    stack: list[tuple[int, int, tuple | None]] = []
    prev = -1
    while True:
        budget -= 1
        if budget < 0:
            raise _OutOfSteps
        if trace is not None and prev >= 0:
            key = (prev << 16) | pc
            got = edge_ids.get(key)
            if got is None:
                got = zlib.crc32(struct.pack(">II", prev, pc)) & 0xFFFF
                edge_ids[key] = got
            trace.add(got)
        prev = pc
        op, a, b = prog[pc]
        if op == OP_CLASS:
            if pos < n and (a >> data[pos]) & 1:
                pos += 1
                pc += 1
                continue
        elif op == OP_SPLIT:
            stack.append((b, pos, marks))
            pc = a
            continue
        elif op == OP_JMP:
            pc = a
            continue
        elif op == OP_MATCH:
            if not require_end or pos == n:
                return pos, budget
        elif op == OP_BOL:
            if pos == 0:
                pc += 1
                continue
        elif op == OP_EOL:
            if pos == n:
                pc += 1
                continue
        elif op == OP_PUSH:
            marks = (pos, len(stack), marks)
            pc += 1
            continue
        elif op == OP_LOOP:
            entry, _, marks = marks
            pc = a if pos > entry else b
            continue
        elif op == OP_LOOP_DROP:
            entry, _, marks = marks
            if pos > entry:
                # Delay the exit point by one iteration: the loop hands the
                # continuation k-1 iterations where the correct engine hands k.
                stack.append((b, entry, marks))
                pc = a
            else:
                pc = b
            continue
        elif op == OP_LOOP_PURGE:
            entry, depth, marks = marks
            if pos > entry:
                pc = a
            else:
                del stack[depth:]  # overly eager: drop the body's alternatives
                pc = b
            continue
        # OP_FAIL and failed checks fall through to backtracking.
        if not stack:
            return None, budget
        pc, pos, marks = stack.pop()


class BuiltinEngine:
    """Reference backtracking engine (optionally with one injected fault)."""

    def __init__(self, fault: str | None = None, step_budget: int = DEFAULT_STEP_BUDGET):
        if fault is not None and fault not in FAULT_IDS:
            raise ValueError(f"unknown fault id: {fault}")
        self.fault = fault
        self.step_budget = step_budget
        self.steps_used = 0
        self._cache: dict[bytes, list[tuple[int, int, int]] | str] = {}
        self._edge_ids: dict[int, int] = {}

    @property
    def label(self) -> str:
        return "builtin" if self.fault is None else f"builtin+fault:{self.fault}"

    def _program(self, pattern: str | bytes) -> list[tuple[int, int, int]] | str:
        key = pattern.encode("utf-8") if isinstance(pattern, str) else bytes(pattern)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        try:
            prog: list[tuple[int, int, int]] | str = compile_program(P.parse(key), self.fault)
        except (ParseError, CompileFailure) as e:
            prog = str(e)
        if len(self._cache) > 2048:
            self._cache.clear()
        self._cache[key] = prog
        return prog

    def search(self, pattern: str | bytes, data: bytes) -> EngineVerdict:
        return self._search_impl(pattern, data, trace=None)

    def search_with_coverage(
        self, pattern: str | bytes, data: bytes
    ) -> tuple[EngineVerdict, set[int]]:
        trace: set[int] = set()
        verdict = self._search_impl(pattern, data, trace=trace)
        return verdict, trace

    def _search_impl(
        self, pattern: str | bytes, data: bytes, trace: set[int] | None
    ) -> EngineVerdict:
        prog = self._program(pattern)
        if isinstance(prog, str):
            return EngineVerdict.compile_error(prog)
        budget = self.step_budget
        start_budget = budget
        edge_ids = self._edge_ids
        try:
            span = None
            for start in range(len(data) + 1):
                end, budget = _run(prog, data, start, False, budget, trace, edge_ids)
                if end is not None:
                    span = (start, end)
                    break
            if span is None:
                full = False
            elif span == (0, len(data)):
                full = True
            else:
                end, budget = _run(prog, data, 0, True, budget, trace, edge_ids)
                full = end is not None
        except _OutOfSteps:
            self.steps_used += start_budget
            return EngineVerdict.timeout()
        self.steps_used += start_budget - budget
        return EngineVerdict.ok(
            MatchResult(matched=span is not None, span=span, fullmatch=full)
        )


def inject_fault(fault: str, step_budget: int = DEFAULT_STEP_BUDGET) -> BuiltinEngine:
    """Built-in engine variant with one deliberately planted bug."""
    return BuiltinEngine(fault=fault, step_budget=step_budget)
