"""Reference adapter: exposes the built-in engine over the stdio protocol.

Run as ``python -m rexfuzz.adapter``.  Reads one JSON request per line,
answers one JSON response per line, flushing after each.  When the
RETEST_COV_FILE environment variable names a file, a 65536-slot saturating
byte counter of executed bytecode edges is kept up to date there; the file is
rewritten before each response is emitted so the parent can read it
afterwards without racing.

Crash-drill flags (used to exercise the harness, not needed in normal use):

  --crash-on-pattern TEXT   abort() when this exact pattern arrives
  --sanitizer-banner        write a sanitizer-style report to stderr first
"""
from __future__ import annotations

import argparse
import base64
import json
import os
import sys

from .engines import DEFAULT_STEP_BUDGET, BuiltinEngine
from .harness import COV_ENV

COV_SLOTS = 65536

_BANNER = (
    "==%d==ERROR: AddressSanitizer: heap-buffer-overflow on address "
    "0x602000000011 at pc 0x0000004008d5\n"
)


class _CovFile:
    """Saturating per-edge execution counters, persisted between requests."""

    def __init__(self, path: str):
        self.path = path
        self.counts = bytearray(COV_SLOTS)
        try:
            with open(path, "rb") as f:
                old = f.read()
            if len(old) == COV_SLOTS:
                self.counts[:] = old
        except OSError:
            pass
        self._write()

    def record(self, edges) -> None:
        for e in edges:
            if self.counts[e] < 255:
                self.counts[e] += 1
        self._write()

    def _write(self) -> None:
        with open(self.path, "wb") as f:
            f.write(self.counts)


def _respond(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="rexfuzz-adapter", description=__doc__)
    ap.add_argument("--step-budget", type=int, default=DEFAULT_STEP_BUDGET)
    ap.add_argument("--crash-on-pattern", default=None)
    ap.add_argument("--sanitizer-banner", action="store_true")
    args = ap.parse_args(argv)

    engine = BuiltinEngine(step_budget=args.step_budget)
    magic = args.crash_on_pattern.encode("utf-8") if args.crash_on_pattern else None
    cov = _CovFile(os.environ[COV_ENV]) if os.environ.get(COV_ENV) else None

    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            rid = req["id"]
            if req["cmd"] != "search":
                raise ValueError(f"unknown cmd {req['cmd']!r}")
            pattern = base64.b64decode(req["pattern_b64"])
            data = base64.b64decode(req["input_b64"])
        except (ValueError, KeyError, TypeError) as e:
            sys.stderr.write(f"adapter: bad request: {e}\n")
            return 2

        if magic is not None and pattern == magic:
            if args.sanitizer_banner:
                sys.stderr.write(_BANNER % os.getpid())
                sys.stderr.flush()
            os.abort()

        if cov is not None:
            verdict, edges = engine.search_with_coverage(pattern, data)
            cov.record(edges)
        else:
            verdict = engine.search(pattern, data)

        if verdict.status == "ok":
            r = verdict.result
            _respond(
                {
                    "id": rid,
                    "status": "ok",
                    "matched": r.matched,
                    "span": list(r.span) if r.span is not None else None,
                    "fullmatch": r.fullmatch,
                }
            )
        elif verdict.status == "compile_error":
            _respond({"id": rid, "status": "compile_error", "message": verdict.message})
        else:
            # The step budget tripped.  The wire protocol has no timeout
            # status: hangs are the harness's department, so report the
            # pattern as uncompilable rather than stalling.
            _respond({"id": rid, "status": "compile_error", "message": "step budget exhausted"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
