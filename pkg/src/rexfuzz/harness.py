"""Subprocess harness for external engine adapters.

Adapters speak a line-delimited JSON protocol on stdio.  Requests look like

    {"id": 7, "cmd": "search", "pattern_b64": "YQ==", "input_b64": "YWI="}

and responses are either

    {"id": 7, "status": "ok", "matched": true, "span": [0, 1], "fullmatch": false}
    {"id": 7, "status": "compile_error", "message": "..."}

Anything else - a malformed line, a mismatched id, a closed pipe, or a dead
process - becomes a Crash verdict carrying exit status, a captured error
stream (scanned for sanitizer markers), and the request that triggered it.
The child is restarted lazily after a crash so a campaign can keep going.
"""
from __future__ import annotations

import base64
import json
import os
import queue
import shlex
import subprocess
import threading
import time

from .engines import CrashInfo, EngineVerdict, MatchResult

COV_ENV = "RETEST_COV_FILE"
DEFAULT_REQUEST_TIMEOUT = 2.0

_STDERR_CAP = 65536
_SANITIZER_MARKERS = ("Sanitizer", "ERROR:")


class SpawnError(RuntimeError):
    """The adapter process could not be started."""


class ExternalEngine:
    """Engine handle talking to an adapter subprocess."""

    def __init__(
        self,
        command: list[str],
        env: dict[str, str] | None = None,
        timeout: float = DEFAULT_REQUEST_TIMEOUT,
        cov_file: str | None = None,
    ):
        self.command = list(command)
        self.extra_env = dict(env or {})
        self.timeout = timeout
        self.cov_file = cov_file
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue | None = None
        self._stderr_chunks: list[bytes] = []
        self._next_id = 0

    @property
    def label(self) -> str:
        return "cmd:" + " ".join(shlex.quote(c) for c in self.command)

    def _start(self) -> None:
        env = dict(os.environ)
        env.update(self.extra_env)
        if self.cov_file:
            env[COV_ENV] = self.cov_file
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                env=env,
            )
        except OSError as e:
            self._proc = None
            raise SpawnError(f"cannot start {self.command[0]}: {e}") from e
        self._lines = queue.Queue()
        self._stderr_chunks = []
        threading.Thread(
            target=self._pump_stdout, args=(self._proc, self._lines), daemon=True
        ).start()
        threading.Thread(
            target=self._pump_stderr, args=(self._proc, self._stderr_chunks), daemon=True
        ).start()

    @staticmethod
    def _pump_stdout(proc: subprocess.Popen, out: queue.Queue) -> None:
        for line in proc.stdout:
            out.put(line)
        out.put(None)

    @staticmethod
    def _pump_stderr(proc: subprocess.Popen, chunks: list[bytes]) -> None:
        total = 0
        while True:
            data = proc.stderr.read(4096)
            if not data:
                return
            if total < _STDERR_CAP:
                chunks.append(data)
                total += len(data)

    def _stderr_text(self) -> str:
        return b"".join(self._stderr_chunks).decode("utf-8", "replace")

    def _teardown(self) -> None:
        proc = self._proc
        self._proc = None
        self._lines = None
        if proc is None:
            return
        if proc.poll() is None:
            proc.kill()
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass
        for stream in (proc.stdin, proc.stdout, proc.stderr):
            if stream:
                try:
                    stream.close()
                except OSError:
                    pass

    def _crash(self, request: dict) -> EngineVerdict:
        proc = self._proc
        rc = None
        if proc is not None:
            if proc.poll() is None:
                proc.kill()
            try:
                rc = proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                rc = None
        time.sleep(0.05)  # give the stderr pump a beat to drain
        text = self._stderr_text()
        report = text if any(m in text for m in _SANITIZER_MARKERS) else None
        self._teardown()
        exit_code = rc if rc is not None and rc >= 0 else None
        signal = -rc if rc is not None and rc < 0 else None
        return EngineVerdict.crashed(
            CrashInfo(
                exit_code=exit_code,
                signal=signal,
                sanitizer_report=report,
                last_request=request,
            )
        )

    def search(self, pattern: str | bytes, data: bytes) -> EngineVerdict:
        if isinstance(pattern, str):
            pattern = pattern.encode("utf-8")
        self._next_id += 1
        request = {
            "id": self._next_id,
            "cmd": "search",
            "pattern_b64": base64.b64encode(pattern).decode("ascii"),
            "input_b64": base64.b64encode(data).decode("ascii"),
        }
        if self._proc is None or self._proc.poll() is not None:
            self._teardown()
            self._start()
        try:
            self._proc.stdin.write((json.dumps(request) + "\n").encode("ascii"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            return self._crash(request)
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._teardown()
            return EngineVerdict.timeout()
        if line is None:  # stdout closed: the process died
            return self._crash(request)
        try:
            obj = json.loads(line)
            if obj["id"] != request["id"]:
                raise ValueError("response id mismatch")
            status = obj["status"]
            if status == "ok":
                span = obj["span"]
                result = MatchResult(
                    matched=bool(obj["matched"]),
                    span=tuple(span) if span is not None else None,
                    fullmatch=bool(obj["fullmatch"]),
                )
                return EngineVerdict.ok(result)
            if status == "compile_error":
                return EngineVerdict.compile_error(str(obj.get("message", "")))
            raise ValueError(f"unknown status {status!r}")
        except (ValueError, KeyError, TypeError):
            return self._crash(request)

    def close(self) -> None:
        proc = self._proc
        if proc is not None and proc.poll() is None and proc.stdin:
            try:
                proc.stdin.close()  # polite EOF before the kill in teardown
            except OSError:
                pass
            try:
                proc.wait(timeout=0.5)
            except subprocess.TimeoutExpired:
                pass
        self._teardown()

    def __enter__(self) -> "ExternalEngine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def spawn_external(
    command: list[str],
    env: dict[str, str] | None = None,
    timeout: float = DEFAULT_REQUEST_TIMEOUT,
    cov_file: str | None = None,
) -> ExternalEngine:
    """Create an external engine handle.  The process itself starts lazily on
    the first request; a SpawnError surfaces there if it cannot start."""
    return ExternalEngine(command, env=env, timeout=timeout, cov_file=cov_file)
