"""Coverage-guided fuzzing campaigns over a regex engine.

The loop mutates parsed pattern trees rather than raw bytes: a mutation
picks a node and swaps in a subtree harvested from earlier coverage-earning
patterns, keyed by node kind and the kinds of its nearest ancestors.  Each
mutant is executed on generated member/near-miss inputs while the
metamorphic oracle checks every applicable rewrite; mutants that light up
previously unseen engine edges are kept as seeds and mined for subtrees.

Coverage signals:
  - the built-in engine reports hashed bytecode edge pairs directly;
  - external adapters maintain a 65536-slot execution counter file (see
    harness.COV_ENV) which is read after each search and bucketed by count
    class, so "ran 3 times" vs "ran 100 times" count as different edges.

Two ablation modes exist alongside the full `retest` mode: `type-only`
ignores ancestor context when sampling replacement subtrees, and
`byte-naive` mutates the serialized pattern text, discarding the grammar.
"""
from __future__ import annotations

import csv
import dataclasses
import multiprocessing
import os
import random
import shlex
import tempfile
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from . import pattern as P
from .engines import DEFAULT_STEP_BUDGET, FAULT_IDS, BuiltinEngine, inject_fault
from .harness import DEFAULT_REQUEST_TIMEOUT, spawn_external
from .nfa import GenLimits, NonKleeneInput
from .relations import CrashRecord, mt_check_pattern
from .reports import BugReport, dedup, from_crash, from_finding

COV_SLOTS = 65536

POOL_BUCKET_SIZE = 256
POOL_MAX_SUBTREE_NODES = 12
SEED_ENERGY = 8
SEED_ENERGY_FLOOR = 1


def count_class(n: int) -> int:
    """Bucket an execution count: 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+."""
    if n <= 0:
        raise ValueError("count must be positive")
    if n <= 3:
        return n - 1
    if n < 8:
        return 3
    if n < 16:
        return 4
    if n < 32:
        return 5
    if n < 128:
        return 6
    return 7


def probe_external(path: str) -> set[int]:
    """Read an adapter's counter file into bucketed edge ids (slot*8+class)."""
    try:
        with open(path, "rb") as f:
            counts = f.read()
    except OSError:
        return set()
    if len(counts) != COV_SLOTS:
        return set()
    return {i * 8 + count_class(c) for i, c in enumerate(counts) if c}


class CoverageMap:
    """Monotone set of observed edge ids."""

    def __init__(self):
        self.edges: set[int] = set()

    def update(self, observed: set[int]) -> int:
        """Fold in newly observed edges; returns how many were new."""
        fresh = observed - self.edges
        if fresh:
            self.edges |= fresh
        return len(fresh)

    @property
    def size(self) -> int:
        return len(self.edges)


class SubtreePool:
    """Subtrees harvested from coverage-earning patterns, bucketed by
    (node kind, ancestor-kind context).  Buckets are bounded FIFOs, so stale
    material ages out as the campaign moves on."""

    def __init__(self, bucket_size: int = POOL_BUCKET_SIZE):
        self.bucket_size = bucket_size
        self.buckets: dict[tuple[str, tuple[str, ...]], deque] = {}

    def insert(self, node: P.Node, context: tuple[str, ...], force: bool = False) -> bool:
        if not force and P.node_count(node) > POOL_MAX_SUBTREE_NODES:
            return False
        key = (node.kind, context)
        bucket = self.buckets.get(key)
        if bucket is None:
            bucket = self.buckets[key] = deque(maxlen=self.bucket_size)
        bucket.append(node)
        return True

    def insert_all(self, root: P.Node, force: bool = False) -> None:
        for path, node in P.walk(root):
            self.insert(node, P.extract_context(root, path), force=force)

    def sample(self, rng: random.Random, kind: str, context: tuple[str, ...] | None):
        """Draw a subtree of the given kind: the exact-context bucket first,
        then any bucket of that kind, then nothing."""
        if context is not None:
            bucket = self.buckets.get((kind, context))
            if bucket:
                return bucket[rng.randrange(len(bucket))]
        candidates = [b for (k, _), b in self.buckets.items() if k == kind and b]
        if not candidates:
            return None
        total = sum(len(b) for b in candidates)
        i = rng.randrange(total)
        for b in candidates:
            if i < len(b):
                return b[i]
            i -= len(b)
        raise AssertionError("unreachable")

    def __len__(self) -> int:
        return sum(len(b) for b in self.buckets.values())


class SeedQueue:
    """Energy-weighted seed scheduler.  New seeds start hot and cool by one
    per selection down to a floor, so fresh coverage gets immediate attention
    without starving the rest of the corpus."""

    def __init__(self, energy: int = SEED_ENERGY, floor: int = SEED_ENERGY_FLOOR):
        self.energy = energy
        self.floor = floor
        self.entries: list[list] = []  # [ast, energy]

    def add(self, ast: P.Node) -> None:
        self.entries.append([ast, self.energy])

    def select(self, rng: random.Random) -> P.Node:
        if not self.entries:
            raise IndexError("seed queue is empty")
        total = sum(e for _, e in self.entries)
        pick = rng.randrange(total)
        for entry in self.entries:
            if pick < entry[1]:
                entry[1] = max(self.floor, entry[1] - 1)
                return entry[0]
            pick -= entry[1]
        raise AssertionError("unreachable")

    def __len__(self) -> int:
        return len(self.entries)


# --- mutation ---------------------------------------------------------------


def mutate_grammar(
    ast: P.Node, pool: SubtreePool, rng: random.Random, context_aware: bool = True
) -> P.Node:
    """Tree-level mutation: mostly subtree swaps of like kind, with
    occasional wrap-in-alternation, wrap-in-star, and deletion moves."""
    paths = [path for path, _ in P.walk(ast)]
    path = paths[rng.randrange(len(paths))]
    node = P.node_at(ast, path)
    roll = rng.random()
    if roll < 0.70:
        ctx = P.extract_context(ast, path) if context_aware else None
        repl = pool.sample(rng, node.kind, ctx)
        if repl is None:
            repl = P.random_pattern(rng, 6)
        return P.replace(ast, path, repl)
    if roll < 0.80:
        other = pool.sample(rng, node.kind, None) or P.random_pattern(rng, 4)
        return P.replace(ast, path, P.group(P.alternation([node, other])))
    if roll < 0.90:
        return P.replace(ast, path, P.star(node))
    return P.replace(ast, path, P.Empty())


def mutate_bytes(src: bytes, rng: random.Random) -> bytes:
    """Grammar-blind baseline: flip, insert, delete, or duplicate bytes of
    the serialized pattern.  Most outputs fail to parse; that is the point."""
    if not src:
        return bytes([rng.randrange(256)])
    op = rng.randrange(4)
    i = rng.randrange(len(src))
    if op == 0:
        return src[:i] + bytes([rng.randrange(256)]) + src[i + 1 :]
    if op == 1:
        return src[:i] + bytes([rng.randrange(256)]) + src[i:]
    if op == 2:
        return src[:i] + src[i + 1 :]
    j = min(len(src), i + 1 + rng.randrange(4))
    return src[:i] + src[i:j] + src[i:]


# --- campaign configuration and results ------------------------------------

MODES = ("retest", "type-only", "byte-naive")


@dataclass(frozen=True)
class FuzzConfig:
    iterations: int = 1000
    mode: str = "retest"
    seed: int = 0
    limits: GenLimits = field(default_factory=GenLimits)
    relations: tuple[str, ...] | None = None  # None means all sixteen
    relations_enabled: bool = True
    max_sites: int = 2
    max_pattern_nodes: int = 80
    stop_after_bugs: int | None = None
    snapshot_every: int = 64
    max_seed_patterns: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class CampaignStats:
    iterations: int = 0
    executions: int = 0
    parse_failures: int = 0
    skipped: int = 0
    mt_checks: int = 0
    mt_failures: int = 0
    dialect_gaps: int = 0
    timeouts: int = 0
    crashes: int = 0
    new_coverage_events: int = 0


@dataclass
class CampaignResult:
    stats: CampaignStats
    reports: list[BugReport]
    coverage: set[int]
    timeline: list[tuple[int, int, int]]  # (iteration, elapsed_ms, edges)

    @property
    def unique_reports(self) -> list[BugReport]:
        return dedup(self.reports)


class _CovProxy:
    """Engine wrapper that accumulates coverage across searches, reading the
    counter file for external engines and the edge trace for the built-in."""

    def __init__(self, engine):
        self.engine = engine
        self.edges: set[int] = set()
        self.executions = 0
        self._builtin = isinstance(engine, BuiltinEngine)
        self._cov_file = getattr(engine, "cov_file", None)

    def search(self, pattern, data):
        self.executions += 1
        if self._builtin:
            verdict, edges = self.engine.search_with_coverage(pattern, data)
            self.edges |= edges
        else:
            verdict = self.engine.search(pattern, data)
            if self._cov_file:
                self.edges |= probe_external(self._cov_file)
        return verdict


def _arbitrary_inputs(rng: random.Random) -> list[bytes]:
    out = [b""]
    for _ in range(3):
        out.append(bytes(rng.randrange(256) for _ in range(rng.randrange(1, 9))))
    return out


def _safe_inputs(ast: P.Node, limits: GenLimits, rng: random.Random) -> list[bytes]:
    """Inputs for a mutant.  Anchored or oversized patterns fall back to a
    few arbitrary strings so they still contribute coverage."""
    from .relations import generate_inputs

    try:
        return generate_inputs(ast, limits, rng)
    except (NonKleeneInput, P.PatternTooLarge):
        return _arbitrary_inputs(rng)


def fuzz_loop(engine, seeds: Sequence[P.Node], config: FuzzConfig, on_event=None) -> CampaignResult:
    """Run one single-worker campaign.

    Iteration 0 is a calibration pass: every seed is executed on its own
    generated inputs to establish baseline coverage, fill the subtree pool,
    and populate the scheduler.  With the built-in engine, elapsed time in
    the timeline is a virtual clock derived from executed VM steps, which
    makes same-seed campaigns byte-for-byte reproducible.
    """
    rng = random.Random(config.seed)
    proxy = _CovProxy(engine)
    covmap = CoverageMap()
    pool = SubtreePool()
    queue = SeedQueue()
    stats = CampaignStats()
    reports: list[BugReport] = []
    timeline: list[tuple[int, int, int]] = []
    builtin = isinstance(engine, BuiltinEngine)
    t0 = time.monotonic()

    def elapsed_ms() -> int:
        if builtin:
            return engine.steps_used // 1000
        return int((time.monotonic() - t0) * 1000)

    def tally(verdict) -> None:
        if verdict.status == "timeout":
            stats.timeouts += 1
        elif verdict.status == "compile_error":
            stats.dialect_gaps += 1

    def plain_searches(src: bytes, inputs: list[bytes], iteration: int | None) -> None:
        for data in inputs:
            v = proxy.search(src, data)
            tally(v)
            if v.status == "crash":
                stats.crashes += 1
                reports.append(
                    from_crash(CrashRecord(src, data, v.crash), engine.label, iteration)
                )
                break

    seeds = list(seeds)
    if config.max_seed_patterns is not None:
        seeds = seeds[: config.max_seed_patterns]
    if not seeds:
        boot_rng = random.Random(config.seed ^ 0x5EED)
        seeds = [P.random_pattern(boot_rng, 8) for _ in range(16)]

    for ast in seeds:
        queue.add(ast)
        pool.insert_all(ast, force=True)
        plain_searches(P.serialize(ast).encode(), _safe_inputs(ast, config.limits, rng), None)
    covmap.update(proxy.edges)
    timeline.append((0, elapsed_ms(), covmap.size))

    for it in range(1, config.iterations + 1):
        stats.iterations = it
        seed_ast = queue.select(rng)

        mutated: P.Node | None = None
        if config.mode == "byte-naive":
            raw = mutate_bytes(P.serialize(seed_ast).encode(), rng)
            try:
                mutated = P.parse(raw)
            except P.ParseError:
                stats.parse_failures += 1
                plain_searches(raw, _arbitrary_inputs(rng), it)
        elif config.mode == "type-only":
            mutated = mutate_grammar(seed_ast, pool, rng, context_aware=False)
        else:
            mutated = mutate_grammar(seed_ast, pool, rng, context_aware=True)

        if mutated is not None and P.node_count(mutated) > config.max_pattern_nodes:
            stats.skipped += 1
            mutated = None

        if mutated is not None:
            inputs = _safe_inputs(mutated, config.limits, rng)
            if config.relations_enabled and P.is_kleene_fragment(mutated):
                res = mt_check_pattern(
                    proxy,
                    mutated,
                    inputs=inputs,
                    relations=config.relations,
                    max_sites=config.max_sites,
                    on_event=on_event,
                )
                stats.mt_checks += res.stats.checks
                stats.mt_failures += res.stats.failures
                stats.dialect_gaps += res.stats.dialect_gaps
                stats.timeouts += res.stats.timeouts
                stats.crashes += len(res.crashes)
                for f in res.findings:
                    reports.append(from_finding(f, engine.label, iteration=it))
                for c in res.crashes:
                    reports.append(from_crash(c, engine.label, iteration=it))
            else:
                plain_searches(P.serialize(mutated).encode(), inputs, it)

        fresh = covmap.update(proxy.edges)
        if fresh:
            stats.new_coverage_events += 1
            if mutated is not None:
                queue.add(mutated)
                pool.insert_all(mutated)

        if it % config.snapshot_every == 0:
            timeline.append((it, elapsed_ms(), covmap.size))
        if config.stop_after_bugs is not None and len(dedup(reports)) >= config.stop_after_bugs:
            break

    if timeline[-1][0] != stats.iterations:
        timeline.append((stats.iterations, elapsed_ms(), covmap.size))
    stats.executions = proxy.executions
    return CampaignResult(stats=stats, reports=reports, coverage=covmap.edges, timeline=timeline)


# --- engine specs and parallel campaigns ------------------------------------


@dataclass(frozen=True)
class EngineSpec:
    """Picklable recipe for constructing an engine inside a worker."""

    kind: str  # "builtin" | "cmd"
    fault: str | None = None
    command: tuple[str, ...] = ()
    step_budget: int = DEFAULT_STEP_BUDGET
    timeout: float = DEFAULT_REQUEST_TIMEOUT


def parse_engine_spec(text: str) -> EngineSpec:
    """Parse an engine argument: "builtin", "builtin+fault:ID", or
    "cmd:<shell words>"."""
    if text == "builtin":
        return EngineSpec(kind="builtin")
    if text.startswith("builtin+fault:"):
        fault = text[len("builtin+fault:") :]
        if fault not in FAULT_IDS:
            raise ValueError(f"unknown fault {fault!r}; expected one of {', '.join(FAULT_IDS)}")
        return EngineSpec(kind="builtin", fault=fault)
    if text.startswith("cmd:"):
        words = shlex.split(text[len("cmd:") :])
        if not words:
            raise ValueError("cmd: engine spec needs a command line")
        return EngineSpec(kind="cmd", command=tuple(words))
    raise ValueError(f"unrecognized engine spec {text!r}")


def make_engine(spec: EngineSpec, cov_file: str | None = None):
    if spec.kind == "builtin":
        if spec.fault:
            return inject_fault(spec.fault, step_budget=spec.step_budget)
        return BuiltinEngine(step_budget=spec.step_budget)
    if spec.kind == "cmd":
        if cov_file is None:
            fd, cov_file = tempfile.mkstemp(prefix="rexfuzz-cov-")
            os.close(fd)
        return spawn_external(list(spec.command), timeout=spec.timeout, cov_file=cov_file)
    raise ValueError(f"unknown engine kind {spec.kind!r}")


def seed_lines(raw: bytes) -> list[bytes]:
    return [line.strip() for line in raw.splitlines() if line.strip()]


def parse_seed_corpus(raw: bytes) -> tuple[list[P.Node], int]:
    """Parse a seed corpus: one pattern per line.  Returns the parsed trees
    plus the count of lines outside the supported dialect."""
    asts: list[P.Node] = []
    skipped = 0
    for line in seed_lines(raw):
        try:
            asts.append(P.parse(line))
        except P.ParseError:
            skipped += 1
    return asts, skipped


def load_seeds(path: str) -> tuple[list[P.Node], int]:
    with open(path, "rb") as f:
        return parse_seed_corpus(f.read())


def _run_worker(args) -> CampaignResult:
    spec, seed_srcs, config = args
    engine = make_engine(spec)
    try:
        seeds = []
        for src in seed_srcs:
            try:
                seeds.append(P.parse(src))
            except P.ParseError:
                pass
        return fuzz_loop(engine, seeds, config)
    finally:
        close = getattr(engine, "close", None)
        if close:
            close()


def fuzz_parallel(
    spec: EngineSpec, seed_srcs: Sequence[bytes], config: FuzzConfig, workers: int
) -> list[CampaignResult]:
    """Run independent campaigns in parallel processes, one per worker, with
    per-worker derived rng seeds.  Reports can be merged and deduplicated by
    the caller; coverage timelines stay per-worker."""
    jobs = [
        (spec, list(seed_srcs), dataclasses.replace(config, seed=config.seed + i))
        for i in range(workers)
    ]
    if workers == 1:
        return [_run_worker(jobs[0])]
    with multiprocessing.Pool(workers) as pool:
        return pool.map(_run_worker, jobs)


# --- coverage CSV -----------------------------------------------------------

COV_CSV_HEADER = ("iteration", "elapsed_ms", "edges")


def write_coverage_csv(path: str, timeline: Sequence[tuple[int, int, int]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(COV_CSV_HEADER)
        for row in timeline:
            w.writerow(row)


def read_coverage_csv(path: str) -> list[tuple[int, int, int]]:
    out: list[tuple[int, int, int]] = []
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is not None and tuple(header) != COV_CSV_HEADER:
            raise ValueError(f"unexpected coverage CSV header {header!r}")
        for row in reader:
            out.append((int(row[0]), int(row[1]), int(row[2])))
    return out
