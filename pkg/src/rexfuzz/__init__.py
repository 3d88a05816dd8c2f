"""Grammar-aware fuzzing and metamorphic testing for regex engines.

The package ships four cooperating layers:

  pattern    byte-oriented regex dialect: AST, parser, serializer, mutators
  nfa        Thompson construction and edge-covering string generation
  engines    a backtracking reference engine, seedable defect builds, and a
  harness    subprocess protocol for testing external engines in isolation
  relations  sixteen Kleene-algebra rewrites used as a single-engine oracle
  fuzzer     coverage-guided campaign loop, seed scheduling, subtree pools
  reports    JSONL bug reports, deduplication, test-case shrinking
  cli        `rexfuzz` command: fuzz / mt-check / gen-strings / minimize
"""
import sys as _sys

# Trees are parser-capped at depth 200, but several frames are spent per
# level when serializing or rebuilding; the default 1000-frame limit is too
# tight for worst-case (yet legal) inputs.
if _sys.getrecursionlimit() < 5000:
    _sys.setrecursionlimit(5000)

from .engines import (
    FAULT_IDS,
    BuiltinEngine,
    CrashInfo,
    EngineVerdict,
    MatchResult,
    inject_fault,
)
from .fuzzer import (
    CampaignResult,
    EngineSpec,
    FuzzConfig,
    fuzz_loop,
    fuzz_parallel,
    load_seeds,
    make_engine,
    parse_engine_spec,
)
from .harness import ExternalEngine, SpawnError, spawn_external
from .nfa import (
    GenLimits,
    NonKleeneInput,
    compile_nfa,
    negative_strings,
    positive_strings,
)
from .pattern import ParseError, PatternTooLarge, parse, random_pattern, serialize
from .relations import (
    RELATION_IDS,
    RELATIONS,
    applicable_sites,
    build_variant,
    mt_check_pattern,
    run_mt,
)
from .reports import (
    BugReport,
    NonReproducible,
    dedup,
    minimize,
    read_reports,
    write_reports,
)

__version__ = "0.1.0"

__all__ = [
    "BugReport",
    "BuiltinEngine",
    "CampaignResult",
    "CrashInfo",
    "EngineSpec",
    "EngineVerdict",
    "ExternalEngine",
    "FAULT_IDS",
    "FuzzConfig",
    "GenLimits",
    "MatchResult",
    "NonKleeneInput",
    "NonReproducible",
    "ParseError",
    "PatternTooLarge",
    "RELATIONS",
    "RELATION_IDS",
    "SpawnError",
    "applicable_sites",
    "build_variant",
    "compile_nfa",
    "dedup",
    "fuzz_loop",
    "fuzz_parallel",
    "inject_fault",
    "load_seeds",
    "make_engine",
    "minimize",
    "mt_check_pattern",
    "negative_strings",
    "parse",
    "parse_engine_spec",
    "positive_strings",
    "random_pattern",
    "read_reports",
    "run_mt",
    "serialize",
    "spawn_external",
    "write_reports",
]
