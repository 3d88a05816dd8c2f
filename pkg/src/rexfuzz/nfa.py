"""Thompson NFA construction and coverage-driven test-string generation.

Patterns compile to an epsilon-NFA with one start and one accept state.
Positive strings are built by routing a path through every reachable edge
(loop-back edges included, which yields multi-iteration strings for stars);
negative strings perturb positives and are filtered back through the NFA.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from . import pattern as P
from .pattern import Node, PatternTooLarge

EPS = -1  # edge label marker


class NonKleeneInput(ValueError):
    """Raised when an anchored pattern reaches the NFA compiler."""


@dataclass(frozen=True)
class GenLimits:
    star_unroll: int = 2
    max_string_len: int = 64
    max_strings: int = 64


@dataclass(frozen=True)
class Nfa:
    """Edge list (src, lo, hi, dst); lo == EPS marks an epsilon edge."""

    num_states: int
    edges: tuple[tuple[int, int, int, int], ...]
    start: int
    accept: int


_DOT_RANGES = ((0x00, 0x09), (0x0B, 0xFF))  # any byte but newline


class _Builder:
    def __init__(self) -> None:
        self.n = 0
        self.edges: list[tuple[int, int, int, int]] = []

    def state(self) -> int:
        self.n += 1
        return self.n - 1

    def eps(self, a: int, b: int) -> None:
        self.edges.append((a, EPS, EPS, b))

    def byte_range(self, a: int, lo: int, hi: int, b: int) -> None:
        self.edges.append((a, lo, hi, b))

    def frag(self, node: Node) -> tuple[int, int]:
        k = node.kind
        if k in ("literal", "dot", "class", "empty", "fail"):
            s, t = self.state(), self.state()
            if k == "literal":
                self.byte_range(s, node.byte, node.byte, t)
            elif k == "dot":
                for lo, hi in _DOT_RANGES:
                    self.byte_range(s, lo, hi, t)
            elif k == "class":
                for lo, hi in P.char_class_ranges(node.items, node.negated):
                    self.byte_range(s, lo, hi, t)
            elif k == "empty":
                self.eps(s, t)
            # fail: no edge at all
            return s, t
        if k == "group":
            return self.frag(node.child)
        if k == "concat":
            first = prev = None
            for part in node.parts:
                s, t = self.frag(part)
                if first is None:
                    first = s
                else:
                    self.eps(prev, s)
                prev = t
            return first, prev
        if k == "alt":
            s, t = self.state(), self.state()
            for opt in node.options:
                a, b = self.frag(opt)
                self.eps(s, a)
                self.eps(b, t)
            return s, t
        if k == "star":
            s, t = self.state(), self.state()
            a, b = self.frag(node.child)
            self.eps(s, a)
            self.eps(s, t)
            self.eps(b, a)  # loop back
            self.eps(b, t)
            return s, t
        if k == "plus":
            s, t = self.state(), self.state()
            a, b = self.frag(node.child)
            self.eps(s, a)
            self.eps(b, a)
            self.eps(b, t)
            return s, t
        if k == "optional":
            s, t = self.state(), self.state()
            a, b = self.frag(node.child)
            self.eps(s, a)
            self.eps(s, t)
            self.eps(b, t)
            return s, t
        raise NonKleeneInput(f"cannot compile {k} node")


def compile_nfa(ast: Node, max_nodes: int = 4096) -> Nfa:
    """Thompson construction.  State count stays within 2 + 2 * node count
    (counted after repeat expansion)."""
    if not P.is_kleene_fragment(ast):
        raise NonKleeneInput("anchors have no Kleene-algebra reading")
    expanded = P.expand_repeats(ast, max_nodes=max_nodes)
    b = _Builder()
    start, accept = b.frag(expanded)
    return Nfa(num_states=b.n, edges=tuple(b.edges), start=start, accept=accept)


class Matcher:
    """Subset-construction simulator for one Nfa (full-match membership)."""

    def __init__(self, nfa: Nfa):
        self.nfa = nfa
        self._eps_out: list[list[int]] = [[] for _ in range(nfa.num_states)]
        self._byte_out: list[list[tuple[int, int, int, int]]] = [
            [] for _ in range(nfa.num_states)
        ]
        for idx, (src, lo, hi, dst) in enumerate(nfa.edges):
            if lo == EPS:
                self._eps_out[src].append(dst)
            else:
                self._byte_out[src].append((lo, hi, dst, idx))

    def _closure(self, states: set[int]) -> frozenset[int]:
        todo = list(states)
        seen = set(states)
        while todo:
            s = todo.pop()
            for dst in self._eps_out[s]:
                if dst not in seen:
                    seen.add(dst)
                    todo.append(dst)
        return frozenset(seen)

    def _forward_sets(self, data: bytes) -> list[frozenset[int]]:
        sets = [self._closure({self.nfa.start})]
        cur = sets[0]
        for byte in data:
            nxt = {
                dst
                for s in cur
                for lo, hi, dst, _ in self._byte_out[s]
                if lo <= byte <= hi
            }
            cur = self._closure(nxt) if nxt else frozenset()
            sets.append(cur)
        return sets

    def accepts(self, data: bytes) -> bool:
        cur = self._closure({self.nfa.start})
        for byte in data:
            nxt = {
                dst
                for s in cur
                for lo, hi, dst, _ in self._byte_out[s]
                if lo <= byte <= hi
            }
            if not nxt:
                return False
            cur = self._closure(nxt)
        return self.nfa.accept in cur

    def traversed_edges(self, data: bytes) -> set[int]:
        """Indices of every edge lying on some accepting run of `data`.

        Empty when the string is not accepted.
        """
        nfa = self.nfa
        fwd = self._forward_sets(data)
        if nfa.accept not in fwd[-1]:
            return set()
        # Reverse adjacency for the backward pass.
        rev_eps: list[list[int]] = [[] for _ in range(nfa.num_states)]
        for src, lo, _, dst in nfa.edges:
            if lo == EPS:
                rev_eps[dst].append(src)

        def rev_closure(states: set[int]) -> frozenset[int]:
            todo = list(states)
            seen = set(states)
            while todo:
                s = todo.pop()
                for src in rev_eps[s]:
                    if src not in seen:
                        seen.add(src)
                        todo.append(src)
            return frozenset(seen)

        n = len(data)
        back: list[frozenset[int]] = [frozenset()] * (n + 1)
        back[n] = rev_closure({nfa.accept})
        for j in range(n - 1, -1, -1):
            byte = data[j]
            srcs = {
                src
                for src, lo, hi, dst in nfa.edges
                if lo != EPS and lo <= byte <= hi and dst in back[j + 1]
            }
            back[j] = rev_closure(srcs) if srcs else frozenset()
        out: set[int] = set()
        for idx, (src, lo, hi, dst) in enumerate(nfa.edges):
            if lo == EPS:
                if any(src in fwd[j] and dst in back[j] for j in range(n + 1)):
                    out.add(idx)
            else:
                for j in range(n):
                    if lo <= data[j] <= hi and src in fwd[j] and dst in back[j + 1]:
                        out.add(idx)
                        break
        return out


def _half_paths(
    nfa: Nfa, reverse: bool
) -> tuple[list[int | None], list[list[int]]]:
    """0-1 BFS shortest paths (bytes cost 1, epsilons cost 0).

    Returns per-state distance (None if unreachable) and the edge-index path
    from the origin.  Forward origin is start; reverse origin is accept with
    all edges flipped, so paths read state -> accept in forward order.
    """
    dist: list[int | None] = [None] * nfa.num_states
    pred: list[tuple[int, int] | None] = [None] * nfa.num_states  # (edge idx, prev state)
    origin = nfa.accept if reverse else nfa.start
    adj: list[list[tuple[int, int, int]]] = [[] for _ in range(nfa.num_states)]
    for idx, (src, lo, _, dst) in enumerate(nfa.edges):
        cost = 0 if lo == EPS else 1
        if reverse:
            adj[dst].append((src, cost, idx))
        else:
            adj[src].append((dst, cost, idx))
    dist[origin] = 0
    dq: deque[int] = deque([origin])
    while dq:
        u = dq.popleft()
        du = dist[u]
        for v, cost, idx in adj[u]:
            nd = du + cost
            if dist[v] is None or nd < dist[v]:
                dist[v] = nd
                pred[v] = (idx, u)
                if cost == 0:
                    dq.appendleft(v)
                else:
                    dq.append(v)
    paths: list[list[int]] = [[] for _ in range(nfa.num_states)]
    for s in range(nfa.num_states):
        if dist[s] is None:
            continue
        chain: list[int] = []
        cur = s
        while pred[cur] is not None:
            idx, prev = pred[cur]
            chain.append(idx)
            cur = prev
        if not reverse:
            chain.reverse()
        paths[s] = chain
    return dist, paths


def _path_bytes(nfa: Nfa, edge_idxs: list[int], override: dict[int, int] | None = None) -> bytes:
    out = bytearray()
    for idx in edge_idxs:
        _, lo, _, _ = nfa.edges[idx]
        if lo != EPS:
            if override and idx in override:
                out.append(override[idx])
            else:
                out.append(lo)
    return bytes(out)


def positive_strings(nfa: Nfa, limits: GenLimits = GenLimits()) -> list[bytes]:
    """Accepted strings that together traverse every reachable edge.

    Deterministic.  Loop-back edges are targeted when star_unroll >= 2, which
    produces two-iteration strings for starred subexpressions.  Range labels
    contribute their low byte; when the budget allows, an extra string per
    proper range exercises the high boundary byte.
    """
    fdist, fpaths = _half_paths(nfa, reverse=False)
    bdist, bpaths = _half_paths(nfa, reverse=True)
    results: list[bytes] = []
    covered: set[int] = set()

    def emit(edge_idxs: list[int], override: dict[int, int] | None = None) -> None:
        s = _path_bytes(nfa, edge_idxs, override)
        if len(s) <= limits.max_string_len:
            results.append(s)
            covered.update(edge_idxs)

    if fdist[nfa.accept] is not None:
        emit(fpaths[nfa.accept])

    for idx, (src, lo, _, dst) in enumerate(nfa.edges):
        if len(results) >= limits.max_strings:
            break
        if idx in covered:
            continue
        if lo == EPS and limits.star_unroll < 2:
            continue
        if fdist[src] is None or bdist[dst] is None:
            continue
        emit(fpaths[src] + [idx] + bpaths[dst])

    for idx, (src, lo, hi, dst) in enumerate(nfa.edges):
        if len(results) >= limits.max_strings:
            break
        if lo == EPS or hi <= lo:
            continue
        if fdist[src] is None or bdist[dst] is None:
            continue
        emit(fpaths[src] + [idx] + bpaths[dst], override={idx: hi})

    matcher = Matcher(nfa)
    unique = list(dict.fromkeys(results))
    return [s for s in unique[: limits.max_strings] if matcher.accepts(s)]


def _class_boundary_bytes(ast: Node) -> list[int]:
    out: list[int] = []
    for _, node in P.walk(ast):
        if node.kind != "class":
            continue
        for lo, hi in P.char_class_ranges(node.items, node.negated):
            if lo - 1 >= 0:
                out.append(lo - 1)
            if hi + 1 <= 255:
                out.append(hi + 1)
    return sorted(set(out))


def negative_strings(
    ast: Node,
    positives: list[bytes],
    rng: random.Random,
    limits: GenLimits = GenLimits(),
) -> list[bytes]:
    """Near-miss rejected strings derived from accepted ones.

    Perturbations: single-byte deletion, duplication, truncation, and
    substitution with a byte just outside a class boundary.  Candidates that
    the NFA still accepts are discarded, so the result may be short or empty
    (for example when the pattern matches everything).
    """
    try:
        matcher = Matcher(compile_nfa(ast))
    except (NonKleeneInput, PatternTooLarge):
        return []
    candidates: list[bytes] = []
    boundaries = _class_boundary_bytes(ast)
    for p in positives[:8]:
        if p:
            i = rng.randrange(len(p))
            candidates.append(p[:i] + p[i + 1:])
            j = rng.randrange(len(p))
            candidates.append(p[:j] + p[j:j + 1] + p[j:])
        if len(p) > 1:
            candidates.append(p[: rng.randrange(1, len(p))])
    for p in positives[:4]:
        if not p:
            continue
        for b in boundaries[:8]:
            k = rng.randrange(len(p))
            candidates.append(p[:k] + bytes([b]) + p[k + 1:])
    candidates.append(b"")
    if positives:
        candidates.append(positives[0] + bytes([rng.randrange(256)]))
    out: list[bytes] = []
    seen: set[bytes] = set()
    for c in candidates:
        if len(out) >= limits.max_strings:
            break
        if c in seen or len(c) > limits.max_string_len:
            continue
        seen.add(c)
        if not matcher.accepts(c):
            out.append(c)
    return out
