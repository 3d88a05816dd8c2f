"""Shared fixtures and an independent membership oracle.

The oracle decides language membership by Brzozowski derivatives computed
directly on the pattern tree: derive the pattern by each input byte in turn,
then ask whether the residual accepts the empty string.  It shares no code
with the bytecode engine or the NFA simulation, so three-way agreement is
meaningful evidence rather than an echo.
"""
from __future__ import annotations

import sys

import pytest

from rexfuzz import pattern as P


def _class_has(items, negated: bool, byte: int) -> bool:
    hit = any(lo <= byte <= hi for lo, hi in items)
    return hit != negated


def nullable(node: P.Node) -> bool:
    k = node.kind
    if k == "empty":
        return True
    if k in ("fail", "literal", "dot", "class"):
        return False
    if k == "concat":
        return all(nullable(p) for p in node.parts)
    if k == "alt":
        return any(nullable(o) for o in node.options)
    if k in ("star", "optional"):
        return True
    if k == "plus":
        return nullable(node.child)
    if k == "repeat":
        return node.min == 0 or nullable(node.child)
    if k == "group":
        return nullable(node.child)
    raise ValueError(f"oracle cannot judge {k}")


def _cat(a: P.Node, b: P.Node) -> P.Node:
    if a.kind == "fail" or b.kind == "fail":
        return P.Fail()
    if a.kind == "empty":
        return b
    if b.kind == "empty":
        return a
    return P.concat([a, b])


def _union(parts: list[P.Node]) -> P.Node:
    live = [p for p in parts if p.kind != "fail"]
    if not live:
        return P.Fail()
    return P.alternation(live)


def derive(node: P.Node, byte: int) -> P.Node:
    k = node.kind
    if k in ("empty", "fail"):
        return P.Fail()
    if k == "literal":
        return P.Empty() if node.byte == byte else P.Fail()
    if k == "dot":
        return P.Empty() if byte != 0x0A else P.Fail()
    if k == "class":
        return P.Empty() if _class_has(node.items, node.negated, byte) else P.Fail()
    if k == "concat":
        head, rest = node.parts[0], P.concat(list(node.parts[1:]))
        branches = [_cat(derive(head, byte), rest)]
        if nullable(head):
            branches.append(derive(rest, byte))
        return _union(branches)
    if k == "alt":
        return _union([derive(o, byte) for o in node.options])
    if k in ("star", "plus"):
        return _cat(derive(node.child, byte), P.star(node.child))
    if k == "optional":
        return derive(node.child, byte)
    if k == "repeat":
        if node.max == 0:
            return P.Fail()
        lower = max(node.min - 1, 0)
        upper = None if node.max is None else node.max - 1
        return _cat(derive(node.child, byte), P.repeat(node.child, lower, upper))
    if k == "group":
        return derive(node.child, byte)
    raise ValueError(f"oracle cannot derive {k}")


def _dedup_options(node: P.Node) -> P.Node:
    """Keep derivative growth in check: collapse duplicate alternatives."""
    if node.kind != "alt":
        return node
    seen: dict[str, P.Node] = {}
    for o in node.options:
        seen.setdefault(P.serialize(o), o)
    return P.alternation(list(seen.values()))


def deriv_accepts(ast: P.Node, data: bytes) -> bool:
    """Membership by repeated derivation; independent of engine and NFA."""
    cur = ast
    for b in data:
        cur = _dedup_options(derive(cur, b))
        if cur.kind == "fail":
            return False
    return nullable(cur)


@pytest.fixture
def adapter_cmd() -> list[str]:
    """Command line for the bundled reference adapter."""
    return [sys.executable, "-m", "rexfuzz.adapter"]
