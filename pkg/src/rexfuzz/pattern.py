"""Byte-oriented regex dialect: AST, parser, serializer, structural helpers.

The dialect is a deliberately small common subset: alternation, concatenation,
greedy/lazy quantifiers, non-capturing groups, character classes, dot, anchors,
and a fixed escape list.  Everything else is a ParseError.

Trees are immutable and canonical by construction: the public factory
functions flatten directly nested same-type Concat/Alt nodes and insert Group
nodes wherever serialization would otherwise need to invent parentheses.  As a
result every constructible tree satisfies parse(serialize(t)) == t.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, Iterator, Sequence, Union

CONTEXT_DEPTH = 2

# Quantifier children must come from this set; factories wrap anything else
# in a Group so the serializer never has to invent parentheses.
_ATOM_KINDS = frozenset(
    {"literal", "dot", "class", "empty", "fail", "group"}
)


class ParseError(ValueError):
    """Pattern text outside the dialect.  Carries reason and byte offset."""

    def __init__(self, reason: str, offset: int):
        super().__init__(f"{reason} at byte {offset}")
        self.reason = reason
        self.offset = offset


class PatternTooLarge(ValueError):
    """Raised when bounded-repeat expansion exceeds the node budget."""


@dataclass(frozen=True, slots=True)
class Empty:
    """Matches the empty string; serialized as (?:)."""

    kind: ClassVar[str] = "empty"


@dataclass(frozen=True, slots=True)
class Fail:
    """Matches nothing; serialized as (?!)."""

    kind: ClassVar[str] = "fail"


@dataclass(frozen=True, slots=True)
class Literal:
    kind: ClassVar[str] = "literal"
    byte: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.byte <= 255:
            raise ValueError(f"literal byte out of range: {self.byte}")


@dataclass(frozen=True, slots=True)
class Dot:
    """Any byte except newline (0x0a)."""

    kind: ClassVar[str] = "dot"


@dataclass(frozen=True, slots=True)
class CharClass:
    kind: ClassVar[str] = "class"
    negated: bool = False
    items: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("empty character class")
        for lo, hi in self.items:
            if not (0 <= lo <= hi <= 255):
                raise ValueError(f"bad class range {lo}-{hi}")


@dataclass(frozen=True, slots=True)
class Concat:
    kind: ClassVar[str] = "concat"
    parts: tuple["Node", ...] = ()

    def __post_init__(self) -> None:
        if len(self.parts) < 2:
            raise ValueError("concat needs at least two parts")
        for p in self.parts:
            if p.kind in ("concat", "alt"):
                raise ValueError(f"bare {p.kind} inside concat; wrap in Group")


@dataclass(frozen=True, slots=True)
class Alt:
    kind: ClassVar[str] = "alt"
    options: tuple["Node", ...] = ()

    def __post_init__(self) -> None:
        if len(self.options) < 2:
            raise ValueError("alt needs at least two options")
        for o in self.options:
            if o.kind == "alt":
                raise ValueError("bare alt inside alt; wrap in Group")


def _check_quantifiable(child: "Node") -> None:
    if child.kind not in _ATOM_KINDS:
        raise ValueError(f"cannot quantify bare {child.kind}; wrap in Group")


@dataclass(frozen=True, slots=True)
class Star:
    kind: ClassVar[str] = "star"
    child: "Node" = field(default_factory=Empty)
    greedy: bool = True

    def __post_init__(self) -> None:
        _check_quantifiable(self.child)


@dataclass(frozen=True, slots=True)
class Plus:
    kind: ClassVar[str] = "plus"
    child: "Node" = field(default_factory=Empty)
    greedy: bool = True

    def __post_init__(self) -> None:
        _check_quantifiable(self.child)


@dataclass(frozen=True, slots=True)
class Opt:
    """Zero-or-one quantifier (?)."""

    kind: ClassVar[str] = "optional"
    child: "Node" = field(default_factory=Empty)
    greedy: bool = True

    def __post_init__(self) -> None:
        _check_quantifiable(self.child)


@dataclass(frozen=True, slots=True)
class Repeat:
    kind: ClassVar[str] = "repeat"
    child: "Node" = field(default_factory=Empty)
    min: int = 0
    max: int | None = None
    greedy: bool = True

    def __post_init__(self) -> None:
        _check_quantifiable(self.child)
        if self.min < 0:
            raise ValueError("negative repeat bound")
        if self.max is not None and self.max < self.min:
            raise ValueError(f"bad repeat bounds {{{self.min},{self.max}}}")


@dataclass(frozen=True, slots=True)
class Group:
    """Non-capturing group (?:...); affects structure only."""

    kind: ClassVar[str] = "group"
    child: "Node" = field(default_factory=Empty)


@dataclass(frozen=True, slots=True)
class AnchorStart:
    kind: ClassVar[str] = "anchor-start"


@dataclass(frozen=True, slots=True)
class AnchorEnd:
    kind: ClassVar[str] = "anchor-end"


Node = Union[
    Empty, Fail, Literal, Dot, CharClass, Concat, Alt,
    Star, Plus, Opt, Repeat, Group, AnchorStart, AnchorEnd,
]

NodePath = tuple[int, ...]


# ---------------------------------------------------------------------------
# Factories.  These are the supported way to build trees: they collapse
# singletons, flatten same-type nesting, and group where precedence demands.

def literal(ch: int | str | bytes) -> Literal:
    if isinstance(ch, str):
        ch = ch.encode("utf-8")
    if isinstance(ch, (bytes, bytearray)):
        if len(ch) != 1:
            raise ValueError("literal() wants a single byte")
        ch = ch[0]
    return Literal(byte=ch)


def char_class(items: Iterable[tuple[int, int]], negated: bool = False) -> CharClass:
    return CharClass(negated=negated, items=tuple(items))


def group(child: Node) -> Group:
    return Group(child=child)


def concat(parts: Sequence[Node]) -> Node:
    """n-ary concatenation; flattens nested bare Concats, groups bare Alts."""
    flat: list[Node] = []
    for p in parts:
        if p.kind == "concat":
            flat.extend(p.parts)
        elif p.kind == "alt":
            flat.append(Group(child=p))
        else:
            flat.append(p)
    if not flat:
        return Empty()
    if len(flat) == 1:
        return flat[0]
    return Concat(parts=tuple(flat))


def alternation(options: Sequence[Node]) -> Node:
    """n-ary alternation; flattens nested bare Alts, collapses singletons."""
    flat: list[Node] = []
    for o in options:
        if o.kind == "alt":
            flat.extend(o.options)
        else:
            flat.append(o)
    if not flat:
        return Fail()
    if len(flat) == 1:
        return flat[0]
    return Alt(options=tuple(flat))


def _atomize(child: Node) -> Node:
    return child if child.kind in _ATOM_KINDS else Group(child=child)


def star(child: Node, greedy: bool = True) -> Star:
    return Star(child=_atomize(child), greedy=greedy)


def plus(child: Node, greedy: bool = True) -> Plus:
    return Plus(child=_atomize(child), greedy=greedy)


def optional(child: Node, greedy: bool = True) -> Opt:
    return Opt(child=_atomize(child), greedy=greedy)


def repeat(child: Node, min: int, max: int | None, greedy: bool = True) -> Repeat:
    return Repeat(child=_atomize(child), min=min, max=max, greedy=greedy)


# ---------------------------------------------------------------------------
# Parser.

_MAX_GROUP_DEPTH = 200

_ESCAPE_NAMED = {0x6E: 0x0A, 0x72: 0x0D, 0x74: 0x09}  # n, r, t
_ESCAPE_SELF = frozenset(b"\\|()[]{}*+?.^$-")
_HEX = b"0123456789abcdefABCDEF"


class _Parser:
    def __init__(self, data: bytes):
        self.data = data
        self.i = 0

    def error(self, reason: str, offset: int | None = None) -> ParseError:
        return ParseError(reason, self.i if offset is None else offset)

    def peek(self) -> int:
        return self.data[self.i] if self.i < len(self.data) else -1

    def alternation(self, depth: int) -> Node:
        branches = [self.concatenation(depth)]
        while self.peek() == 0x7C:  # |
            self.i += 1
            branches.append(self.concatenation(depth))
        return alternation(branches)

    def concatenation(self, depth: int) -> Node:
        parts: list[Node] = []
        while True:
            c = self.peek()
            if c in (-1, 0x7C, 0x29):  # end, |, )
                break
            parts.append(self.term(depth))
        return concat(parts)

    def term(self, depth: int) -> Node:
        atom = self.atom(depth)
        c = self.peek()
        if c not in (0x2A, 0x2B, 0x3F, 0x7B):  # * + ? {
            return atom
        if atom.kind in ("anchor-start", "anchor-end"):
            raise self.error("quantified anchor")
        if c == 0x2A:
            self.i += 1
            node: Node = Star(child=atom, greedy=not self._lazy_flag())
        elif c == 0x2B:
            self.i += 1
            node = Plus(child=atom, greedy=not self._lazy_flag())
        elif c == 0x3F:
            self.i += 1
            node = Opt(child=atom, greedy=not self._lazy_flag())
        else:
            lo, hi = self.repeat_bounds()
            node = Repeat(child=atom, min=lo, max=hi, greedy=not self._lazy_flag())
        if self.peek() in (0x2A, 0x2B, 0x3F, 0x7B):
            raise self.error("dangling quantifier")
        return node

    def _lazy_flag(self) -> bool:
        if self.peek() == 0x3F:
            self.i += 1
            return True
        return False

    def repeat_bounds(self) -> tuple[int, int | None]:
        open_at = self.i
        self.i += 1  # {
        lo = self.digits(open_at)
        c = self.peek()
        if c == 0x7D:  # }
            self.i += 1
            return lo, lo
        if c != 0x2C:  # ,
            raise self.error("bad repeat", open_at)
        self.i += 1
        if self.peek() == 0x7D:
            self.i += 1
            return lo, None
        hi = self.digits(open_at)
        if self.peek() != 0x7D:
            raise self.error("bad repeat", open_at)
        self.i += 1
        if hi < lo:
            raise self.error("bad repeat bounds", open_at)
        return lo, hi

    def digits(self, open_at: int) -> int:
        start = self.i
        while 0x30 <= self.peek() <= 0x39:
            self.i += 1
        if self.i == start:
            raise self.error("bad repeat", open_at)
        return int(self.data[start:self.i])

    def atom(self, depth: int) -> Node:
        c = self.peek()
        if c == 0x28:  # (
            return self.group_atom(depth)
        if c == 0x5B:  # [
            return self.char_class_atom()
        if c == 0x2E:  # .
            self.i += 1
            return Dot()
        if c == 0x5E:  # ^
            self.i += 1
            return AnchorStart()
        if c == 0x24:  # $
            self.i += 1
            return AnchorEnd()
        if c == 0x5C:  # backslash
            return Literal(byte=self.escape())
        if c in (0x2A, 0x2B, 0x3F, 0x7B):  # quantifier with nothing to repeat
            raise self.error("dangling quantifier")
        if c in (0x29, 0x5D, 0x7D):  # ) ] }
            raise self.error("unbalanced delimiter")
        self.i += 1
        return Literal(byte=c)

    def group_atom(self, depth: int) -> Node:
        if depth >= _MAX_GROUP_DEPTH:
            raise self.error("group nesting too deep")
        open_at = self.i
        if self.data.startswith(b"(?!)", self.i):
            self.i += 4
            return Fail()
        if not self.data.startswith(b"(?:", self.i):
            raise self.error("unsupported group", open_at)
        self.i += 3
        body_start = self.i
        inner = self.alternation(depth + 1)
        if self.peek() != 0x29:
            raise self.error("unbalanced group", open_at)
        self.i += 1
        if self.i - 1 == body_start:
            return Empty()  # the literal text (?:)
        return Group(child=inner)

    def escape(self) -> int:
        open_at = self.i
        self.i += 1  # backslash
        c = self.peek()
        if c == -1:
            raise self.error("truncated escape", open_at)
        if c in _ESCAPE_NAMED:
            self.i += 1
            return _ESCAPE_NAMED[c]
        if c == 0x78:  # x
            self.i += 1
            h = self.data[self.i:self.i + 2]
            if len(h) != 2 or h[0] not in _HEX or h[1] not in _HEX:
                raise self.error("bad hex escape", open_at)
            self.i += 2
            return int(h, 16)
        if c in _ESCAPE_SELF:
            self.i += 1
            return c
        raise self.error("unknown escape", open_at)

    def char_class_atom(self) -> Node:
        open_at = self.i
        self.i += 1  # [
        negated = False
        if self.peek() == 0x5E:
            negated = True
            self.i += 1
        items: list[tuple[int, int]] = []
        while True:
            c = self.peek()
            if c == -1:
                raise self.error("unterminated class", open_at)
            if c == 0x5D:  # ]
                self.i += 1
                break
            lo = self.class_byte()
            if self.peek() == 0x2D:  # -
                dash_at = self.i
                self.i += 1
                if self.peek() == 0x5D:
                    raise self.error("bad class range", dash_at)
                hi = self.class_byte()
                if hi < lo:
                    raise self.error("bad class range", dash_at)
                items.append((lo, hi))
            else:
                items.append((lo, lo))
        if not items:
            raise self.error("empty class", open_at)
        return CharClass(negated=negated, items=tuple(items))

    def class_byte(self) -> int:
        c = self.peek()
        if c == 0x5C:
            return self.escape()
        if c == 0x2D:
            raise self.error("bad class range")
        if c in (-1, 0x5D):
            raise self.error("unterminated class")
        self.i += 1
        return c


def parse(text: str | bytes) -> Node:
    """Parse pattern text into a canonical tree.

    Raises ParseError (with a byte offset) for anything outside the dialect;
    never raises anything else, for inputs up to the supported size.
    """
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    p = _Parser(data)
    node = p.alternation(0)
    if p.i != len(data):
        raise p.error("unbalanced group")
    return node


# ---------------------------------------------------------------------------
# Serializer.

_META_BYTES = frozenset(b"|()[]{}*+?.^$\\")
_CLASS_META = frozenset(b"]\\-^")


def _escape_byte(b: int) -> str:
    if b in _META_BYTES:
        return "\\" + chr(b)
    if b == 0x0A:
        return "\\n"
    if b == 0x0D:
        return "\\r"
    if b == 0x09:
        return "\\t"
    if 0x20 <= b <= 0x7E:
        return chr(b)
    return f"\\x{b:02x}"


def _escape_class_byte(b: int) -> str:
    if b in _CLASS_META:
        return "\\" + chr(b)
    if b == 0x0A:
        return "\\n"
    if b == 0x0D:
        return "\\r"
    if b == 0x09:
        return "\\t"
    if 0x20 <= b <= 0x7E:
        return chr(b)
    return f"\\x{b:02x}"


def _quant_suffix(sym: str, greedy: bool) -> str:
    return sym if greedy else sym + "?"


def serialize(node: Node) -> str:
    """Render a tree to pattern text.  parse(serialize(t)) == t."""
    k = node.kind
    if k == "empty":
        return "(?:)"
    if k == "fail":
        return "(?!)"
    if k == "literal":
        return _escape_byte(node.byte)
    if k == "dot":
        return "."
    if k == "class":
        out = ["[", "^" if node.negated else ""]
        for lo, hi in node.items:
            if lo == hi:
                out.append(_escape_class_byte(lo))
            else:
                out.append(_escape_class_byte(lo) + "-" + _escape_class_byte(hi))
        out.append("]")
        return "".join(out)
    if k == "concat":
        return "".join(serialize(p) for p in node.parts)
    if k == "alt":
        return "|".join(serialize(o) for o in node.options)
    if k == "star":
        return serialize(node.child) + _quant_suffix("*", node.greedy)
    if k == "plus":
        return serialize(node.child) + _quant_suffix("+", node.greedy)
    if k == "optional":
        return serialize(node.child) + _quant_suffix("?", node.greedy)
    if k == "repeat":
        if node.max is None:
            bounds = f"{{{node.min},}}"
        elif node.max == node.min:
            bounds = f"{{{node.min}}}"
        else:
            bounds = f"{{{node.min},{node.max}}}"
        return serialize(node.child) + _quant_suffix(bounds, node.greedy)
    if k == "group":
        return "(?:" + serialize(node.child) + ")"
    if k == "anchor-start":
        return "^"
    if k == "anchor-end":
        return "$"
    raise TypeError(f"not a pattern node: {node!r}")


# ---------------------------------------------------------------------------
# Structural helpers.

def children(node: Node) -> tuple[Node, ...]:
    k = node.kind
    if k == "concat":
        return node.parts
    if k == "alt":
        return node.options
    if k in ("star", "plus", "optional", "repeat", "group"):
        return (node.child,)
    return ()


def _rebuild(node: Node, parts: Sequence[Node]) -> Node:
    k = node.kind
    if k == "concat":
        return concat(parts)
    if k == "alt":
        return alternation(parts)
    if k == "star":
        return star(parts[0], node.greedy)
    if k == "plus":
        return plus(parts[0], node.greedy)
    if k == "optional":
        return optional(parts[0], node.greedy)
    if k == "repeat":
        return repeat(parts[0], node.min, node.max, node.greedy)
    if k == "group":
        return Group(child=parts[0])
    raise TypeError(f"{k} has no children to rebuild")


def node_at(root: Node, path: NodePath) -> Node:
    node = root
    for idx in path:
        kids = children(node)
        if not 0 <= idx < len(kids):
            raise ValueError(f"path {path!r} does not resolve")
        node = kids[idx]
    return node


def walk(root: Node) -> Iterator[tuple[NodePath, Node]]:
    """Preorder traversal yielding (path, node) pairs."""
    stack: list[tuple[NodePath, Node]] = [((), root)]
    while stack:
        path, node = stack.pop()
        yield path, node
        kids = children(node)
        for i in range(len(kids) - 1, -1, -1):
            stack.append((path + (i,), kids[i]))


def collect_internal_nodes(root: Node) -> list[NodePath]:
    """Preorder paths of every node with at least one child."""
    return [path for path, node in walk(root) if children(node)]


def extract_context(root: Node, path: NodePath, depth: int = CONTEXT_DEPTH) -> tuple[str, ...]:
    """Ancestor kind tags, nearest first, truncated to `depth`."""
    tags: list[str] = []
    node = root
    for idx in path:
        tags.append(node.kind)
        node = children(node)[idx]
    tags.reverse()
    return tuple(tags[:depth])


def replace(root: Node, path: NodePath, repl: Node) -> Node:
    """Copy-on-write subtree replacement.

    Only nodes on the root-to-target path are rebuilt; every sibling subtree
    is shared by reference with the input tree.
    """
    if not path:
        return repl
    kids = children(root)
    idx = path[0]
    if not 0 <= idx < len(kids):
        raise ValueError(f"path {path!r} does not resolve")
    new_kids = list(kids)
    new_kids[idx] = replace(kids[idx], path[1:], repl)
    return _rebuild(root, new_kids)


def is_kleene_fragment(root: Node, path: NodePath = ()) -> bool:
    """True when the subtree at `path` contains no anchors."""
    sub = node_at(root, path)
    return all(n.kind not in ("anchor-start", "anchor-end") for _, n in walk(sub))


def node_count(root: Node) -> int:
    return sum(1 for _ in walk(root))


def char_class_ranges(items: Iterable[tuple[int, int]], negated: bool) -> tuple[tuple[int, int], ...]:
    """Normalize class items to sorted disjoint ranges; complement if negated."""
    spans = sorted(items)
    merged: list[list[int]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    if not negated:
        return tuple((lo, hi) for lo, hi in merged)
    out: list[tuple[int, int]] = []
    prev = 0
    for lo, hi in merged:
        if lo > prev:
            out.append((prev, lo - 1))
        prev = hi + 1
    if prev <= 255:
        out.append((prev, 255))
    return tuple(out)


def expand_repeats(root: Node, max_nodes: int = 4096) -> Node:
    """Rewrite bounded Repeat nodes into concatenation/option/star form.

    {n} becomes n copies, {n,} n copies plus a star, {n,m} n copies plus
    m-n nested optionals.  Shared (immutable) child references keep the
    expansion cheap; PatternTooLarge guards against exponential blowups.
    """

    def rec(node: Node) -> Node:
        kids = children(node)
        if not kids:
            return node
        new_kids = [rec(c) for c in kids]
        if node.kind != "repeat":
            if all(a is b for a, b in zip(kids, new_kids)):
                return node
            return _rebuild(node, new_kids)
        child = new_kids[0]
        size = node_count(child)
        copies = node.min if node.max is None else node.max
        if size * max(copies, 1) + copies + 2 > max_nodes:
            raise PatternTooLarge(f"repeat expansion over {max_nodes} nodes")
        g = node.greedy
        if node.max is None:
            tail: list[Node] = [child] * node.min + [star(child, g)]
            return concat(tail)
        if node.max == 0:
            return Empty()
        expanded: Node = Empty()
        for _ in range(node.max - node.min):
            if expanded.kind == "empty":
                expanded = optional(child, g)
            else:
                expanded = optional(concat([child, expanded]), g)
        parts: list[Node] = [child] * node.min
        if expanded.kind != "empty":
            parts.append(expanded)
        return concat(parts)

    return rec(root)


# ---------------------------------------------------------------------------
# Random pattern generation.

_DEFAULT_ALPHABET = b"abcdefgxyz0189 ._-"


def _normalize_alphabet(alphabet: str | bytes | Sequence[int] | None) -> list[int]:
    if alphabet is None:
        return list(_DEFAULT_ALPHABET)
    if isinstance(alphabet, str):
        return list(alphabet.encode("utf-8"))
    return [int(b) for b in alphabet]


def random_pattern(
    rng: random.Random,
    budget: int,
    alphabet: str | bytes | Sequence[int] | None = None,
) -> Node:
    """Generate an anchor-free pattern with at most `budget` nodes.

    Deterministic for a given rng state.  Mirrors the grammar levels of the
    parser so the result is canonical without any fixups.
    """
    pool = _normalize_alphabet(alphabet)
    if budget < 1:
        budget = 1

    def leaf() -> Node:
        r = rng.random()
        if r < 0.68:
            return Literal(byte=rng.choice(pool))
        if r < 0.78:
            return Dot()
        if r < 0.92:
            a = rng.choice(pool)
            b = rng.choice(pool)
            lo, hi = min(a, b), max(a, b)
            negated = rng.random() < 0.12
            return CharClass(negated=negated, items=((lo, hi),))
        if r < 0.985:
            return Empty()
        return Fail()

    def gen_alt(b: int) -> tuple[Node, int]:
        if b >= 5 and rng.random() < 0.30:
            n = 2 if b < 8 or rng.random() < 0.7 else 3
            used = 1  # the alt node itself
            branches = []
            for j in range(n):
                share = max(1, (b - used) // (n - j))
                sub, su = gen_concat(share)
                branches.append(sub)
                used += su
            return alternation(branches), used
        return gen_concat(b)

    def gen_concat(b: int) -> tuple[Node, int]:
        if b >= 4 and rng.random() < 0.45:
            n = 2 if b < 7 or rng.random() < 0.6 else 3
            used = 1
            parts = []
            for j in range(n):
                share = max(1, (b - used) // (n - j))
                sub, su = gen_term(share)
                parts.append(sub)
                used += su
            node = concat(parts)
            return node, used if node.kind == "concat" else used - 1
        return gen_term(b)

    def gen_term(b: int) -> tuple[Node, int]:
        atom, used = gen_atom(b - 1 if b > 1 else b)
        if used < b and rng.random() < 0.35:
            r = rng.random()
            if r < 0.45:
                return Star(child=atom), used + 1
            if r < 0.65:
                return Plus(child=atom), used + 1
            if r < 0.85:
                return Opt(child=atom), used + 1
            lo = rng.randrange(0, 3)
            hi = lo + rng.randrange(0, 3)
            return Repeat(child=atom, min=lo, max=hi if rng.random() < 0.8 else None), used + 1
        return atom, used

    def gen_atom(b: int) -> tuple[Node, int]:
        if b >= 3 and rng.random() < 0.22:
            sub, used = gen_alt(b - 1)
            return Group(child=sub), used + 1
        return leaf(), 1

    node, _ = gen_alt(budget)
    return node
