"""Metamorphic relation catalog and single-engine oracle driver.

Each relation is a language-preserving rewrite derived from a Kleene-algebra
identity.  Applying one to a pattern yields a variant the engine under test
must treat the same way; disagreement on any probe input is a finding, with
no reference engine involved.

    id              category        identity (applied at a site r)
    --------------  --------------  ----------------------------------------
    ALT_ASSOC       Alternation     a|(b|c) = (?:a|b)|c
    ALT_COMM        Alternation     a|b = b|a
    ALT_IDEM        Alternation     r = (?:r|r)
    ALT_ZERO        Alternation     r = (?:r|(?!))
    CAT_ASSOC       Concatenation   a(?:bc) = (?:ab)c
    CAT_ONE         Concatenation   r = r(?:)
    CAT_ZERO        Concatenation   r(?!) accepts nothing
    DIST_L          Distributivity  r(?:s|t) = (?:rs|rt)
    DIST_R          Distributivity  (?:s|t)r = (?:sr|tr)
    STAR_UNROLL_L   KleeneStar      r* = (?:(?:)|rr*)
    STAR_UNROLL_R   KleeneStar      r* = (?:(?:)|r*r)
    STAR_COLLAPSE   KleeneStar      (?:(?:r*))* = r*
    STAR_EXPAND     KleeneStar      r* = (?:(?:r*))*
    SUMSTAR_L       StarLaws        (?:a|b)* = a*(?:ba*)*
    SUMSTAR_R       StarLaws        (?:a|b)* = (?:a*b)*a*
    PRODSTAR        StarLaws        (?:ab)* = (?:(?:)|a(?:ba)*b)

Assertion modes: most relations compare `matched` and `fullmatch` only,
because rewrites may legitimately shift which alternative a backtracker
prefers and therefore the reported span.  STAR_COLLAPSE and STAR_EXPAND
additionally compare spans (greedy stars reach the same extent either way).
CAT_ZERO asserts the variant matches nothing; it only applies at the root,
because an enclosing pattern can still match around an inner dead branch.

Relations never apply to patterns containing anchors: `^`/`$` are assertions
outside the algebra, and several identities break in their presence.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import pattern as P
from .engines import CrashInfo, EngineVerdict, MatchResult
from .nfa import GenLimits, NonKleeneInput, compile_nfa, negative_strings, positive_strings

MODE_MATCH = "match"
MODE_MATCH_SPAN = "match-and-span"
MODE_NO_MATCH = "no-match"

CATEGORIES = ("Alternation", "Concatenation", "Distributivity", "KleeneStar", "StarLaws")

DEFAULT_MAX_SITES = 4


@dataclass(frozen=True)
class Relation:
    id: str
    category: str
    mode: str
    identity: str
    _sites: Callable[[P.Node], list[P.NodePath]]
    _build: Callable[[P.Node, P.NodePath], P.Node]


# --- site enumerators -------------------------------------------------------
# All use preorder walk positions, so site lists are deterministic.


def _all_sites(root: P.Node) -> list[P.NodePath]:
    return [path for path, _ in P.walk(root)]


def _group_of(node: P.Node, inner_kind: str) -> bool:
    return node.kind == "group" and node.child.kind == inner_kind


def _alt_sites(root: P.Node) -> list[P.NodePath]:
    return [p for p, n in P.walk(root) if n.kind == "alt"]


def _assoc_sites(root: P.Node, kind: str) -> list[P.NodePath]:
    out = []
    for path, node in P.walk(root):
        if node.kind != kind:
            continue
        kids = P.children(node)
        if len(kids) >= 3 or _group_of(kids[-1], kind):
            out.append(path)
    return out


def _grouped_alt_in_concat(root: P.Node, need_left: bool) -> list[P.NodePath]:
    out = []
    for path, node in P.walk(root):
        if node.kind != "concat":
            continue
        for i, part in enumerate(node.parts):
            if not _group_of(part, "alt"):
                continue
            if need_left and i >= 1:
                out.append(path + (i,))
            elif not need_left and i <= len(node.parts) - 2:
                out.append(path + (i,))
    return out


def _star_sites(root: P.Node, child_kind: str | None = None) -> list[P.NodePath]:
    out = []
    for path, node in P.walk(root):
        if node.kind != "star" or not node.greedy:
            continue
        if child_kind is None:
            out.append(path)
        elif _group_of(node.child, child_kind):
            # the grouped child must itself be greedy when it is a star
            if child_kind != "star" or node.child.child.greedy:
                out.append(path)
    return out


# --- variant builders -------------------------------------------------------
# Builders rewrite the site subtree; shared sub-patterns are shared by
# reference, so variants stay cheap even on large trees.


def _at_site(fn: Callable[[P.Node], P.Node]):
    def build(root: P.Node, path: P.NodePath) -> P.Node:
        return P.replace(root, path, fn(P.node_at(root, path)))

    return build


def _build_alt_assoc(node: P.Node) -> P.Node:
    opts = list(node.options)
    if len(opts) >= 3:
        return P.alternation([P.group(P.alternation(opts[:2]))] + opts[2:])
    inner = list(opts[-1].child.options)
    return P.alternation([P.group(P.alternation(opts[:-1] + inner[:-1])), inner[-1]])


def _build_cat_assoc(node: P.Node) -> P.Node:
    parts = list(node.parts)
    if len(parts) >= 3:
        return P.concat([P.group(P.concat(parts[:2]))] + parts[2:])
    inner = list(parts[-1].child.parts)
    return P.concat([P.group(P.concat(parts[:-1] + inner[:-1])), inner[-1]])


def _build_dist(root: P.Node, path: P.NodePath, left: bool) -> P.Node:
    parent_path, i = path[:-1], path[-1]
    parent = P.node_at(root, parent_path)
    parts = list(parent.parts)
    options = parts[i].child.options
    if left:
        other = parts[i - 1]
        branches = [P.concat([other, opt]) for opt in options]
        new_parts = parts[: i - 1] + [P.group(P.alternation(branches))] + parts[i + 1 :]
    else:
        other = parts[i + 1]
        branches = [P.concat([opt, other]) for opt in options]
        new_parts = parts[:i] + [P.group(P.alternation(branches))] + parts[i + 2 :]
    return P.replace(root, parent_path, P.concat(new_parts))


def _build_unroll(node: P.Node, left: bool) -> P.Node:
    c = node.child
    tail = P.concat([c, P.star(c)]) if left else P.concat([P.star(c), c])
    return P.group(P.alternation([P.Empty(), tail]))


def _build_sumstar(node: P.Node, left: bool) -> P.Node:
    opts = list(node.child.child.options)
    r1, r2 = opts[0], P.alternation(opts[1:])
    s1 = P.star(r1)
    if left:
        return P.concat([s1, P.star(P.group(P.concat([r2, s1])))])
    return P.concat([P.star(P.group(P.concat([s1, r2]))), s1])


def _build_prodstar(node: P.Node) -> P.Node:
    parts = list(node.child.child.parts)
    r1, r2 = parts[0], P.concat(parts[1:])
    mid = P.star(P.group(P.concat([r2, r1])))
    return P.group(P.alternation([P.Empty(), P.concat([r1, mid, r2])]))


RELATIONS: tuple[Relation, ...] = (
    Relation(
        "ALT_ASSOC", "Alternation", MODE_MATCH, "a|(?:b|c) = (?:a|b)|c",
        lambda r: _assoc_sites(r, "alt"), _at_site(_build_alt_assoc),
    ),
    Relation(
        "ALT_COMM", "Alternation", MODE_MATCH, "a|b = b|a",
        _alt_sites, _at_site(lambda n: P.alternation(list(reversed(n.options)))),
    ),
    Relation(
        "ALT_IDEM", "Alternation", MODE_MATCH, "r = (?:r|r)",
        _all_sites, _at_site(lambda n: P.group(P.alternation([n, n]))),
    ),
    Relation(
        "ALT_ZERO", "Alternation", MODE_MATCH, "r = (?:r|(?!))",
        _all_sites, _at_site(lambda n: P.group(P.alternation([n, P.Fail()]))),
    ),
    Relation(
        "CAT_ASSOC", "Concatenation", MODE_MATCH, "a(?:bc) = (?:ab)c",
        lambda r: _assoc_sites(r, "concat"), _at_site(_build_cat_assoc),
    ),
    Relation(
        "CAT_ONE", "Concatenation", MODE_MATCH, "r = r(?:)",
        _all_sites, _at_site(lambda n: P.concat([n, P.Empty()])),
    ),
    Relation(
        "CAT_ZERO", "Concatenation", MODE_NO_MATCH, "r(?!) accepts nothing",
        lambda r: [()], lambda root, path: P.concat([root, P.Fail()]),
    ),
    Relation(
        "DIST_L", "Distributivity", MODE_MATCH, "r(?:s|t) = (?:rs|rt)",
        lambda r: _grouped_alt_in_concat(r, need_left=True),
        lambda root, path: _build_dist(root, path, left=True),
    ),
    Relation(
        "DIST_R", "Distributivity", MODE_MATCH, "(?:s|t)r = (?:sr|tr)",
        lambda r: _grouped_alt_in_concat(r, need_left=False),
        lambda root, path: _build_dist(root, path, left=False),
    ),
    Relation(
        "STAR_UNROLL_L", "KleeneStar", MODE_MATCH, "r* = (?:(?:)|rr*)",
        _star_sites, _at_site(lambda n: _build_unroll(n, left=True)),
    ),
    Relation(
        "STAR_UNROLL_R", "KleeneStar", MODE_MATCH, "r* = (?:(?:)|r*r)",
        _star_sites, _at_site(lambda n: _build_unroll(n, left=False)),
    ),
    Relation(
        "STAR_COLLAPSE", "KleeneStar", MODE_MATCH_SPAN, "(?:(?:r*))* = r*",
        lambda r: _star_sites(r, "star"), _at_site(lambda n: n.child.child),
    ),
    Relation(
        "STAR_EXPAND", "KleeneStar", MODE_MATCH_SPAN, "r* = (?:(?:r*))*",
        _star_sites, _at_site(lambda n: P.star(P.group(n))),
    ),
    Relation(
        "SUMSTAR_L", "StarLaws", MODE_MATCH, "(?:a|b)* = a*(?:ba*)*",
        lambda r: _star_sites(r, "alt"), _at_site(lambda n: _build_sumstar(n, left=True)),
    ),
    Relation(
        "SUMSTAR_R", "StarLaws", MODE_MATCH, "(?:a|b)* = (?:a*b)*a*",
        lambda r: _star_sites(r, "alt"), _at_site(lambda n: _build_sumstar(n, left=False)),
    ),
    Relation(
        "PRODSTAR", "StarLaws", MODE_MATCH, "(?:ab)* = (?:(?:)|a(?:ba)*b)",
        lambda r: _star_sites(r, "concat"), _at_site(_build_prodstar),
    ),
)

RELATION_IDS: tuple[str, ...] = tuple(r.id for r in RELATIONS)
_BY_ID = {r.id: r for r in RELATIONS}


def get_relation(rel: str | Relation) -> Relation:
    if isinstance(rel, Relation):
        return rel
    try:
        return _BY_ID[rel]
    except KeyError:
        raise KeyError(f"unknown relation {rel!r}") from None


def relations_in_category(category: str) -> tuple[Relation, ...]:
    return tuple(r for r in RELATIONS if r.category == category)


def applicable_sites(rel: str | Relation, root: P.Node) -> list[P.NodePath]:
    """Paths where `rel` can be applied.  Empty for anchored patterns."""
    if not P.is_kleene_fragment(root):
        return []
    return get_relation(rel)._sites(root)


def build_variant(rel: str | Relation, root: P.Node, path: P.NodePath) -> P.Node:
    return get_relation(rel)._build(root, path)


# --- oracle driver ----------------------------------------------------------


@dataclass(frozen=True)
class MtFinding:
    """One metamorphic disagreement: engine treated base and variant
    differently on `input` even though both denote the same language."""

    relation: str
    mode: str
    pattern: bytes
    variant: bytes
    input: bytes
    detail: str
    base: MatchResult | None
    variant_result: MatchResult | None


@dataclass(frozen=True)
class CrashRecord:
    """The engine process died while probing `pattern` on `input`."""

    pattern: bytes
    input: bytes
    info: CrashInfo
    relation: str | None = None


@dataclass
class MtStats:
    patterns: int = 0
    skipped: int = 0
    variants: int = 0
    checks: int = 0
    failures: int = 0
    dialect_gaps: int = 0
    timeouts: int = 0
    crashes: int = 0

    @property
    def passes(self) -> int:
        return self.checks - self.failures

    def add(self, other: "MtStats") -> None:
        for f in ("patterns", "skipped", "variants", "checks", "failures",
                  "dialect_gaps", "timeouts", "crashes"):
            setattr(self, f, getattr(self, f) + getattr(other, f))


@dataclass
class MtRunResult:
    findings: list[MtFinding] = field(default_factory=list)
    crashes: list[CrashRecord] = field(default_factory=list)
    stats: MtStats = field(default_factory=MtStats)

    @property
    def clean(self) -> bool:
        return not self.findings and not self.crashes


def judge(mode: str, base: MatchResult | None, variant: MatchResult) -> tuple[bool, str]:
    """Compare base and variant results under a relation's assertion mode."""
    if mode == MODE_NO_MATCH:
        if variant.matched:
            return False, "variant matched although its language is empty"
        return True, ""
    if base.matched != variant.matched:
        return False, f"matched diverged: base={base.matched} variant={variant.matched}"
    if base.fullmatch != variant.fullmatch:
        return False, f"fullmatch diverged: base={base.fullmatch} variant={variant.fullmatch}"
    if mode == MODE_MATCH_SPAN and base.span != variant.span:
        return False, f"span diverged: base={base.span} variant={variant.span}"
    return True, ""


class _BaseUnusable(Exception):
    """The base pattern cannot anchor comparisons on this engine."""


def _emit(on_event, kind: str, **info) -> None:
    if on_event is not None:
        on_event(kind, info)


def generate_inputs(
    ast: P.Node, limits: GenLimits | None = None, rng: random.Random | None = None
) -> list[bytes]:
    """Probe strings for a pattern: edge-covering members plus near-miss
    non-members."""
    limits = limits or GenLimits()
    rng = rng or random.Random(0)
    nfa = compile_nfa(ast)
    pos = positive_strings(nfa, limits)
    neg = negative_strings(ast, pos, rng, limits)
    return pos + neg


def mt_check_pattern(
    engine,
    pat: P.Node | bytes | str,
    *,
    inputs: Sequence[bytes] | None = None,
    relations: Sequence[str | Relation] | None = None,
    limits: GenLimits | None = None,
    rng: random.Random | None = None,
    max_sites: int | None = DEFAULT_MAX_SITES,
    stop_after_findings: int | None = None,
    on_event=None,
) -> MtRunResult:
    """Drive every applicable relation over one pattern.

    The base pattern is searched at most once per input; results are cached
    and reused across all relation sites.  Findings carry enough context to
    reproduce without the run state.
    """
    res = MtRunResult()
    stats = res.stats

    if not isinstance(pat, P.Node):
        try:
            ast = P.parse(pat)
        except P.ParseError as e:
            stats.skipped += 1
            _emit(on_event, "parse-error", pattern=bytes(pat, "utf-8") if isinstance(pat, str) else bytes(pat), error=str(e))
            return res
    else:
        ast = pat

    if not P.is_kleene_fragment(ast):
        stats.skipped += 1
        _emit(on_event, "non-kleene", pattern=P.serialize(ast).encode())
        return res

    if inputs is None:
        try:
            inputs = generate_inputs(ast, limits, rng)
        except (NonKleeneInput, P.PatternTooLarge) as e:
            stats.skipped += 1
            _emit(on_event, "too-large", pattern=P.serialize(ast).encode(), error=str(e))
            return res

    stats.patterns += 1
    base_src = P.serialize(ast).encode()
    rels = RELATIONS if relations is None else tuple(get_relation(r) for r in relations)
    base_cache: dict[bytes, EngineVerdict] = {}

    def base_verdict(data: bytes) -> EngineVerdict:
        v = base_cache.get(data)
        if v is None:
            v = engine.search(base_src, data)
            base_cache[data] = v
            if v.status == "compile_error":
                stats.dialect_gaps += 1
                _emit(on_event, "dialect-gap", pattern=base_src, message=v.message)
                raise _BaseUnusable
            if v.status == "crash":
                stats.crashes += 1
                res.crashes.append(CrashRecord(base_src, data, v.crash))
                _emit(on_event, "crash", pattern=base_src, input=data)
                raise _BaseUnusable
            if v.status == "timeout":
                stats.timeouts += 1
        return v

    try:
        for rel in rels:
            sites = applicable_sites(rel, ast)
            if max_sites is not None:
                sites = sites[:max_sites]
            for path in sites:
                variant_ast = build_variant(rel, ast, path)
                variant_src = P.serialize(variant_ast).encode()
                if variant_src == base_src:
                    continue  # e.g. reversing a palindromic alternation
                stats.variants += 1
                for data in inputs:
                    if rel.mode == MODE_NO_MATCH:
                        base = None
                    else:
                        bv = base_verdict(data)
                        if bv.status == "timeout":
                            continue
                        base = bv.result
                    vv = engine.search(variant_src, data)
                    if vv.status == "compile_error":
                        stats.dialect_gaps += 1
                        _emit(on_event, "dialect-gap", pattern=variant_src, message=vv.message)
                        break
                    if vv.status == "crash":
                        stats.crashes += 1
                        res.crashes.append(CrashRecord(variant_src, data, vv.crash, rel.id))
                        _emit(on_event, "crash", pattern=variant_src, input=data, relation=rel.id)
                        break
                    if vv.status == "timeout":
                        stats.timeouts += 1
                        continue
                    stats.checks += 1
                    ok, detail = judge(rel.mode, base, vv.result)
                    if not ok:
                        stats.failures += 1
                        finding = MtFinding(
                            relation=rel.id,
                            mode=rel.mode,
                            pattern=base_src,
                            variant=variant_src,
                            input=data,
                            detail=detail,
                            base=base,
                            variant_result=vv.result,
                        )
                        res.findings.append(finding)
                        _emit(on_event, "finding", finding=finding)
                        if (
                            stop_after_findings is not None
                            and len(res.findings) >= stop_after_findings
                        ):
                            return res
    except _BaseUnusable:
        pass
    return res


def run_mt(
    engine,
    patterns: Iterable[P.Node | bytes | str],
    *,
    relations: Sequence[str | Relation] | None = None,
    limits: GenLimits | None = None,
    rng: random.Random | None = None,
    max_sites: int | None = DEFAULT_MAX_SITES,
    stop_after_findings: int | None = None,
    on_event=None,
) -> MtRunResult:
    """Run the metamorphic oracle over a pattern corpus."""
    rng = rng or random.Random(0)
    total = MtRunResult()
    for pat in patterns:
        remaining = None
        if stop_after_findings is not None:
            remaining = stop_after_findings - len(total.findings)
            if remaining <= 0:
                break
        one = mt_check_pattern(
            engine,
            pat,
            relations=relations,
            limits=limits,
            rng=rng,
            max_sites=max_sites,
            stop_after_findings=remaining,
            on_event=on_event,
        )
        total.findings.extend(one.findings)
        total.crashes.extend(one.crashes)
        total.stats.add(one.stats)
        if stop_after_findings is not None and len(total.findings) >= stop_after_findings:
            break
    return total
