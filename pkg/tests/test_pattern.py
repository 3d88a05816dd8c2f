"""Pattern dialect: parser, serializer, tree algebra, random generation."""
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rexfuzz import pattern as P


def rt(src: str) -> P.Node:
    return P.parse(src)


class TestParseShapes:
    def test_literal(self):
        assert rt("a") == P.Literal(byte=0x61)

    def test_concat(self):
        assert rt("ab") == P.Concat(parts=(P.Literal(byte=0x61), P.Literal(byte=0x62)))

    def test_alt(self):
        assert rt("a|b") == P.Alt(options=(P.Literal(byte=0x61), P.Literal(byte=0x62)))

    def test_empty_group_is_epsilon(self):
        assert rt("(?:)") == P.Empty()

    def test_negative_lookahead_of_nothing_is_fail(self):
        assert rt("(?!)") == P.Fail()

    def test_group(self):
        assert rt("(?:a)") == P.Group(child=P.Literal(byte=0x61))

    def test_quantifiers(self):
        assert rt("a*") == P.Star(child=P.Literal(byte=0x61), greedy=True)
        assert rt("a+") == P.Plus(child=P.Literal(byte=0x61), greedy=True)
        assert rt("a?") == P.Opt(child=P.Literal(byte=0x61), greedy=True)
        assert rt("a*?") == P.Star(child=P.Literal(byte=0x61), greedy=False)

    def test_bounded_repeats(self):
        assert rt("a{2}") == P.Repeat(child=P.Literal(byte=0x61), min=2, max=2, greedy=True)
        assert rt("a{2,}") == P.Repeat(child=P.Literal(byte=0x61), min=2, max=None, greedy=True)
        assert rt("a{2,5}") == P.Repeat(child=P.Literal(byte=0x61), min=2, max=5, greedy=True)

    def test_char_class(self):
        assert rt("[a-c]") == P.CharClass(negated=False, items=((0x61, 0x63),))
        assert rt("[^a-c]") == P.CharClass(negated=True, items=((0x61, 0x63),))
        assert rt("[a\\-z]") == P.CharClass(
            negated=False, items=((0x61, 0x61), (0x2D, 0x2D), (0x7A, 0x7A))
        )

    def test_class_caret_not_first_is_literal(self):
        assert rt("[a^b]").items == ((0x61, 0x61), (0x5E, 0x5E), (0x62, 0x62))

    def test_dot_and_anchors(self):
        assert rt(".") == P.Dot()
        assert rt("^a$") == P.Concat(
            parts=(P.AnchorStart(), P.Literal(byte=0x61), P.AnchorEnd())
        )

    def test_escapes(self):
        assert rt("\\n") == P.Literal(byte=0x0A)
        assert rt("\\x41") == P.Literal(byte=0x41)
        assert rt("\\*") == P.Literal(byte=0x2A)

    def test_trailing_empty_alternative(self):
        assert rt("a|") == P.Alt(options=(P.Literal(byte=0x61), P.Empty()))

    def test_bytes_input(self):
        assert P.parse(b"a|b") == rt("a|b")


class TestParseErrors:
    @pytest.mark.parametrize(
        "src,reason,offset",
        [
            ("(", "unsupported group", 0),
            ("(a)", "unsupported group", 0),
            ("(?!x)", "unsupported group", 0),
            (")", "unbalanced group", 0),
            ("*a", "dangling quantifier", 0),
            ("a**", "dangling quantifier", 2),
            ("{2}", "dangling quantifier", 0),
            ("[z-a]", "bad class range", 2),
            ("[a-]", "bad class range", 2),
            ("[-a]", "bad class range", 1),
            ("[abc", "unterminated class", 0),
            ("[]", "empty class", 0),
            ("a{,3}", "bad repeat", 1),
            ("a{2,1}", "bad repeat bounds", 1),
            ("a{", "bad repeat", 1),
            ("a}", "unbalanced delimiter", 1),
            ("\\q", "unknown escape", 0),
            ("\\x4", "bad hex escape", 0),
        ],
    )
    def test_error_with_offset(self, src, reason, offset):
        with pytest.raises(P.ParseError) as ei:
            P.parse(src)
        assert ei.value.reason == reason
        assert ei.value.offset == offset

    def test_depth_cap(self):
        src = "(?:" * 201 + "a" + ")" * 201
        with pytest.raises(P.ParseError) as ei:
            P.parse(src)
        assert ei.value.reason == "group nesting too deep"

    def test_depth_within_cap_parses(self):
        src = "(?:" * 199 + "a" + ")" * 199
        assert P.parse(src) is not None


class TestSerialize:
    @pytest.mark.parametrize(
        "src",
        [
            "a", "ab", "a|b", "a|ab|b", "(?:a|b)c", "(?:ab)*", "a*?", "a+?",
            "a{2,5}?", "[a-c]", "[^a-c0-9]", "[\\]\\-\\^x]", "(?:)", "(?!)",
            "\\n\\r\\t", "\\x00\\xff", ".", "^ab$", "(?:a(?:b|c)+)?d",
            "(?:foo|)bar", "a{0,2}", "x{3,}",
        ],
    )
    def test_round_trip(self, src):
        t = P.parse(src)
        s = P.serialize(t)
        assert P.parse(s) == t

    def test_nonprintable_renders_hex(self):
        assert P.serialize(P.Literal(byte=0)) == "\\x00"

    def test_class_meta_always_escaped(self):
        s = P.serialize(P.CharClass(negated=False, items=((0x5D, 0x5D), (0x2D, 0x2D))))
        assert s == "[\\]\\-]"

    def test_epsilon_and_void_forms(self):
        assert P.serialize(P.Empty()) == "(?:)"
        assert P.serialize(P.Fail()) == "(?!)"


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=10**9), st.integers(min_value=1, max_value=24))
def test_generated_trees_round_trip(seed, budget):
    t = P.random_pattern(random.Random(seed), budget)
    assert P.parse(P.serialize(t)) == t


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=64))
def test_parser_is_total(data):
    # Arbitrary bytes either parse or raise ParseError with a located reason;
    # nothing else may escape.
    try:
        t = P.parse(data)
    except P.ParseError as e:
        assert isinstance(e.reason, str) and e.reason
        assert 0 <= e.offset <= len(data)
    else:
        assert P.parse(P.serialize(t)) == t


class TestConstructorInvariants:
    def test_concat_flattens_bare_concat(self):
        inner = P.concat([P.literal("a"), P.literal("b")])
        outer = P.concat([inner, P.literal("c")])
        assert outer.kind == "concat" and len(outer.parts) == 3

    def test_concat_groups_bare_alt(self):
        alt = P.alternation([P.literal("a"), P.literal("b")])
        out = P.concat([alt, P.literal("c")])
        assert out.parts[0].kind == "group"

    def test_alternation_flattens(self):
        inner = P.alternation([P.literal("a"), P.literal("b")])
        out = P.alternation([inner, P.literal("c")])
        assert len(out.options) == 3

    def test_singleton_collapse(self):
        lit = P.literal("a")
        assert P.concat([lit]) is lit
        assert P.alternation([lit]) is lit

    def test_empty_sequences(self):
        assert P.concat([]) == P.Empty()
        assert P.alternation([]) == P.Fail()

    def test_quantifier_atomizes(self):
        cc = P.concat([P.literal("a"), P.literal("b")])
        s = P.star(cc)
        assert s.child.kind == "group"
        assert P.serialize(s) == "(?:ab)*"

    def test_direct_constructor_rejects_noncanonical(self):
        with pytest.raises(ValueError):
            P.Concat(parts=(P.literal("a"),))
        with pytest.raises(ValueError):
            P.Star(child=P.Concat(parts=(P.literal("a"), P.literal("b"))), greedy=True)
        with pytest.raises(ValueError):
            P.Alt(options=(P.Alt(options=(P.literal("a"), P.literal("b"))), P.literal("c")))


class TestTreeOps:
    def setup_method(self):
        self.t = P.parse("(?:ab)*")

    def test_walk_preorder(self):
        kinds = [n.kind for _, n in P.walk(self.t)]
        assert kinds == ["star", "group", "concat", "literal", "literal"]

    def test_collect_internal_nodes(self):
        assert P.collect_internal_nodes(self.t) == [(), (0,), (0, 0)]

    def test_extract_context_nearest_first(self):
        assert P.extract_context(self.t, (0, 0)) == ("group", "star")
        assert P.extract_context(self.t, (0, 0, 1)) == ("concat", "group")
        assert P.extract_context(self.t, ()) == ()

    def test_node_at(self):
        assert P.node_at(self.t, (0, 0, 1)) == P.Literal(byte=0x62)
        with pytest.raises(ValueError):
            P.node_at(self.t, (5,))

    def test_replace_shares_siblings(self):
        t = P.parse("(?:a|b)c")
        t2 = P.replace(t, (1,), P.literal("d"))
        assert P.serialize(t2) == "(?:a|b)d"
        # the untouched alternation subtree is the same object, not a copy
        assert P.node_at(t2, (0,)) is P.node_at(t, (0,))

    def test_replace_root(self):
        assert P.replace(self.t, (), P.literal("z")) == P.Literal(byte=0x7A)

    def test_replace_atomizes_for_quantifier_slot(self):
        t2 = P.replace(self.t, (0,), P.concat([P.literal("x"), P.literal("y")]))
        assert P.serialize(t2) == "(?:xy)*"

    def test_is_kleene_fragment(self):
        assert P.is_kleene_fragment(self.t)
        assert not P.is_kleene_fragment(P.parse("^a"))
        assert not P.is_kleene_fragment(P.parse("ab$"))

    def test_node_count(self):
        assert P.node_count(self.t) == 5


class TestCharClassRanges:
    def test_merge_and_sort(self):
        items = ((0x63, 0x65), (0x61, 0x62), (0x64, 0x66))
        assert P.char_class_ranges(items, False) == ((0x61, 0x66),)

    def test_complement(self):
        ranges = P.char_class_ranges(((0x00, 0x10),), True)
        assert ranges == ((0x11, 0xFF),)

    def test_complement_interior(self):
        ranges = P.char_class_ranges(((0x61, 0x63),), True)
        assert ranges == ((0x00, 0x60), (0x64, 0xFF))


class TestExpandRepeats:
    def test_exact(self):
        t = P.expand_repeats(P.parse("a{3}"))
        assert P.serialize(t) == "aaa"

    def test_open_ended(self):
        t = P.expand_repeats(P.parse("a{2,}"))
        assert P.serialize(t) == "aaa*"

    def test_ranged(self):
        t = P.expand_repeats(P.parse("a{1,3}"))
        # one mandatory copy then nested optionals
        assert P.serialize(t) == "a(?:aa?)?"

    def test_zero_min(self):
        t = P.expand_repeats(P.parse("a{0,2}"))
        assert P.serialize(t) == "(?:aa?)?"

    def test_no_repeats_is_identity(self):
        t = P.parse("(?:a|b)*c")
        assert P.expand_repeats(t) is t

    def test_too_large(self):
        with pytest.raises(P.PatternTooLarge):
            P.expand_repeats(P.parse("(?:a{70}){70}"))
        with pytest.raises(P.PatternTooLarge):
            P.expand_repeats(P.parse("a{99999}"))


class TestRandomPattern:
    def test_budget_bound(self):
        for seed in range(200):
            for budget in (1, 2, 3, 5, 8, 13, 21):
                t = P.random_pattern(random.Random(seed), budget)
                assert P.node_count(t) <= budget

    def test_deterministic(self):
        a = P.random_pattern(random.Random(42), 12)
        b = P.random_pattern(random.Random(42), 12)
        assert a == b
        assert P.serialize(a) == ".9*"

    def test_anchor_free_and_greedy(self):
        for seed in range(200):
            t = P.random_pattern(random.Random(seed), 16)
            for _, n in P.walk(t):
                assert n.kind not in ("anchor-start", "anchor-end")
                if hasattr(n, "greedy"):
                    assert n.greedy

    def test_alphabet_restriction(self):
        t = P.random_pattern(random.Random(7), 20, alphabet=b"ab")
        for _, n in P.walk(t):
            if n.kind == "literal":
                assert n.byte in b"ab"
