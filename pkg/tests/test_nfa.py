"""Thompson construction, simulation, and probe-string generation."""
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import deriv_accepts
from rexfuzz import pattern as P
from rexfuzz.nfa import (
    GenLimits,
    Matcher,
    NonKleeneInput,
    compile_nfa,
    negative_strings,
    positive_strings,
)


class TestCompile:
    def test_single_start_single_accept(self):
        nfa = compile_nfa(P.parse("(?:a|b)*c"))
        assert 0 <= nfa.start < nfa.num_states
        assert 0 <= nfa.accept < nfa.num_states

    def test_state_count_bound(self):
        for seed in range(120):
            ast = P.random_pattern(random.Random(seed), 18)
            expanded = P.expand_repeats(ast)
            nfa = compile_nfa(ast)
            assert nfa.num_states <= 2 + 2 * P.node_count(expanded)

    def test_fail_has_no_path(self):
        nfa = compile_nfa(P.parse("(?!)"))
        assert not Matcher(nfa).accepts(b"")
        assert positive_strings(nfa, GenLimits()) == []

    def test_anchors_rejected(self):
        with pytest.raises(NonKleeneInput):
            compile_nfa(P.parse("^a"))
        with pytest.raises(NonKleeneInput):
            compile_nfa(P.parse("a$"))

    def test_repeats_expand(self):
        nfa = compile_nfa(P.parse("a{2,3}"))
        m = Matcher(nfa)
        assert not m.accepts(b"a")
        assert m.accepts(b"aa")
        assert m.accepts(b"aaa")
        assert not m.accepts(b"aaaa")

    def test_oversized_repeat_propagates(self):
        with pytest.raises(P.PatternTooLarge):
            compile_nfa(P.parse("a{99999}"))


class TestMatcher:
    @pytest.mark.parametrize(
        "src,yes,no",
        [
            ("a*b", [b"b", b"ab", b"aaab"], [b"", b"a", b"ba"]),
            ("(?:a|b)*abb", [b"abb", b"babb", b"ababb"], [b"ab", b"bb", b"abba"]),
            (".", [b"a", b"\x00", b"\xff"], [b"", b"\n", b"ab"]),
            ("[^a-c]", [b"d", b"\n"], [b"a", b"c", b""]),
            ("x{2,}", [b"xx", b"xxxx"], [b"x", b""]),
        ],
    )
    def test_membership(self, src, yes, no):
        m = Matcher(compile_nfa(P.parse(src)))
        for s in yes:
            assert m.accepts(s), (src, s)
        for s in no:
            assert not m.accepts(s), (src, s)

    def test_agrees_with_derivative_oracle(self):
        rng = random.Random(9)
        for seed in range(150):
            ast = P.random_pattern(random.Random(seed), 12)
            m = Matcher(compile_nfa(ast))
            probes = positive_strings(compile_nfa(ast), GenLimits(max_strings=4))
            probes += [bytes(rng.randrange(97, 103) for _ in range(rng.randrange(0, 6)))
                       for _ in range(4)]
            for s in probes:
                assert m.accepts(s) == deriv_accepts(ast, s), (P.serialize(ast), s)


class TestPositiveStrings:
    def test_star_two_iterations(self):
        nfa = compile_nfa(P.parse("a*"))
        assert positive_strings(nfa, GenLimits()) == [b"", b"a", b"aa"]

    def test_star_without_loopback_targeting(self):
        nfa = compile_nfa(P.parse("a*"))
        assert positive_strings(nfa, GenLimits(star_unroll=1)) == [b"", b"a"]

    def test_class_boundary_representatives(self):
        nfa = compile_nfa(P.parse("[a-c]x"))
        assert positive_strings(nfa, GenLimits()) == [b"ax", b"cx"]

    def test_alternation_branches_covered(self):
        pos = positive_strings(compile_nfa(P.parse("(?:ab|cd)(?:e|f)")), GenLimits())
        joined = b" ".join(pos)
        for needle in (b"ab", b"cd", b"e", b"f"):
            assert needle in joined, (pos, needle)

    def test_empty_language_yields_nothing(self):
        assert positive_strings(compile_nfa(P.parse("x(?!)")), GenLimits()) == []

    def test_epsilon_language(self):
        assert positive_strings(compile_nfa(P.parse("(?:)")), GenLimits()) == [b""]

    def test_all_members(self):
        for seed in range(120):
            ast = P.random_pattern(random.Random(seed), 14)
            nfa = compile_nfa(ast)
            m = Matcher(nfa)
            for s in positive_strings(nfa, GenLimits()):
                assert m.accepts(s), (P.serialize(ast), s)
                assert deriv_accepts(ast, s), (P.serialize(ast), s)

    def test_caps_respected(self):
        lim = GenLimits(max_strings=3, max_string_len=5)
        for src in ("(?:a|b)*abb", "(?:ab|cd|ef|gh)+x?"):
            pos = positive_strings(compile_nfa(P.parse(src)), lim)
            assert len(pos) <= 3
            assert all(len(s) <= 5 for s in pos)

    def test_deterministic(self):
        nfa = compile_nfa(P.parse("(?:a|b)*abb"))
        a = positive_strings(nfa, GenLimits())
        b = positive_strings(nfa, GenLimits())
        assert a == b

    def test_no_duplicates(self):
        for src in ("(?:a|b)*abb", "a*b*", "(?:ab)*"):
            pos = positive_strings(compile_nfa(P.parse(src)), GenLimits())
            assert len(pos) == len(set(pos))


class TestNegativeStrings:
    def test_golden(self):
        ast = P.parse("(?:a|b)c")
        pos = positive_strings(compile_nfa(ast), GenLimits())
        neg = negative_strings(ast, pos, random.Random(0), GenLimits())
        assert neg == [b"b", b"bcc", b"a", b"acc", b"", b"bc\x9b"]

    def test_all_rejected(self):
        for seed in range(120):
            ast = P.random_pattern(random.Random(seed), 14)
            nfa = compile_nfa(ast)
            pos = positive_strings(nfa, GenLimits())
            neg = negative_strings(ast, pos, random.Random(seed), GenLimits())
            m = Matcher(nfa)
            for s in neg:
                assert not m.accepts(s), (P.serialize(ast), s)
                assert not deriv_accepts(ast, s), (P.serialize(ast), s)

    def test_empty_string_probe_when_rejected(self):
        ast = P.parse("ab")
        pos = positive_strings(compile_nfa(ast), GenLimits())
        neg = negative_strings(ast, pos, random.Random(0), GenLimits())
        assert b"" in neg

    def test_deterministic_for_seed(self):
        ast = P.parse("(?:a|b)*abb")
        pos = positive_strings(compile_nfa(ast), GenLimits())
        a = negative_strings(ast, pos, random.Random(5), GenLimits())
        b = negative_strings(ast, pos, random.Random(5), GenLimits())
        assert a == b

    def test_class_boundary_probes(self):
        # bytes just outside [b-d] are natural off-by-one bait
        ast = P.parse("[b-d]")
        pos = positive_strings(compile_nfa(ast), GenLimits())
        neg = negative_strings(ast, pos, random.Random(1), GenLimits())
        assert b"a" in neg or b"e" in neg


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_generation_pipeline_property(seed):
    """Members accepted, near-misses rejected, by construction."""
    rng = random.Random(seed)
    ast = P.random_pattern(rng, 10)
    nfa = compile_nfa(ast)
    lim = GenLimits(max_strings=6)
    pos = positive_strings(nfa, lim)
    neg = negative_strings(ast, pos, rng, lim)
    m = Matcher(nfa)
    assert all(m.accepts(s) for s in pos)
    assert all(not m.accepts(s) for s in neg)
    assert len(pos) <= lim.max_strings and len(neg) <= lim.max_strings
