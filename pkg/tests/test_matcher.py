import numpy as np
import pytest

from adscreen.errors import ConfigError
from adscreen.lexicon import Lexicon, LexiconEntry, default_lexicon
from adscreen.matcher import BACKEND, KeywordMatcher, compile_matcher

from .util import naive_find


def lex(*keywords):
    return Lexicon([LexiconEntry(k, "other") for k in keywords])


def hits(matcher, text):
    return sorted((kw, pos) for kw, pos in matcher.find_all(text))


class TestBoundaries:
    def test_plain_word_match(self):
        m = compile_matcher(lex("mood"))
        assert m.find_all("good mood") == [("mood", 5)]

    def test_match_with_trailing_word(self):
        m = compile_matcher(lex("mood"))
        assert m.find_all("mood dysphoric") == [("mood", 0)]

    def test_no_match_inside_longer_word(self):
        m = compile_matcher(lex("mood"))
        assert m.find_all("moody") == []
        assert m.find_all("unmood") == []

    def test_case_insensitive(self):
        m = compile_matcher(lex("mmse"))
        assert m.count("MMSE today").sum() == 1
        assert np.array_equal(m.count("MMSE"), m.count("mmse"))

    def test_digit_is_word_char(self):
        m = compile_matcher(lex("mmse"))
        assert m.find_all("mmse30") == []
        assert m.find_all("mmse 30") == [("mmse", 0)]

    def test_punctuation_boundary(self):
        m = compile_matcher(lex("memory"))
        assert len(m.find_all("memory, memory. (memory)")) == 3

    def test_start_and_end_of_text(self):
        m = compile_matcher(lex("gait"))
        assert m.find_all("gait") == [("gait", 0)]


class TestMultiWord:
    def test_single_space_joins(self):
        m = compile_matcher(lex("memory loss"))
        assert m.find_all("notes memory loss today") == [("memory loss", 6)]

    def test_double_space_does_not_match(self):
        m = compile_matcher(lex("memory loss"))
        assert m.find_all("memory  loss") == []

    def test_hyphen_matched_literally(self):
        m = compile_matcher(lex("mini-cog"))
        assert m.find_all("Mini-Cog administered") == [("mini-cog", 0)]
        assert m.find_all("mini cog") == []

    def test_overlapping_patterns_both_count(self):
        m = compile_matcher(lex("memory", "memory loss"))
        found = hits(m, "has memory loss")
        assert ("memory", 4) in found
        assert ("memory loss", 4) in found


class TestCounts:
    def test_count_vector_indexing(self, lexicon, matcher):
        counts = matcher.count("memory Memory MEMORY memories")
        assert counts[lexicon.index_of("memory")] == 3
        assert counts.sum() == 3

    def test_count_accumulates_into_out(self):
        m = compile_matcher(lex("gait"))
        out = np.zeros(1, dtype=np.int64)
        m.count("gait", out=out)
        m.count("gait gait", out=out)
        assert out[0] == 3

    def test_empty_lexicon_rejected(self):
        with pytest.raises(ConfigError):
            Lexicon([])


def random_text(rng, keywords):
    vocab = ["alpha", "bravo", "moodless", "remember", "lossy", "x1", "-", "9mm",
             "word", "finding", "sleep", "screen", "cognitive", "Ünïcode", "木",
             "mem", "ory", "min", "cog", ".", ",", ";"]
    words = []
    for _ in range(rng.integers(3, 60)):
        r = rng.random()
        if r < 0.25:
            words.append(keywords[rng.integers(0, len(keywords))])
        else:
            words.append(vocab[rng.integers(0, len(vocab))])
    sep = [" ", " ", " ", "  ", ". ", ", ", "\n"]
    return "".join(w + sep[rng.integers(0, len(sep))] for w in words)


class TestOracleEquivalence:
    def test_fuzzed_texts_match_naive_scan(self, lexicon, matcher):
        rng = np.random.default_rng(42)
        kws = lexicon.keywords
        for _ in range(300):
            text = random_text(rng, kws)
            got = sorted((lexicon.index_of(kw), pos) for kw, pos in matcher.find_all(text))
            assert got == naive_find(kws, text)

    @pytest.mark.skipif(BACKEND != "compiled", reason="compiled core unavailable")
    def test_backend_parity(self, lexicon):
        rng = np.random.default_rng(11)
        fast = KeywordMatcher(lexicon, backend="compiled")
        slow = KeywordMatcher(lexicon, backend="python")
        for _ in range(100):
            text = random_text(rng, lexicon.keywords)
            assert fast.find_all(text) == slow.find_all(text)
            assert np.array_equal(fast.count(text), slow.count(text))

    def test_backend_attribute(self, lexicon):
        m = KeywordMatcher(lexicon)
        assert m.backend == BACKEND


def test_default_lexicon_compiles(lexicon):
    m = compile_matcher(lexicon)
    assert len(m) == len(lexicon)
