import pytest

from adscreen.errors import ConfigError
from adscreen.lexicon import GROUPS, Lexicon, LexiconEntry, default_lexicon, load_lexicon, save_lexicon

from .util import naive_find


def test_default_lexicon_is_valid():
    lex = default_lexicon()
    assert len(lex) >= 50
    assert len(set(lex.keywords)) == len(lex)
    for e in lex:
        assert e.keyword == e.keyword.lower()
        assert e.group in GROUPS


def test_core_terms_present():
    kws = set(default_lexicon().keywords)
    for k in ("memory", "mood", "concentration", "speaking", "language", "affect",
              "judgement", "mmse", "mini-cog", "forgetfulness", "depression"):
        assert k in kws


def test_every_group_represented():
    lex = default_lexicon()
    assert {e.group for e in lex} == set(GROUPS)


def test_cognitive_test_flags():
    lex = default_lexicon()
    assert lex.is_cognitive_test("mmse")
    assert lex.is_cognitive_test("mini-cog")
    assert not lex.is_cognitive_test("memory")


def test_no_boundary_substring_collisions():
    # generator fidelity precondition: no default keyword may match inside
    # another, otherwise emitted counts and scanned counts diverge
    kws = default_lexicon().keywords
    for i, a in enumerate(kws):
        for j, b in enumerate(kws):
            if i != j:
                assert naive_find([a], b) == [], f"{a!r} matches inside {b!r}"


def test_multiword_component_tokens_are_not_keywords():
    # adjacency of an emitted keyword and filler must not form another keyword
    kws = set(default_lexicon().keywords)
    for kw in kws:
        for token in kw.replace("-", " ").split():
            if token != kw:
                assert token not in kws


def test_without_cognitive_tests():
    lex = default_lexicon().without_cognitive_tests()
    assert all(not e.is_cognitive_test for e in lex)
    assert "mmse" not in lex


def test_subset():
    lex = default_lexicon().subset(["memory", "mood"])
    assert lex.keywords == ["memory", "mood"]
    with pytest.raises(ConfigError):
        default_lexicon().subset(["nonexistent"])


def test_validation_rejects_bad_entries():
    with pytest.raises(ConfigError):
        Lexicon([LexiconEntry("Memory", "mood")])  # not lowercase
    with pytest.raises(ConfigError):
        Lexicon([LexiconEntry("memory", "not_a_group")])
    with pytest.raises(ConfigError):
        Lexicon([LexiconEntry("memory", "mood"), LexiconEntry("memory", "mood")])
    with pytest.raises(ConfigError):
        Lexicon([LexiconEntry("a  b", "mood")])


def test_file_round_trip(tmp_path):
    lex = default_lexicon()
    path = tmp_path / "lexicon.tsv"
    save_lexicon(lex, str(path))
    loaded = load_lexicon(str(path))
    assert loaded.keywords == lex.keywords
    assert [e.group for e in loaded] == [e.group for e in lex]
    assert [e.is_cognitive_test for e in loaded] == [e.is_cognitive_test for e in lex]


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("memory\tmood\n")  # missing flag column
    with pytest.raises(ConfigError):
        load_lexicon(str(path))
