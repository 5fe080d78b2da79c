import datetime as dt
import math
from collections import Counter

import numpy as np
import pytest

from adscreen.cohort import ObservationWindow
from adscreen.features import (
    PairVocabulary,
    encode_pair,
    load_vocabulary,
    save_vocabulary,
    scan_patient,
    scan_record,
    select_vocabulary,
    select_vocabulary_from_keys,
    tfidf_weight,
    vector_from_keys,
    vectorize,
)
from adscreen.lexicon import Lexicon, LexiconEntry
from adscreen.matcher import compile_matcher
from adscreen.records import Note, PatientRecord

D = dt.date


def record(birth, notes):
    return PatientRecord(
        patient_id="p1",
        birth_date=birth,
        sex="male",
        race="white",
        ethnicity="not_hispanic_or_latino",
        notes=[Note(d, "primary_care", 300, text) for d, text in notes],
    )


def window(start, end):
    return ObservationWindow(start=start, end=end, clean_years=0)


@pytest.fixture
def mini_matcher():
    return compile_matcher(
        Lexicon([LexiconEntry("memory", "cognition_memory"), LexiconEntry("mood", "mood")])
    )


class TestScanPatient:
    def test_integer_age_pairing(self, mini_matcher):
        rec = record(D(1940, 3, 1), [(D(2010, 5, 1), "memory concern noted")])
        pairs = scan_patient(rec, window(D(2000, 1, 1), D(2015, 1, 1)), mini_matcher)
        assert pairs == Counter({("memory", 70): 1})

    def test_age_floors_before_birthday(self, mini_matcher):
        rec = record(D(1940, 3, 1), [(D(2010, 2, 28), "memory")])
        pairs = scan_patient(rec, None, mini_matcher)
        assert pairs == Counter({("memory", 69): 1})

    def test_note_after_window_excluded(self, mini_matcher):
        rec = record(D(1940, 3, 1), [(D(2016, 1, 1), "memory")])
        pairs = scan_patient(rec, window(D(2000, 1, 1), D(2015, 12, 31)), mini_matcher)
        assert pairs == Counter()

    def test_window_end_inclusive(self, mini_matcher):
        rec = record(D(1940, 3, 1), [(D(2015, 12, 31), "memory")])
        pairs = scan_patient(rec, window(D(2000, 1, 1), D(2015, 12, 31)), mini_matcher)
        assert sum(pairs.values()) == 1

    def test_same_keyword_two_years_two_pairs(self, mini_matcher):
        rec = record(
            D(1940, 3, 1),
            [(D(2010, 5, 1), "good mood"), (D(2012, 5, 1), "mood dysphoric")],
        )
        pairs = scan_patient(rec, None, mini_matcher)
        assert pairs == Counter({("mood", 70): 1, ("mood", 72): 1})

    def test_note_filter(self, mini_matcher):
        rec = record(D(1940, 3, 1), [(D(2010, 5, 1), "memory")])
        rec.notes[0] = Note(D(2010, 5, 1), "neurology", 302, "memory")
        assert scan_patient(rec, None, mini_matcher, note_filter=("primary_care",)) == Counter()
        assert sum(scan_patient(rec, None, mini_matcher, note_filter=("neurology",)).values()) == 1

    def test_keyword_mask(self, mini_matcher):
        rec = record(D(1940, 3, 1), [(D(2010, 5, 1), "memory and mood")])
        scanned = scan_record(rec, mini_matcher)
        keys, counts = scanned.pair_keys(kw_mask=np.array([True, False]))
        assert len(keys) == 1 and counts.tolist() == [1]


class TestSelectVocabulary:
    def test_top_k_by_document_frequency(self):
        keywords = ["a", "b", "c"]
        rows = (
            [Counter({("a", 70): 1, ("b", 70): 2})] * 3
            + [Counter({("b", 70): 1})] * 0
            + [Counter({("c", 70): 4})]
        )
        # df: (a,70)=3, (b,70)=3, (c,70)=1
        vocab = select_vocabulary(rows, 2, keywords)
        assert vocab.pairs == [("a", 70), ("b", 70)]
        assert vocab.doc_freq.tolist() == [3, 3]
        assert vocab.n_train == 4

    def test_tie_broken_lexicographically(self):
        rows = [Counter({("b", 70): 1, ("a", 71): 1})] * 2
        vocab = select_vocabulary(rows, 1, ["a", "b"])
        assert vocab.pairs == [("a", 71)]

    def test_age_breaks_ties_within_keyword(self):
        rows = [Counter({("a", 72): 1, ("a", 70): 1})] * 2
        vocab = select_vocabulary(rows, 1, ["a"])
        assert vocab.pairs == [("a", 70)]

    def test_fewer_than_k_returns_all_with_warning(self, caplog):
        import logging

        rows = [Counter({("a", 70): 1})]
        with caplog.at_level(logging.WARNING, logger="adscreen.features"):
            vocab = select_vocabulary(rows, 1000, ["a"])
        assert len(vocab) == 1
        assert any("distinct pairs" in r.message for r in caplog.records)

    def test_doc_freq_counts_rows_not_occurrences(self):
        rows = [Counter({("a", 70): 50}), Counter({("a", 70): 1}), Counter()]
        vocab = select_vocabulary(rows, 5, ["a"])
        assert vocab.doc_freq.tolist() == [2]
        assert vocab.n_train == 3


class TestTfidf:
    def test_formula(self):
        assert tfidf_weight(2, 10, 100) == pytest.approx(2 * math.log(10.0))

    def test_zero_when_df_equals_n(self):
        assert tfidf_weight(5, 100, 100) == 0.0

    def test_zero_count(self):
        assert tfidf_weight(0, 10, 100) == 0.0

    def test_df_zero_rejected(self):
        with pytest.raises(ValueError):
            tfidf_weight(1, 0, 100)

    def test_df_above_n_rejected(self):
        with pytest.raises(ValueError):
            tfidf_weight(1, 101, 100)


def small_vocab():
    keys = np.array([encode_pair(0, 70), encode_pair(1, 70)], dtype=np.int32)
    return PairVocabulary(
        pairs=[("a", 70), ("b", 70)], doc_freq=np.array([10, 50]), n_train=100, keys=keys
    )


class TestVectorize:
    def test_empty_patient_gives_zero_vector(self):
        fv = vectorize(Counter(), small_vocab())
        assert np.array_equal(fv.values, np.zeros(2))

    def test_single_pair_single_entry(self):
        fv = vectorize(Counter({("a", 70): 3}), small_vocab())
        assert fv.values[0] == pytest.approx(3 * math.log(10.0))
        assert fv.values[1] == 0.0

    def test_out_of_vocabulary_dropped(self):
        fv = vectorize(Counter({("zzz", 70): 5, ("a", 99): 2}), small_vocab())
        assert np.array_equal(fv.values, np.zeros(2))

    def test_linearity_in_counts(self):
        base = Counter({("a", 70): 2, ("b", 70): 5})
        doubled = Counter({k: 2 * v for k, v in base.items()})
        v1 = vectorize(base, small_vocab()).values
        v2 = vectorize(doubled, small_vocab()).values
        assert np.allclose(v2, 2 * v1)

    def test_fast_path_agrees_with_vectorize(self):
        vocab = small_vocab()
        keys = np.array([encode_pair(0, 70)], dtype=np.int32)
        counts = np.array([3])
        assert np.allclose(
            vector_from_keys(keys, counts, vocab),
            vectorize(Counter({("a", 70): 3}), vocab).values,
        )


class TestWindowMonotonicity:
    def test_shrinking_window_never_increases_counts(self, small_data, matcher):
        cfg, data = small_data
        rng = np.random.default_rng(0)
        pids = sorted(data)[:40]
        for pid in pids:
            scanned = data[pid].scanned
            lo = dt.date.fromordinal(int(scanned.note_dates[0]))
            hi = dt.date.fromordinal(int(scanned.note_dates[-1]))
            mid1 = lo + (hi - lo) / 3
            mid2 = lo + 2 * (hi - lo) / 3
            outer = ObservationWindow(lo, hi, 0)
            inner = ObservationWindow(mid1, mid2, 0)
            keys_o, counts_o = scanned.pair_keys(outer)
            keys_i, counts_i = scanned.pair_keys(inner)
            outer_map = dict(zip(keys_o.tolist(), counts_o.tolist()))
            for k, c in zip(keys_i.tolist(), counts_i.tolist()):
                assert c <= outer_map.get(k, 0)


class TestVocabularyIO:
    def test_round_trip(self, tmp_path):
        vocab = small_vocab()
        path = tmp_path / "vocab.csv"
        save_vocabulary(vocab, str(path))
        loaded = load_vocabulary(str(path), ["a", "b"])
        assert loaded.pairs == vocab.pairs
        assert loaded.doc_freq.tolist() == vocab.doc_freq.tolist()
        assert loaded.n_train == vocab.n_train
        assert np.allclose(loaded.idf, vocab.idf)


class TestScannedCorpusConsistency:
    def test_scan_counts_match_emissions(self, small_data, lexicon):
        # generator emissions are recovered exactly by the scanner: totals per
        # patient equal the matcher totals over the full note text
        cfg, data = small_data
        m = compile_matcher(lexicon)
        for pid in sorted(data)[:20]:
            d = data[pid]
            assert len(d.scanned.hit_kw) > 0
