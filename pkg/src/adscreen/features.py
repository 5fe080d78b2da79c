"""Keyword-age pair extraction and TF-IDF featurization.

Pipeline: scan each patient's notes once over their whole history
(ScannedPatient keeps compact hit arrays, the raw text can be dropped),
then any observation window/note-type restriction is a cheap mask. A pair
is (keyword, integer age at the note date). Pairs are encoded as
``keyword_index * 128 + age`` (ages are capped at 120) so per-window
counting is a numpy unique over an int array.

Vocabulary selection ranks pairs by document frequency over the training
rows (number of training patients with at least one occurrence), keeps the
top K, and breaks ties lexicographically by (keyword, age). Feature values
are ``count * ln(n_train / doc_freq)``.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .cohort import ObservationWindow
from .dates import whole_years_between
from .errors import DataError
from .matcher import KeywordMatcher
from .records import NOTE_TYPES, PatientRecord

log = logging.getLogger(__name__)

AGE_BITS = 7  # ages 0..120 fit in 7 bits
AGE_MASK = (1 << AGE_BITS) - 1

NOTE_TYPE_INDEX = {t: i for i, t in enumerate(NOTE_TYPES)}


def encode_pair(kw_index: int, age: int) -> int:
    return (kw_index << AGE_BITS) | age


def decode_pair(key: int) -> tuple[int, int]:
    return key >> AGE_BITS, key & AGE_MASK


@dataclass
class ScannedPatient:
    """Hit-level scan result for one patient's full note history."""

    patient_id: str
    birth_date: dt.date
    note_dates: np.ndarray  # int32 date ordinals, ascending
    note_types: np.ndarray  # int8 index into NOTE_TYPES
    note_ages: np.ndarray  # int16 completed years at note date
    hit_note: np.ndarray  # int32 note index per keyword hit
    hit_kw: np.ndarray  # int16 keyword index per hit

    def n_notes(self) -> int:
        return len(self.note_dates)

    def note_mask(self, window: ObservationWindow | None, note_filter) -> np.ndarray:
        mask = np.ones(len(self.note_dates), dtype=bool)
        if window is not None:
            mask &= (self.note_dates >= window.start.toordinal()) & (
                self.note_dates <= window.end.toordinal()
            )
        if note_filter is not None:
            allowed = np.zeros(len(NOTE_TYPES), dtype=bool)
            for t in note_filter:
                allowed[NOTE_TYPE_INDEX[t]] = True
            mask &= allowed[self.note_types]
        return mask

    def pair_keys(self, window: ObservationWindow | None = None, note_filter=None,
                  kw_mask: np.ndarray | None = None):
        """Unique encoded pairs and their counts within a window/type filter.

        `kw_mask` (bool per keyword index) drops hits of masked-out keywords
        before counting (used by the cognitive-test ablation).
        """
        if len(self.hit_note) == 0:
            return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int64)
        keep = self.note_mask(window, note_filter)[self.hit_note]
        if kw_mask is not None:
            keep = keep & kw_mask[self.hit_kw]
        ages = self.note_ages[self.hit_note[keep]].astype(np.int32)
        kws = self.hit_kw[keep].astype(np.int32)
        keys = (kws << AGE_BITS) | ages
        return np.unique(keys, return_counts=True)


def scan_record(record: PatientRecord, matcher: KeywordMatcher) -> ScannedPatient:
    """Scan every note of a record in a single automaton pass.

    Note texts are joined with a newline (a non-word byte, so no match can
    straddle two notes) and hit offsets are mapped back to note indices.
    """
    n = len(record.notes)
    note_dates = np.empty(n, dtype=np.int32)
    note_types = np.empty(n, dtype=np.int8)
    note_ages = np.empty(n, dtype=np.int16)
    blobs = []
    for i, note in enumerate(record.notes):
        note_dates[i] = note.date.toordinal()
        note_types[i] = NOTE_TYPE_INDEX[note.note_type]
        note_ages[i] = min(max(whole_years_between(record.birth_date, note.date), 0), 120)
        blobs.append(note.text.lower().encode("utf-8"))
    if n == 0:
        empty32 = np.empty(0, dtype=np.int32)
        return ScannedPatient(
            record.patient_id, record.birth_date, note_dates, note_types, note_ages,
            empty32, np.empty(0, dtype=np.int16),
        )
    starts = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([len(b) + 1 for b in blobs], out=starts[1:])
    pids, offsets = matcher.find_bytes(b"\n".join(blobs))
    hit_note = (np.searchsorted(starts, offsets, side="right") - 1).astype(np.int32)
    return ScannedPatient(
        record.patient_id, record.birth_date, note_dates, note_types, note_ages,
        hit_note, pids.astype(np.int16),
    )


def scan_patient(
    record: PatientRecord,
    window: ObservationWindow | None,
    matcher: KeywordMatcher,
    note_filter=None,
) -> Counter:
    """Multiset of (keyword, age) pairs for one patient inside a window.

    Context is deliberately ignored: a negated or benign mention counts the
    same as a concerning one. `note_filter` restricts note types (None
    means all types).
    """
    scanned = scan_record(record, matcher)
    keys, counts = scanned.pair_keys(window, note_filter)
    out: Counter = Counter()
    for key, c in zip(keys.tolist(), counts.tolist()):
        kw_i, age = decode_pair(key)
        out[(matcher.keywords[kw_i], age)] = c
    return out


@dataclass
class PairVocabulary:
    """Top-K keyword-age pairs with document frequencies from training."""

    pairs: list[tuple[str, int]]
    doc_freq: np.ndarray  # int64, aligned with pairs
    n_train: int
    keys: np.ndarray  # int32 encoded pairs, aligned

    def __post_init__(self):
        self.idf = np.log(self.n_train / self.doc_freq.astype(np.float64))
        max_key = int(self.keys.max()) if len(self.keys) else 0
        self._col_of = np.full(max_key + 1, -1, dtype=np.int32)
        self._col_of[self.keys] = np.arange(len(self.keys), dtype=np.int32)

    def __len__(self) -> int:
        return len(self.pairs)

    def columns_for(self, keys: np.ndarray) -> np.ndarray:
        """Vocabulary column per encoded key; -1 for out-of-vocabulary."""
        cols = np.full(len(keys), -1, dtype=np.int32)
        in_range = keys <= (len(self._col_of) - 1)
        cols[in_range] = self._col_of[keys[in_range]]
        return cols


def tfidf_weight(count: float, doc_freq: int, n_train: int) -> float:
    """count * ln(n_train / doc_freq); zero iff count is 0 or df == n."""
    if doc_freq <= 0:
        raise ValueError("doc_freq must be >= 1")
    if doc_freq > n_train:
        raise ValueError("doc_freq cannot exceed n_train")
    return float(count) * float(np.log(n_train / doc_freq))


def select_vocabulary_from_keys(
    unique_keys_per_row, n_train: int, top_k: int, keywords: list[str]
) -> PairVocabulary:
    """Fast-path selection from pre-encoded per-row unique key arrays."""
    arrays = [k for k in unique_keys_per_row if len(k)]
    if not arrays:
        raise DataError("no keyword-age pairs in the training rows")
    all_keys = np.concatenate(arrays)
    keys, df = np.unique(all_keys, return_counts=True)
    if len(keys) < top_k:
        log.warning("only %d distinct pairs available (requested %d)", len(keys), top_k)
    kw_rank = np.argsort(np.argsort(np.asarray(keywords)))  # alphabetical rank per index
    kw_idx = keys >> AGE_BITS
    ages = keys & AGE_MASK
    order = np.lexsort((ages, kw_rank[kw_idx], -df))
    order = order[: min(top_k, len(keys))]
    keys, df = keys[order], df[order]
    pairs = [(keywords[k >> AGE_BITS], int(k & AGE_MASK)) for k in keys.tolist()]
    return PairVocabulary(pairs=pairs, doc_freq=df.astype(np.int64), n_train=n_train, keys=keys.astype(np.int32))


def select_vocabulary(training_pairs, top_k: int, keywords: list[str]) -> PairVocabulary:
    """Select the vocabulary from per-patient (keyword, age) multisets.

    `training_pairs` is an iterable of Counter/dict objects, training rows
    only; leaking test patients here invalidates the evaluation.
    """
    kw_index = {k: i for i, k in enumerate(keywords)}
    per_row = []
    n_rows = 0
    for multiset in training_pairs:
        n_rows += 1
        row_keys = np.array(
            [encode_pair(kw_index[kw], age) for (kw, age) in multiset.keys()], dtype=np.int32
        )
        per_row.append(row_keys)
    if n_rows == 0:
        raise DataError("no training rows")
    return select_vocabulary_from_keys(per_row, n_rows, top_k, keywords)


def vector_from_keys(keys: np.ndarray, counts: np.ndarray, vocab: PairVocabulary) -> np.ndarray:
    x = np.zeros(len(vocab), dtype=np.float64)
    if len(keys) == 0:
        return x
    cols = vocab.columns_for(keys)
    keep = cols >= 0
    x[cols[keep]] = counts[keep] * vocab.idf[cols[keep]]
    return x


@dataclass
class FeatureVector:
    values: np.ndarray
    patient_id: str = ""
    window: ObservationWindow | None = None


def vectorize(patient_pairs, vocab: PairVocabulary, patient_id: str = "",
              window: ObservationWindow | None = None) -> FeatureVector:
    """TF-IDF vector for one patient's (keyword, age) multiset."""
    values = np.zeros(len(vocab), dtype=np.float64)
    pair_col = {pair: i for i, pair in enumerate(vocab.pairs)}
    for pair, count in patient_pairs.items():
        col = pair_col.get(pair)
        if col is not None:
            values[col] = tfidf_weight(count, int(vocab.doc_freq[col]), vocab.n_train)
    return FeatureVector(values=values, patient_id=patient_id, window=window)


def save_vocabulary(vocab: PairVocabulary, path: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# n_train={vocab.n_train}\n")
        w = csv.writer(f)
        w.writerow(["rank", "keyword", "age", "doc_freq"])
        for rank, ((kw, age), df) in enumerate(zip(vocab.pairs, vocab.doc_freq.tolist()), 1):
            w.writerow([rank, kw, age, df])


def load_vocabulary(path: str, keywords: list[str]) -> PairVocabulary:
    kw_index = {k: i for i, k in enumerate(keywords)}
    pairs: list[tuple[str, int]] = []
    dfs: list[int] = []
    n_train = 0
    with open(path) as f:
        first = f.readline()
        if not first.startswith("# n_train="):
            raise DataError(f"{path}: missing n_train header")
        n_train = int(first.split("=", 1)[1])
        reader = csv.reader(f)
        header = next(reader)
        for row in reader:
            _, kw, age, df = row
            pairs.append((kw, int(age)))
            dfs.append(int(df))
    keys = np.array([encode_pair(kw_index[kw], age) for kw, age in pairs], dtype=np.int32)
    return PairVocabulary(pairs=pairs, doc_freq=np.array(dfs, dtype=np.int64), n_train=n_train, keys=keys)
