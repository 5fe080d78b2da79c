"""Keyword-occurrence trend curves over the years before diagnosis.

trend_by_year aligns every case (and its matched controls, which inherit
the case's index date) on the index date and reports the mean keyword
count per one-year bucket: bucket y covers [index - (y+1) years,
index - y years). A patient-bucket enters the mean only when the record
fully covers it (first note on/before the bucket start), so late entrants
do not bias means downward. With per-note normalization each patient-year
contributes count/notes instead of the raw count, skipping years with no
notes.

trend_by_age_group splits cases by age at diagnosis and plots against
absolute age instead of index offset, cutting each group at the case's
index date.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass

import numpy as np

from .cohort import CohortPair
from .dates import add_years
from .errors import ConfigError
from .features import NOTE_TYPE_INDEX, ScannedPatient

log = logging.getLogger(__name__)

NORMALIZATIONS = ("raw", "per_note")

DEFAULT_DIAGNOSIS_AGE_BANDS = (
    ("lt65", 0, 64),
    ("65_70", 65, 69),
    ("70_75", 70, 74),
    ("75_80", 75, 79),
    ("80_85", 80, 84),
    ("85_90", 85, 89),
    ("ge90", 90, 200),
)


@dataclass
class TrendCurve:
    offsets: np.ndarray  # signed year offsets (or absolute ages)
    case_mean: np.ndarray
    control_mean: np.ndarray
    case_n: np.ndarray
    control_n: np.ndarray
    normalization: str
    stratum: str = "all"
    axis: str = "offset"  # "offset" | "age"


class _Accumulator:
    def __init__(self, n_buckets: int):
        self.sum = np.zeros((2, n_buckets))
        self.n = np.zeros((2, n_buckets), dtype=np.int64)

    def add(self, arm: int, bucket: int, value: float) -> None:
        self.sum[arm, bucket] += value
        self.n[arm, bucket] += 1

    def curve(self, offsets: np.ndarray, normalization: str, stratum: str, axis: str) -> TrendCurve:
        with np.errstate(invalid="ignore"):
            means = np.where(self.n > 0, self.sum / np.maximum(self.n, 1), np.nan)
        return TrendCurve(
            offsets=offsets,
            case_mean=means[0],
            control_mean=means[1],
            case_n=self.n[0],
            control_n=self.n[1],
            normalization=normalization,
            stratum=stratum,
            axis=axis,
        )


def _type_mask(note_filter):
    if note_filter is None:
        return None
    mask = np.zeros(len(NOTE_TYPE_INDEX), dtype=bool)
    for t in note_filter:
        mask[NOTE_TYPE_INDEX[t]] = True
    return mask


def _bucket_counts(scanned: ScannedPatient, edges_ord: np.ndarray, type_mask):
    """(keyword hits, note count) per bucket delimited by edges_ord."""
    dates = scanned.note_dates
    keep = type_mask[scanned.note_types] if type_mask is not None else None
    hit_dates = dates[scanned.hit_note] if len(scanned.hit_note) else np.empty(0, dtype=np.int32)
    if keep is not None:
        dates = dates[keep]
        if len(hit_dates):
            hit_dates = hit_dates[keep[scanned.hit_note]]
    note_bins = np.searchsorted(dates, edges_ord)
    hit_bins = np.searchsorted(np.sort(hit_dates), edges_ord)
    return np.diff(hit_bins), np.diff(note_bins)


def trend_by_year(
    pairs: list[CohortPair],
    scanned_by_patient: dict[str, ScannedPatient],
    entry_by_patient: dict[str, dt.date],
    note_filter=None,
    normalization: str = "raw",
    max_years_back: int = 15,
    stratum: str = "all",
) -> TrendCurve:
    if not pairs:
        raise ConfigError("empty cohort")
    if normalization not in NORMALIZATIONS:
        raise ConfigError(f"unknown normalization {normalization!r}")
    type_mask = _type_mask(note_filter)
    n_buckets = max_years_back + 1
    acc = _Accumulator(n_buckets)
    for pair in pairs:
        anchor = pair.case.index_date
        # edges from index - (max+1) years up to index: bucket y is
        # [edges[max-y], edges[max-y+1])
        edges = [add_years(anchor, -(y + 1)) for y in range(max_years_back, -1, -1)]
        edges.append(anchor)
        edges_ord = np.array([e.toordinal() for e in edges], dtype=np.int64)
        # note dates are day-resolution ordinals; make the right edge of the
        # final bucket exclusive of the index date itself
        members = [(0, pair.case.patient_id)] + [(1, pid) for pid in pair.control_ids]
        for arm, pid in members:
            scanned = scanned_by_patient[pid]
            entry = entry_by_patient[pid]
            hit_counts, note_counts = _bucket_counts(scanned, edges_ord, type_mask)
            for slot in range(n_buckets):
                y = max_years_back - slot  # years before index for this slot
                if entry > edges[slot]:
                    continue  # record does not fully cover the bucket
                if normalization == "per_note":
                    if note_counts[slot] == 0:
                        continue
                    acc.add(arm, y, hit_counts[slot] / note_counts[slot])
                else:
                    acc.add(arm, y, float(hit_counts[slot]))
    offsets = -np.arange(n_buckets)  # bucket y reported at offset -y
    curve = acc.curve(offsets, normalization, stratum, "offset")
    # present offsets ascending (-max..0)
    order = np.argsort(curve.offsets)
    return TrendCurve(
        offsets=curve.offsets[order],
        case_mean=curve.case_mean[order],
        control_mean=curve.control_mean[order],
        case_n=curve.case_n[order],
        control_n=curve.control_n[order],
        normalization=normalization,
        stratum=stratum,
        axis="offset",
    )


def trend_by_age_group(
    pairs: list[CohortPair],
    scanned_by_patient: dict[str, ScannedPatient],
    entry_by_patient: dict[str, dt.date],
    birth_by_patient: dict[str, dt.date],
    bands=DEFAULT_DIAGNOSIS_AGE_BANDS,
    note_filter=None,
    normalization: str = "raw",
) -> list[TrendCurve]:
    """One curve pair per diagnosis-age band, on an absolute-age axis."""
    if not pairs:
        raise ConfigError("empty cohort")
    from .dates import whole_years_between

    type_mask = _type_mask(note_filter)
    curves: list[TrendCurve] = []
    for band, lo, hi in bands:
        band_pairs = [
            p
            for p in pairs
            if lo <= whole_years_between(birth_by_patient[p.case.patient_id], p.case.index_date) <= hi
        ]
        if not band_pairs:
            log.warning("diagnosis-age band %s is empty; omitted", band)
            continue
        ages = range(40, 101)
        acc = _Accumulator(len(ages))
        for pair in band_pairs:
            members = [(0, pair.case.patient_id)] + [(1, pid) for pid in pair.control_ids]
            for arm, pid in members:
                birth = birth_by_patient[pid]
                scanned = scanned_by_patient[pid]
                entry = entry_by_patient[pid]
                edges = [add_years(birth, a) for a in list(ages) + [ages[-1] + 1]]
                edges_ord = np.array([e.toordinal() for e in edges], dtype=np.int64)
                hit_counts, note_counts = _bucket_counts(scanned, edges_ord, type_mask)
                cut = pair.case.index_date  # stop at the case's diagnosis
                for slot, age in enumerate(ages):
                    if entry > edges[slot] or edges[slot + 1] > cut:
                        continue
                    if normalization == "per_note":
                        if note_counts[slot] == 0:
                            continue
                        acc.add(arm, slot, hit_counts[slot] / note_counts[slot])
                    else:
                        acc.add(arm, slot, float(hit_counts[slot]))
        curve = acc.curve(np.array(list(ages)), normalization, band, "age")
        present = (curve.case_n > 0) | (curve.control_n > 0)
        curves.append(
            TrendCurve(
                offsets=curve.offsets[present],
                case_mean=curve.case_mean[present],
                control_mean=curve.control_mean[present],
                case_n=curve.case_n[present],
                control_n=curve.control_n[present],
                normalization=normalization,
                stratum=band,
                axis="age",
            )
        )
    return curves


def write_trends_csv(curves: list[TrendCurve], path: str) -> None:
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["normalization", "stratum", "offset_or_age", "case_mean", "control_mean", "case_n", "control_n"]
        )
        for curve in curves:
            for i in range(len(curve.offsets)):
                cm = curve.case_mean[i]
                km = curve.control_mean[i]
                w.writerow(
                    [
                        curve.normalization,
                        curve.stratum,
                        int(curve.offsets[i]),
                        "" if np.isnan(cm) else f"{cm:.10g}",
                        "" if np.isnan(km) else f"{km:.10g}",
                        int(curve.case_n[i]),
                        int(curve.control_n[i]),
                    ]
                )
