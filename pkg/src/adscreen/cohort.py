"""Case ascertainment, inclusion screening, 1:9 control matching, and
observation-window framing.

Ascertainment: a patient is a case iff they have at least one coded
dementia diagnosis at a dementia clinic, or at least two on distinct dates
with at least one from a specialty clinic staffed by a permitted provider
type. The index date is the earliest qualifying patient's dementia
diagnosis, and must fall inside the configured index period.

Matching: controls must agree on sex and first-visit year, have a birth
year within the configured age tolerance of the case's (equivalent to age
at the index year +/- tolerance), and have at least one visit in the
case's diagnosis year. Sampling prefers controls not yet used by earlier
cases so matched groups stay mostly disjoint (which keeps group-level
train/test splitting meaningful); when a stratum is exhausted it falls
back to reusing controls, so one control can serve several cases. Within
one case controls are never repeated.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np

from .dates import add_years
from .errors import ConfigError, DataError
from .records import DiagnosisEvent

log = logging.getLogger(__name__)

PATH_SINGLE = "single_dementia_clinic"
PATH_MULTI = "multi_with_specialty"

DEFAULT_AD_CODES = frozenset(("G30.0", "G30.1", "G30.8", "G30.9"))
DEFAULT_PROVIDERS = frozenset(
    ("neurology", "vascular_neurology", "psychiatry", "neuropsychology", "geriatric_medicine")
)


@dataclass(frozen=True)
class CaseRecord:
    patient_id: str
    index_date: dt.date
    ascertainment_path: str


@dataclass
class CohortPair:
    case: CaseRecord
    control_ids: list[str]


@dataclass(frozen=True)
class ObservationWindow:
    start: dt.date
    end: dt.date  # inclusive
    clean_years: int


@dataclass
class CohortConfig:
    match_ratio: int = 9
    index_start: dt.date = dt.date(2016, 1, 1)
    index_end: dt.date = dt.date(2021, 10, 1)
    min_history_years: int = 5
    continuity_gap_years: float = 3.0
    age_tolerance_years: int = 1
    strict_matching: bool = False
    control_reuse: str = "prefer_unused"  # or "always_uniform"
    ad_codes: frozenset = DEFAULT_AD_CODES
    permitted_providers: frozenset = DEFAULT_PROVIDERS

    def validate(self) -> None:
        if self.match_ratio < 1:
            raise ConfigError("match_ratio must be >= 1")
        if self.control_reuse not in ("prefer_unused", "always_uniform"):
            raise ConfigError(f"unknown control_reuse mode {self.control_reuse!r}")
        if self.min_history_years < 0 or self.continuity_gap_years <= 0:
            raise ConfigError("history requirements must be positive")


def ascertain_cases(
    diagnoses_by_patient: dict[str, list[DiagnosisEvent]], config: CohortConfig
) -> list[CaseRecord]:
    """Apply the two-route case rule; non-qualifying patients are absent.

    Patients whose earliest coded dementia diagnosis falls outside the
    configured index period are not cases either.
    """
    out: list[CaseRecord] = []
    for pid in sorted(diagnoses_by_patient):
        events = [e for e in diagnoses_by_patient[pid] if e.icd_code in config.ad_codes]
        if not events:
            continue
        single_route = any(e.is_dementia_clinic for e in events)
        distinct_dates = {e.date for e in events}
        anchored = any(
            e.is_specialty_clinic and e.provider_type in config.permitted_providers for e in events
        )
        multi_route = len(distinct_dates) >= 2 and anchored
        if not (single_route or multi_route):
            continue
        index_date = min(distinct_dates)
        if not (config.index_start <= index_date <= config.index_end):
            continue
        path = PATH_MULTI if multi_route else PATH_SINGLE
        out.append(CaseRecord(pid, index_date, path))
    return out


def apply_inclusion(
    case: CaseRecord, note_dates: list[dt.date], config: CohortConfig
) -> tuple[bool, str]:
    """History check: >= min_history_years of notes before the index date,
    with no inter-note gap (including last note to index) above the
    continuity threshold. Returns (included, reason-if-not).
    """
    dates = sorted(d for d in note_dates if d <= case.index_date)
    if not dates:
        return False, "no_pre_index_notes"
    if add_years(dates[0], config.min_history_years) > case.index_date:
        return False, "insufficient_history"
    max_gap_days = config.continuity_gap_years * 365.2425
    prev = dates[0]
    for d in dates[1:] + [case.index_date]:
        if (d - prev).days > max_gap_days:
            return False, "history_gap"
        prev = d
    return True, ""


@dataclass
class ControlCandidate:
    patient_id: str
    sex: str
    birth_year: int
    first_visit_year: int
    visit_years: frozenset[int]


class ControlPool:
    """Pre-indexed pool of never-diagnosed patients for matching."""

    def __init__(self, candidates: list[ControlCandidate], config: CohortConfig):
        self.config = config
        self._by_stratum: dict[tuple[str, int, int], list[ControlCandidate]] = {}
        for c in candidates:
            key = (c.sex, c.first_visit_year, c.birth_year)
            self._by_stratum.setdefault(key, []).append(c)
        for bucket in self._by_stratum.values():
            bucket.sort(key=lambda c: c.patient_id)
        self._used: set[str] = set()

    def eligible(self, case_sex: str, case_birth_year: int, case_first_visit_year: int,
                 diagnosis_year: int) -> list[ControlCandidate]:
        tol = self.config.age_tolerance_years
        out: list[ControlCandidate] = []
        for by in range(case_birth_year - tol, case_birth_year + tol + 1):
            for c in self._by_stratum.get((case_sex, case_first_visit_year, by), ()):
                if diagnosis_year in c.visit_years:
                    out.append(c)
        return out

    def draw(self, eligible: list[ControlCandidate], ratio: int, rng: np.random.Generator) -> list[str]:
        if self.config.control_reuse == "prefer_unused":
            fresh = [c for c in eligible if c.patient_id not in self._used]
            if len(fresh) >= ratio:
                picks = [fresh[i] for i in rng.choice(len(fresh), size=ratio, replace=False)]
            else:
                picks = list(fresh)
                reused = [c for c in eligible if c.patient_id in self._used]
                need = ratio - len(picks)
                if reused:
                    take = min(need, len(reused))
                    picks += [reused[i] for i in rng.choice(len(reused), size=take, replace=False)]
        else:
            take = min(ratio, len(eligible))
            picks = [eligible[i] for i in rng.choice(len(eligible), size=take, replace=False)]
        for c in picks:
            self._used.add(c.patient_id)
        return [c.patient_id for c in picks]


def match_controls(
    case: CaseRecord,
    case_meta: ControlCandidate,
    pool: ControlPool,
    ratio: int,
    rng: np.random.Generator,
) -> CohortPair:
    """Draw up to `ratio` matched controls for one case.

    Shortfalls produce a partial pair with a logged warning, or a DataError
    in strict mode.
    """
    eligible = pool.eligible(
        case_meta.sex, case_meta.birth_year, case_meta.first_visit_year, case.index_date.year
    )
    ids = pool.draw(eligible, ratio, rng)
    if len(ids) < ratio:
        if pool.config.strict_matching:
            raise DataError(
                f"case {case.patient_id}: only {len(ids)} eligible controls for ratio {ratio}"
            )
        log.warning("case %s: partial match %d/%d controls", case.patient_id, len(ids), ratio)
    return CohortPair(case=case, control_ids=ids)


def frame_window(
    index_date: dt.date,
    clean_years: int,
    *,
    study_start: dt.date,
    earliest_note: dt.date,
    min_history_years: int = 5,
) -> tuple[ObservationWindow, bool]:
    """Build the predictor window for one patient at a clean horizon.

    The window runs from the study start to clean_years calendar years
    before the index date (the day before it when clean_years is 0).
    Returns (window, eligible); eligible is False when the patient has
    less than min_history_years of history inside the window. Controls
    call this with their matched case's index date.
    """
    if not 0 <= clean_years <= 10:
        raise ValueError(f"clean_years must be in 0..10, got {clean_years}")
    if clean_years == 0:
        end = index_date - dt.timedelta(days=1)
    else:
        end = add_years(index_date, -clean_years)
    window = ObservationWindow(start=study_start, end=end, clean_years=clean_years)
    history_start = max(study_start, earliest_note)
    eligible = add_years(history_start, min_history_years) <= end
    return window, eligible


@dataclass
class CohortBuild:
    pairs: list[CohortPair]
    exclusions: list[tuple[str, str]]  # (patient_id, reason)
    n_qualifying: int = 0
    partial_cases: list[str] = field(default_factory=list)


def build_cohort(
    diagnoses_by_patient: dict[str, list[DiagnosisEvent]],
    meta_by_patient: dict[str, ControlCandidate],
    note_dates_by_patient: dict[str, list[dt.date]],
    config: CohortConfig,
    seed: int,
) -> CohortBuild:
    """Run ascertainment, inclusion and matching over a whole corpus.

    Every ascertained case (included or not) is barred from the control
    pool: a diagnosed patient never serves as a control, even for periods
    before their own diagnosis.
    """
    config.validate()
    cases = ascertain_cases(diagnoses_by_patient, config)
    case_ids = {c.patient_id for c in cases}

    exclusions: list[tuple[str, str]] = []
    included: list[CaseRecord] = []
    for case in cases:
        ok, reason = apply_inclusion(case, note_dates_by_patient[case.patient_id], config)
        if ok:
            included.append(case)
        else:
            exclusions.append((case.patient_id, reason))

    pool = ControlPool(
        [m for pid, m in sorted(meta_by_patient.items()) if pid not in case_ids], config
    )

    pairs: list[CohortPair] = []
    partial: list[str] = []
    for i, case in enumerate(included):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        pair = match_controls(case, meta_by_patient[case.patient_id], pool, config.match_ratio, rng)
        if len(pair.control_ids) < config.match_ratio:
            partial.append(case.patient_id)
        if pair.control_ids:
            pairs.append(pair)
        else:
            exclusions.append((case.patient_id, "no_matched_controls"))
    return CohortBuild(pairs=pairs, exclusions=exclusions, n_qualifying=len(cases), partial_cases=partial)
