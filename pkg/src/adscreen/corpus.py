"""Synthetic longitudinal EHR corpus generator.

Each patient gets a yearly grid of "buckets" anchored at their index date
(cases) or entry date (controls). Per bucket the generator draws a keyword
count from the trajectory rate, a note count from the utilization rate,
scatters the keywords over the notes, and wraps everything in neutral
filler text. Because bucket boundaries sit on integer year offsets and the
trajectory is piecewise linear with kinks on integers, the expected count
in a bucket equals the rate at the bucket midpoint exactly.

Determinism: each patient's random stream is derived from
(master seed, patient index), so corpora are reproducible and independent
of how generation is chunked across workers.

Cases additionally receive coded diagnosis events consistent with the
downstream ascertainment rule: either a single dementia-clinic diagnosis
or several diagnoses on distinct dates with at least one from a specialty
clinic with a permitted provider type. A configurable fraction of the
single-diagnosis stratum keeps a flat (control-like) keyword trajectory,
modelling the misdiagnosis risk in that stratum.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .dates import add_years
from .errors import ConfigError
from .lexicon import Lexicon, default_lexicon
from .matcher import KeywordMatcher
from .records import (
    DEMENTIA_CLINIC_STOP_CODE,
    ETHNICITIES,
    NOTE_TYPES,
    RACES,
    SPECIALTY_STOP_CODE,
    STOP_CODES,
    DiagnosisEvent,
    MedicationEvent,
    Note,
    PatientRecord,
    StationVisit,
)
from .trajectory import GROUP_CASE, GROUP_CONTROL, TrajectoryProfile, keyword_rate

# Neutral words for note bodies. None of these may equal a lexicon keyword
# or any word of a multi-word keyword, otherwise filler adjacency could
# create accidental matcher hits; generate_corpus enforces this.
FILLER_WORDS = (
    "patient", "reports", "denies", "states", "stable", "continues", "reviewed",
    "plan", "followup", "visit", "today", "noted", "blood", "pressure",
    "medication", "refill", "discussed", "exam", "unremarkable", "unchanged",
    "chronic", "condition", "ongoing", "routine", "checkup", "labs", "ordered",
    "results", "pending", "tolerating", "therapy", "without", "acute", "issues",
    "feels", "improved", "moderate", "daily", "walking", "exercise", "diet",
    "counseled", "education", "provided", "questions", "answered", "return",
    "weeks", "months", "scheduled", "vitals", "within", "limits", "recorded",
    "hypertension", "diabetes", "arthritis", "knee", "shoulder", "lower",
    "includes", "immunization", "vaccine", "administered", "annual", "wellness",
    "renewed", "balanced", "encouraged", "hydration", "rest", "activity",
    "tolerance", "prescription", "continued", "monitoring", "follow", "care",
    "team", "notified", "records", "updated", "reviewing", "goals",
)

CASE_NOTE_MIX = {
    "primary_care": 0.41,
    "consultation": 0.12,
    "mental_health": 0.12,
    "neurology": 0.08,
    "memory_clinic": 0.06,
    "geriatric_psychiatry": 0.06,
    "geriatric_medicine": 0.06,
    "comp_and_pension": 0.05,
    "cognitive_nursing": 0.04,
}

CONTROL_NOTE_MIX = {
    "primary_care": 0.56,
    "consultation": 0.12,
    "mental_health": 0.10,
    "comp_and_pension": 0.06,
    "neurology": 0.05,
    "geriatric_medicine": 0.04,
    "geriatric_psychiatry": 0.03,
    "memory_clinic": 0.02,
    "cognitive_nursing": 0.02,
}

BACKGROUND_CODES = (
    "I10", "E11.9", "E78.5", "M54.5", "M17.11", "K21.9", "J44.9", "N40.0",
    "H25.9", "H91.90", "L57.0", "R53.83", "Z00.00", "Z12.11", "Z23", "F32.9",
    "G31.84", "F41.1", "G47.00", "M19.90", "I25.10", "E03.9", "D64.9", "R42",
)

PRODROMAL_CODES = ("F32.9", "G31.84")

AD_CODES = ("G30.0", "G30.1", "G30.8", "G30.9")

SPECIALTY_PROVIDERS = (
    "neurology",
    "vascular_neurology",
    "psychiatry",
    "neuropsychology",
    "geriatric_medicine",
)

MED_CLASSES = (
    "antihypertensive", "statin", "analgesic", "ssri", "ppi",
    "anticoagulant", "hypoglycemic", "bronchodilator",
)

# Keyword identity of ramp (excess-over-baseline) emissions. Concentrating
# the pre-diagnosis excess on a small signature panel is what makes the
# keyword-age pairs learnable by linear models at realistic cohort sizes;
# spreading it uniformly leaves almost no per-pair signal once patient ages
# mix. Listed keywords share (1 - ramp_tail_share) of the excess in these
# proportions; every other keyword splits the tail uniformly.
DEFAULT_RAMP_WEIGHTS = (
    "mmse:0.30",
    "speaking:0.25",
    "memory:0.20",
    "concentration:0.15",
    "language:0.05",
    "mini-cog:0.025",
    "forgetfulness:0.025",
)


@dataclass
class CorpusConfig:
    n_cases: int = 2000
    n_controls: int = 18000
    history_years: int = 20
    study_start: dt.date = dt.date(1995, 1, 1)
    study_end: dt.date = dt.date(2021, 10, 1)
    index_start: dt.date = dt.date(2016, 1, 1)
    index_end: dt.date = dt.date(2021, 10, 1)
    age_reference: dt.date = dt.date(2016, 1, 1)
    station_count: int = 130
    home_station_share: float = 0.85
    # peak above the profile default keeps the ten-year horizon linearly
    # learnable at desk scale (2k cases) without touching the
    # flat-until-14-years-before shape
    case_profile: TrajectoryProfile = field(
        default_factory=lambda: TrajectoryProfile(peak_rate=60.0, notes_per_year=7.0)
    )
    control_profile: TrajectoryProfile = field(default_factory=lambda: TrajectoryProfile(notes_per_year=6.0))
    # keyword identity of emitted hits: baseline hits draw near-uniformly
    # over the lexicon (signature keywords upweighted by
    # signature_baseline_weight so their keyword-age pairs rank high enough
    # in document frequency to stay in the selected vocabulary across the
    # whole age range); ramp hits follow the signature panel. Total emission
    # rates are unaffected by these identity weights.
    ramp_keyword_weights: tuple[str, ...] = DEFAULT_RAMP_WEIGHTS  # "keyword:weight" entries
    ramp_tail_share: float = 0.15
    signature_baseline_weight: float = 2.0
    ramp_keywords: tuple[str, ...] | None = None  # uniform-subset override for experiments
    # demographics
    case_age_mean: float = 76.7
    case_age_sd: float = 8.6
    control_age_mean: float = 76.6
    control_age_sd: float = 8.9
    age_min: float = 55.0
    age_max: float = 95.0
    case_female_share: float = 0.029
    control_female_share: float = 0.026
    case_race_probs: tuple[float, ...] = (0.774, 0.141, 0.007, 0.010, 0.005, 0.062)
    control_race_probs: tuple[float, ...] = (0.799, 0.103, 0.007, 0.008, 0.006, 0.078)
    case_hispanic_share: float = 0.112
    control_hispanic_share: float = 0.045
    # coded events
    background_dx_rate: float = 3.0
    background_codes: tuple[str, ...] = BACKGROUND_CODES
    prodromal_codes: tuple[str, ...] = PRODROMAL_CODES
    prodromal_multiplier: float = 3.0
    prodromal_years: float = 3.0
    ad_codes: tuple[str, ...] = AD_CODES
    single_dx_fraction: float = 0.018
    single_dx_flat_fraction: float = 0.5
    specialty_providers: tuple[str, ...] = SPECIALTY_PROVIDERS
    med_classes: tuple[str, ...] = MED_CLASSES
    med_rate: float = 1.5
    # note text
    filler_words: tuple[str, ...] = FILLER_WORDS
    note_words_min: int = 8
    note_words_max: int = 20

    def validate(self) -> None:
        if self.n_cases + self.n_controls <= 0:
            raise ConfigError("zero patients requested")
        if self.n_cases < 0 or self.n_controls < 0:
            raise ConfigError("negative patient counts")
        if self.history_years < 1:
            raise ConfigError("history_years must be >= 1")
        if not (self.study_start < self.index_start <= self.index_end <= self.study_end):
            raise ConfigError("require study_start < index_start <= index_end <= study_end")
        if self.index_start.year - self.history_years < self.study_start.year:
            raise ConfigError("study_start too late for the requested history length")
        if self.station_count < 1:
            raise ConfigError("station_count must be >= 1")
        if not 0 <= self.single_dx_fraction <= 1 or not 0 <= self.single_dx_flat_fraction <= 1:
            raise ConfigError("stratum fractions must be in [0, 1]")
        if abs(sum(CASE_NOTE_MIX.values()) - 1.0) > 1e-9 or abs(sum(CONTROL_NOTE_MIX.values()) - 1.0) > 1e-9:
            raise ConfigError("note mix must sum to 1")
        self.case_profile.validate()
        self.control_profile.validate()


def _keyword_tables(cfg: CorpusConfig, lexicon: Lexicon):
    n = len(lexicon)
    base = np.full(n, 1.0 / n)
    if cfg.ramp_keywords is not None:
        wanted = set(cfg.ramp_keywords)
        missing = wanted - set(lexicon.keywords)
        if missing:
            raise ConfigError(f"ramp keywords not in lexicon: {sorted(missing)}")
        weights = np.array([1.0 if e.keyword in wanted else 0.0 for e in lexicon])
        if weights.sum() <= 0:
            raise ConfigError("ramp keyword weights are all zero")
        return base, weights / weights.sum()
    if not 0.0 <= cfg.ramp_tail_share < 1.0:
        raise ConfigError("ramp_tail_share must be in [0, 1)")
    listed: dict[str, float] = {}
    for entry in cfg.ramp_keyword_weights:
        kw, _, share = entry.partition(":")
        kw = kw.strip()
        if kw not in lexicon:
            raise ConfigError(f"ramp keyword not in lexicon: {kw!r}")
        value = float(share)
        if value <= 0:
            raise ConfigError(f"ramp weight for {kw!r} must be positive")
        listed[kw] = value
    if not listed:
        raise ConfigError("ramp_keyword_weights is empty")
    listed_total = sum(listed.values())
    weights = np.zeros(n)
    n_tail = n - len(listed)
    tail = cfg.ramp_tail_share if n_tail else 0.0
    if cfg.signature_baseline_weight <= 0:
        raise ConfigError("signature_baseline_weight must be positive")
    base_w = np.ones(n)
    for i, e in enumerate(lexicon):
        if e.keyword in listed:
            weights[i] = (1.0 - tail) * listed[e.keyword] / listed_total
            base_w[i] = cfg.signature_baseline_weight
        else:
            weights[i] = tail / n_tail
    return base_w / base_w.sum(), weights / weights.sum()


def _usable_filler(cfg: CorpusConfig, lexicon: Lexicon) -> tuple[str, ...]:
    forbidden: set[str] = set()
    for kw in lexicon.keywords:
        forbidden.update(kw.replace("-", " ").split())
    usable = tuple(w for w in cfg.filler_words if w.lower() not in forbidden)
    if len(usable) < 20:
        raise ConfigError("fewer than 20 filler words remain after removing lexicon collisions")
    return usable


def _draw_count(rng: np.random.Generator, mean: float, dispersion: float) -> int:
    if mean <= 0:
        return 0
    if dispersion <= 1.0:
        return int(rng.poisson(mean))
    # negative binomial with variance = dispersion * mean
    r = mean / (dispersion - 1.0)
    return int(rng.negative_binomial(r, 1.0 / dispersion))


def _year_buckets(anchor: dt.date, first_offset: int, clip_start: dt.date, clip_end: dt.date):
    """Yield (offset_years, start, end) unit-year buckets anchored at a date.

    Bucket k covers [anchor + k years, anchor + k + 1 years), clipped to
    [clip_start, clip_end]; empty buckets are skipped.
    """
    k = first_offset
    while True:
        b0 = add_years(anchor, k)
        if b0 > clip_end:
            return
        b1 = add_years(anchor, k + 1)
        s = max(b0, clip_start)
        e = min(b1, clip_end)
        if e > s:
            yield k, s, e, (b1 - b0).days
        k += 1


def _patient_rng(master_seed: int, patient_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, patient_index]))


class _Sampler:
    """Holds per-corpus derived tables so per-patient sampling stays lean."""

    def __init__(self, cfg: CorpusConfig, lexicon: Lexicon):
        cfg.validate()
        self.cfg = cfg
        self.lexicon = lexicon
        self.keywords = lexicon.keywords
        self.base_probs, self.ramp_probs = _keyword_tables(cfg, lexicon)
        self.filler = np.array(_usable_filler(cfg, lexicon))
        matcher = KeywordMatcher(lexicon)
        if matcher.count(" ".join(self.filler.tolist())).sum() != 0:
            raise ConfigError("filler words trigger keyword matches")
        self.case_mix = np.array([CASE_NOTE_MIX[t] for t in NOTE_TYPES])
        self.control_mix = np.array([CONTROL_NOTE_MIX[t] for t in NOTE_TYPES])
        self.case_race = np.array(cfg.case_race_probs) / sum(cfg.case_race_probs)
        self.control_race = np.array(cfg.control_race_probs) / sum(cfg.control_race_probs)
        self.entry_year_min = cfg.index_start.year - cfg.history_years
        self.entry_year_max = cfg.index_end.year - cfg.history_years
        self.stop_codes = np.array([STOP_CODES[t] for t in NOTE_TYPES])
        # background code distribution, and the boosted variant used in the
        # pre-index prodromal window of cases
        n_bg = len(cfg.background_codes)
        self.bg_probs = np.full(n_bg, 1.0 / n_bg)
        boosted = np.array(
            [cfg.prodromal_multiplier if c in cfg.prodromal_codes else 1.0 for c in cfg.background_codes]
        )
        self.bg_probs_prodromal = boosted / boosted.sum()

    def sample(self, rng: np.random.Generator, *, is_case: bool, patient_id: str):
        cfg = self.cfg
        profile = cfg.case_profile if is_case else cfg.control_profile

        # --- demographics ---
        female_share = cfg.case_female_share if is_case else cfg.control_female_share
        sex = "female" if rng.random() < female_share else "male"
        race = RACES[rng.choice(len(RACES), p=self.case_race if is_case else self.control_race)]
        hisp = cfg.case_hispanic_share if is_case else cfg.control_hispanic_share
        ethnicity = ETHNICITIES[0] if rng.random() < hisp else ETHNICITIES[1]
        age_mean = cfg.case_age_mean if is_case else cfg.control_age_mean
        age_sd = cfg.case_age_sd if is_case else cfg.control_age_sd
        age = float(np.clip(rng.normal(age_mean, age_sd), cfg.age_min, cfg.age_max))
        birth_date = cfg.age_reference - dt.timedelta(days=round(age * 365.2425))

        # --- timeline ---
        if is_case:
            span_days = (cfg.index_end - cfg.index_start).days
            index_date = cfg.index_start + dt.timedelta(days=int(rng.integers(0, span_days)))
            entry_date = add_years(index_date, -cfg.history_years)
            anchor = index_date
            first_offset = -cfg.history_years
        else:
            entry_year = int(rng.integers(self.entry_year_min, self.entry_year_max + 1))
            entry_date = dt.date(entry_year, 1, 1) + dt.timedelta(days=int(rng.integers(0, 365)))
            index_date = None
            anchor = entry_date
            first_offset = 0

        single_path = bool(is_case and rng.random() < cfg.single_dx_fraction)
        flat = bool(single_path and rng.random() < cfg.single_dx_flat_fraction)
        rate_group = GROUP_CASE if (is_case and not flat) else GROUP_CONTROL

        home_station = int(rng.integers(0, cfg.station_count))
        mix = self.case_mix if is_case else self.control_mix
        n_kw = len(self.keywords)
        n_filler = len(self.filler)
        filler_list = self.filler.tolist()

        notes: list[Note] = []
        visits: list[StationVisit] = []
        diagnoses: list[DiagnosisEvent] = []
        medications: list[MedicationEvent] = []

        for _, b0, b1, full_days in _year_buckets(anchor, first_offset, entry_date, cfg.study_end):
            span = (b1 - b0).days
            f_years = span / full_days
            mid_offset = ((b0 - anchor).days + span / 2.0) / 365.2425
            rate = keyword_rate(mid_offset, rate_group, profile)
            lam = rate * f_years
            k_total = _draw_count(rng, lam, profile.noise_dispersion)
            ramp_frac = max(0.0, rate - profile.baseline_rate) / rate if rate > 0 else 0.0
            k_ramp = int(rng.binomial(k_total, ramp_frac)) if ramp_frac > 0 and k_total else 0

            n_notes = max(1, int(rng.poisson(profile.notes_per_year * f_years)))
            day_offsets = np.sort(rng.integers(0, span, n_notes))
            type_ids = rng.choice(len(NOTE_TYPES), n_notes, p=mix)
            at_home = rng.random(n_notes) < cfg.home_station_share
            others = rng.integers(0, max(1, cfg.station_count - 1), n_notes)
            others = np.where(others >= home_station, others + 1, others) % cfg.station_count
            stations = np.where(at_home, home_station, others)

            kw_ids = np.concatenate([
                rng.choice(n_kw, k_total - k_ramp, p=self.base_probs),
                rng.choice(n_kw, k_ramp, p=self.ramp_probs),
            ]) if k_total else np.empty(0, dtype=np.int64)
            note_of_kw = rng.integers(0, n_notes, k_total) if k_total else kw_ids

            per_note_kws: list[list[str]] = [[] for _ in range(n_notes)]
            for kid, nid in zip(kw_ids, note_of_kw):
                per_note_kws[nid].append(self.keywords[kid])

            word_counts = rng.integers(cfg.note_words_min, cfg.note_words_max + 1, n_notes)
            filler_ids = rng.integers(0, n_filler, int(word_counts.sum()))
            pos = 0
            for i in range(n_notes):
                wc = int(word_counts[i])
                words = [filler_list[j] for j in filler_ids[pos : pos + wc]]
                pos += wc
                for kw in per_note_kws[i]:
                    words.insert(int(rng.integers(0, len(words) + 1)), kw)
                date = b0 + dt.timedelta(days=int(day_offsets[i]))
                ntype = NOTE_TYPES[type_ids[i]]
                notes.append(Note(date, ntype, int(self.stop_codes[type_ids[i]]), " ".join(words)))
                visits.append(StationVisit(date, int(stations[i])))

            # background coded events
            n_dx = rng.poisson(cfg.background_dx_rate * f_years)
            for _ in range(int(n_dx)):
                date = b0 + dt.timedelta(days=int(rng.integers(0, span)))
                probs = self.bg_probs
                if is_case and date <= index_date and (index_date - date).days <= cfg.prodromal_years * 365.2425:
                    probs = self.bg_probs_prodromal
                code = cfg.background_codes[rng.choice(len(cfg.background_codes), p=probs)]
                diagnoses.append(
                    DiagnosisEvent(date, code, int(STOP_CODES["primary_care"]), False, False, "internal_medicine")
                )
            n_med = rng.poisson(cfg.med_rate * f_years)
            for _ in range(int(n_med)):
                date = b0 + dt.timedelta(days=int(rng.integers(0, span)))
                medications.append(MedicationEvent(date, cfg.med_classes[rng.integers(0, len(cfg.med_classes))]))

        if is_case:
            diagnoses.extend(self._ad_events(rng, index_date, single_path))
            med_date = index_date
            while med_date <= cfg.study_end:
                medications.append(MedicationEvent(med_date, "cholinesterase_inhibitor"))
                med_date = add_years(med_date, 1)

        diagnoses.sort(key=lambda d: d.date)
        medications.sort(key=lambda m: m.date)

        record = PatientRecord(
            patient_id=patient_id,
            birth_date=birth_date,
            sex=sex,
            race=race,
            ethnicity=ethnicity,
            notes=notes,
            diagnoses=diagnoses,
            medications=medications,
            station_visits=visits,
            is_case_truth=is_case,
            index_date_truth=index_date,
        )
        info = {
            "home_station": home_station,
            "path_truth": ("single_dementia_clinic" if single_path else "multi_with_specialty") if is_case else None,
            "flat_trajectory": flat,
        }
        return record, info

    def _ad_events(self, rng: np.random.Generator, index_date: dt.date, single_path: bool):
        cfg = self.cfg
        code = lambda: cfg.ad_codes[rng.integers(0, len(cfg.ad_codes))]
        provider = lambda: cfg.specialty_providers[rng.integers(0, len(cfg.specialty_providers))]
        if single_path:
            return [
                DiagnosisEvent(index_date, code(), DEMENTIA_CLINIC_STOP_CODE, True, True, provider())
            ]
        events = []
        first_specialty = bool(rng.random() < 0.5)
        if first_specialty:
            events.append(DiagnosisEvent(index_date, code(), SPECIALTY_STOP_CODE, True, False, provider()))
        else:
            events.append(
                DiagnosisEvent(index_date, code(), int(STOP_CODES["primary_care"]), False, False, "internal_medicine")
            )
        available = (cfg.study_end - index_date).days
        n_extra = min(int(1 + rng.integers(0, 3)), available)
        offsets = np.sort(rng.choice(np.arange(1, available + 1), size=n_extra, replace=False))
        for i, off in enumerate(offsets):
            date = index_date + dt.timedelta(days=int(off))
            # guarantee the multi-path rule: at least one specialty event
            # with a permitted provider among the diagnoses
            specialty = bool(rng.random() < 0.6) or (not first_specialty and i == 0)
            if specialty:
                events.append(DiagnosisEvent(date, code(), SPECIALTY_STOP_CODE, True, False, provider()))
            else:
                events.append(
                    DiagnosisEvent(date, code(), int(STOP_CODES["primary_care"]), False, False, "internal_medicine")
                )
        return events


def sample_patient(
    profile: TrajectoryProfile,
    config: CorpusConfig,
    rng_seed,
    *,
    is_case: bool = False,
    patient_id: str = "P000000",
    lexicon: Lexicon | None = None,
) -> PatientRecord:
    """Sample one patient record. Same seed, same arguments: identical record.

    The profile argument overrides the matching group profile in config so
    callers can probe a single trajectory without rebuilding the config.
    """
    lexicon = lexicon or default_lexicon()
    cfg = replace(config, case_profile=profile) if is_case else replace(config, control_profile=profile)
    sampler = _Sampler(cfg, lexicon)
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    record, _ = sampler.sample(rng, is_case=is_case, patient_id=patient_id)
    return record


def generate_corpus(config: CorpusConfig, rng_seed: int, lexicon: Lexicon | None = None, with_info: bool = False):
    """Yield the corpus patients in index order (cases first, then controls).

    With ``with_info=True`` yields (record, info) pairs where info carries
    generator internals for the ground-truth manifest (home station,
    diagnosis path, flat-trajectory flag).
    """
    lexicon = lexicon or default_lexicon()
    sampler = _Sampler(config, lexicon)
    total = config.n_cases + config.n_controls
    for idx in range(total):
        is_case = idx < config.n_cases
        rng = _patient_rng(rng_seed, idx)
        record, info = sampler.sample(rng, is_case=is_case, patient_id=f"P{idx:06d}")
        if with_info:
            yield record, info
        else:
            yield record
