"""Experiment orchestration: splits, predictor assembly, training,
evaluation, attribution, trends, and artifact emission.

Two split designs are supported. The random split works at matched-group
granularity: a case and its controls always land on the same side, and
groups that share a control are merged into one atomic cluster first, so
no patient can appear on both sides. The station holdout assigns each
patient to their most-visited station and holds whole stations out for
testing, mirroring deployment to unseen sites (matched groups may straddle
this split by design).

For every clean-window horizon the vocabulary, standardization statistics
and any calibration are fitted on training rows only; the run manifest
records an audit of the ids involved.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import os
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _version
from .cohort import (
    CohortBuild,
    CohortConfig,
    CohortPair,
    ControlCandidate,
    ObservationWindow,
    build_cohort,
    frame_window,
)
from .corpus import CorpusConfig, generate_corpus
from .errors import ConfigError, DataError
from .explain import ImportanceTable, group_importance, linear_shap
from .features import (
    PairVocabulary,
    ScannedPatient,
    scan_record,
    select_vocabulary_from_keys,
    save_vocabulary,
    vector_from_keys,
)
from .lexicon import Lexicon, default_lexicon
from .matcher import BACKEND, KeywordMatcher
from .metrics import EvalReport, evaluate_scores
from .models import (
    decision_score,
    predict_proba,
    save_model,
    train_adaboost,
    train_lr,
    train_rf,
    train_svm,
)
from .records import DiagnosisEvent, PatientRecord
from .trends import trend_by_year, trend_by_age_group, write_trends_csv

log = logging.getLogger(__name__)

SETTING_RANDOM = "random_split"
SETTING_STATION = "station_holdout"

PREDICTOR_SETS = (
    "keywords",
    "icd_only",
    "structured_only",
    "structured_plus_keywords",
    "keywords_no_cognitive_tests",
    "primary_care_notes_only",
)

MODEL_NAMES = ("lr", "svm", "adaboost", "rf")

SUBGROUP_KINDS = (None, "sex", "age_band", "race_ethnicity")

METRICS_COLUMNS = [
    "model", "setting", "clean_years", "subgroup",
    "precision_case", "recall_case", "f1_case",
    "precision_ctrl", "recall_ctrl", "f1_ctrl",
    "accuracy", "pr_auc", "roc_auc", "hl_stat", "hl_p",
]


@dataclass
class ExperimentConfig:
    setting: str = SETTING_RANDOM
    split_fraction: float = 0.8  # training share under the random split
    holdout_station_count: int = 10
    clean_years: tuple[int, ...] = (10,)
    models: tuple[str, ...] = ("lr",)
    predictor_set: str = "keywords"
    subgroup: str | None = None
    seed: int = 0
    top_k_pairs: int = 1000
    top_k_codes: int = 200
    write_features_csv: bool = False
    trends_max_years: int = 15
    trends_sample_n: int = 100
    strata_eval: bool = True
    # lr_l2 larger than the bare-trainer default: on the synthetic default
    # corpus this is what keeps the calibration test happy (weaker ridge
    # overfits into overconfident probabilities)
    lr_l2: float = 1e-2
    lr_max_iters: int = 300
    lr_tol: float = 1e-6
    svm_lambda: float = 1e-4
    svm_epochs: int = 20
    ada_rounds: int = 200
    rf_trees: int = 200
    rf_depth: int = 12
    jobs: int = 1

    def validate(self) -> None:
        if self.setting not in (SETTING_RANDOM, SETTING_STATION):
            raise ConfigError(f"unknown setting {self.setting!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must be in (0, 1)")
        if not self.clean_years or not all(0 <= c <= 10 for c in self.clean_years):
            raise ConfigError("clean_years must be a nonempty subset of 0..10")
        if not self.models or not set(self.models) <= set(MODEL_NAMES):
            raise ConfigError(f"models must be a nonempty subset of {MODEL_NAMES}")
        if self.predictor_set not in PREDICTOR_SETS:
            raise ConfigError(f"unknown predictor_set {self.predictor_set!r}")
        if self.subgroup not in SUBGROUP_KINDS:
            raise ConfigError(f"unknown subgroup kind {self.subgroup!r}")


@dataclass
class PatientData:
    """Everything the pipeline needs per patient once notes are scanned."""

    pid: str
    birth_date: dt.date
    sex: str
    race: str
    ethnicity: str
    scanned: ScannedPatient
    diagnoses: list[DiagnosisEvent]
    med_dates: np.ndarray
    med_classes: list[str]
    visit_years: frozenset
    first_visit_year: int
    earliest_note: dt.date
    station_assigned: int
    is_case_truth: bool = False
    index_date_truth: dt.date | None = None
    info: dict = field(default_factory=dict)

    def candidate(self) -> ControlCandidate:
        return ControlCandidate(
            patient_id=self.pid,
            sex=self.sex,
            birth_year=self.birth_date.year,
            first_visit_year=self.first_visit_year,
            visit_years=self.visit_years,
        )


def assign_station(station_visits) -> int:
    """Most-visited station id; ties broken toward the smallest id."""
    if not station_visits:
        raise DataError("patient has no station visits")
    counts = Counter(v.station_id for v in station_visits)
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]


def patient_data_from_record(record: PatientRecord, matcher: KeywordMatcher, info: dict | None = None) -> PatientData:
    scanned = scan_record(record, matcher)
    if not record.notes:
        raise DataError(f"{record.patient_id} has no notes")
    return PatientData(
        pid=record.patient_id,
        birth_date=record.birth_date,
        sex=record.sex,
        race=record.race,
        ethnicity=record.ethnicity,
        scanned=scanned,
        diagnoses=record.diagnoses,
        med_dates=np.array([m.date.toordinal() for m in record.medications], dtype=np.int64),
        med_classes=[m.drug_class for m in record.medications],
        visit_years=frozenset(v.date.year for v in record.station_visits),
        first_visit_year=min(v.date.year for v in record.station_visits),
        earliest_note=record.notes[0].date,
        station_assigned=assign_station(record.station_visits),
        is_case_truth=record.is_case_truth,
        index_date_truth=record.index_date_truth,
        info=dict(info or {}),
    )


def load_patient_data(records, matcher: KeywordMatcher) -> dict[str, PatientData]:
    """Scan an iterable of PatientRecord (or (record, info) pairs) into the
    compact per-patient pipeline representation; note text is dropped."""
    out: dict[str, PatientData] = {}
    for item in records:
        record, info = item if isinstance(item, tuple) else (item, None)
        out[record.patient_id] = patient_data_from_record(record, matcher, info)
    return out


# ---------------------------------------------------------------------------
# splits


@dataclass
class Row:
    pid: str
    label: int
    index_date: dt.date
    case_id: str


def assemble_rows(pairs: list[CohortPair]) -> list[Row]:
    rows: list[Row] = []
    for pair in pairs:
        rows.append(Row(pair.case.patient_id, 1, pair.case.index_date, pair.case.patient_id))
        for pid in pair.control_ids:
            rows.append(Row(pid, 0, pair.case.index_date, pair.case.patient_id))
    return rows


def _clusters_by_shared_controls(pairs: list[CohortPair]) -> list[list[CohortPair]]:
    parent: dict[str, str] = {p.case.patient_id: p.case.patient_id for p in pairs}

    def find(a: str) -> str:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    owner: dict[str, str] = {}
    for pair in pairs:
        for pid in pair.control_ids:
            if pid in owner:
                union(pair.case.patient_id, owner[pid])
            else:
                owner[pid] = pair.case.patient_id
    grouped: dict[str, list[CohortPair]] = {}
    for pair in pairs:
        grouped.setdefault(find(pair.case.patient_id), []).append(pair)
    return [grouped[root] for root in sorted(grouped)]


def split_setting1(pairs: list[CohortPair], fraction: float, seed: int):
    """Random split at matched-group granularity.

    Groups sharing a control form one atomic cluster; clusters are shuffled
    and assigned to training until the target group count is reached.
    Returns (train_pairs, test_pairs).
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError("split fraction must be in (0, 1)")
    clusters = _clusters_by_shared_controls(pairs)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    order = rng.permutation(len(clusters))
    target = int(round(fraction * len(pairs)))
    train: list[CohortPair] = []
    test: list[CohortPair] = []
    for ci in order:
        cluster = clusters[ci]
        if len(train) < target:
            train.extend(cluster)
        else:
            test.extend(cluster)
    if not test:  # degenerate shuffle (one giant cluster): push the last cluster to test
        raise DataError("random split produced an empty test side; pool too entangled")
    return train, test


def split_setting2(pairs: list[CohortPair], data: dict[str, PatientData],
                   holdout_count: int, seed: int):
    """Hold out whole stations: every member assigned to a held-out station
    is a test patient. Returns (train_pairs-rows-style sets) as patient id
    sets plus the holdout station list."""
    if holdout_count < 1:
        raise ConfigError("holdout_station_count must be >= 1")
    stations = sorted({d.station_assigned for d in data.values()})
    if holdout_count >= len(stations):
        raise ConfigError("holdout_station_count must be smaller than the station count")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    holdout = set(np.array(stations)[rng.choice(len(stations), size=holdout_count, replace=False)].tolist())
    member_ids = {r.pid for r in assemble_rows(pairs)}
    test_ids = {pid for pid in member_ids if data[pid].station_assigned in holdout}
    train_ids = member_ids - test_ids
    for st in sorted(holdout):
        if not any(data[pid].station_assigned == st for pid in test_ids):
            log.warning("holdout station %s has no cohort patients", st)
    if not test_ids:
        raise DataError("station holdout produced an empty test set")
    return train_ids, test_ids, sorted(holdout)


# ---------------------------------------------------------------------------
# predictor assembly

NINE_TYPE_FILTER = None  # the corpus only contains the nine included types
PRIMARY_CARE_FILTER = ("primary_care",)

AGE_DECADES = ("lt60", "60s", "70s", "80s", "ge90")


def _age_decade(age: int) -> int:
    if age < 60:
        return 0
    if age < 70:
        return 1
    if age < 80:
        return 2
    if age < 90:
        return 3
    return 4


@dataclass
class WindowedRow:
    row: Row
    window: ObservationWindow


def windowed_rows(rows: list[Row], data: dict[str, PatientData], clean_years: int,
                  study_start: dt.date, min_history_years: int) -> tuple[list[WindowedRow], list[str]]:
    """Frame each row's observation window; rows without enough history
    inside the window drop out (returned separately for the exclusion log)."""
    kept: list[WindowedRow] = []
    dropped: list[str] = []
    for row in rows:
        window, eligible = frame_window(
            row.index_date,
            clean_years,
            study_start=study_start,
            earliest_note=data[row.pid].earliest_note,
            min_history_years=min_history_years,
        )
        if eligible:
            kept.append(WindowedRow(row, window))
        else:
            dropped.append(row.pid)
    return kept, dropped


class PredictorBuilder:
    """Fits whatever vocabulary a predictor set needs on training rows, then
    maps any row to its feature vector."""

    def __init__(self, predictor_set: str, lexicon: Lexicon, exp: ExperimentConfig):
        if predictor_set not in PREDICTOR_SETS:
            raise ConfigError(f"unknown predictor_set {predictor_set!r}")
        self.predictor_set = predictor_set
        self.lexicon = lexicon
        self.exp = exp
        self.note_filter = PRIMARY_CARE_FILTER if predictor_set == "primary_care_notes_only" else NINE_TYPE_FILTER
        self.kw_mask: np.ndarray | None = None
        if predictor_set == "keywords_no_cognitive_tests":
            self.kw_mask = np.array([not e.is_cognitive_test for e in lexicon], dtype=bool)
        self.vocab: PairVocabulary | None = None
        self.code_vocab: list[str] | None = None
        self.med_vocab: list[str] | None = None
        self.fitted_on: list[str] = []

    # --- per-row raw ingredients ---

    def _pair_keys(self, wrow: WindowedRow, data) -> tuple[np.ndarray, np.ndarray]:
        return data[wrow.row.pid].scanned.pair_keys(wrow.window, self.note_filter, self.kw_mask)

    def _code_counts(self, wrow: WindowedRow, data) -> Counter:
        d = data[wrow.row.pid]
        lo, hi = wrow.window.start, wrow.window.end
        return Counter(e.icd_code for e in d.diagnoses if lo <= e.date <= hi)

    def _med_counts(self, wrow: WindowedRow, data) -> Counter:
        d = data[wrow.row.pid]
        lo, hi = wrow.window.start.toordinal(), wrow.window.end.toordinal()
        keep = (d.med_dates >= lo) & (d.med_dates <= hi)
        return Counter(c for c, k in zip(d.med_classes, keep) if k)

    # --- fit / transform ---

    def needs_pairs(self) -> bool:
        return self.predictor_set in (
            "keywords", "structured_plus_keywords", "keywords_no_cognitive_tests", "primary_care_notes_only"
        )

    def needs_structured(self) -> bool:
        return self.predictor_set in ("icd_only", "structured_only", "structured_plus_keywords")

    def fit(self, train_rows: list[WindowedRow], data: dict[str, PatientData]) -> "PredictorBuilder":
        self.fitted_on = [w.row.pid for w in train_rows]
        if self.needs_pairs():
            per_row = [self._pair_keys(w, data)[0] for w in train_rows]
            self.vocab = select_vocabulary_from_keys(
                per_row, len(train_rows), self.exp.top_k_pairs, self.lexicon.keywords
            )
        if self.needs_structured():
            df: Counter = Counter()
            meds: set[str] = set()
            for w in train_rows:
                df.update(self._code_counts(w, data).keys())
                meds.update(self._med_counts(w, data).keys())
            ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
            self.code_vocab = [c for c, _ in ranked[: self.exp.top_k_codes]]
            self.med_vocab = sorted(meds)
        return self

    def _structured_vector(self, wrow: WindowedRow, data) -> np.ndarray:
        d = data[wrow.row.pid]
        from .records import ETHNICITIES, RACES, SEXES
        from .dates import whole_years_between

        code_index = {c: i for i, c in enumerate(self.code_vocab)}
        codes = np.zeros(len(self.code_vocab))
        for c, n in self._code_counts(wrow, data).items():
            if c in code_index:
                codes[code_index[c]] = n
        if self.predictor_set == "icd_only":
            return codes
        demo = np.zeros(len(SEXES) + len(RACES) + len(ETHNICITIES) + len(AGE_DECADES))
        demo[SEXES.index(d.sex)] = 1.0
        demo[len(SEXES) + RACES.index(d.race)] = 1.0
        demo[len(SEXES) + len(RACES) + ETHNICITIES.index(d.ethnicity)] = 1.0
        age_at_end = whole_years_between(d.birth_date, wrow.window.end)
        demo[len(SEXES) + len(RACES) + len(ETHNICITIES) + _age_decade(age_at_end)] = 1.0
        med_index = {c: i for i, c in enumerate(self.med_vocab)}
        meds = np.zeros(len(self.med_vocab))
        for c, n in self._med_counts(wrow, data).items():
            meds[med_index[c]] = n
        return np.concatenate([demo, codes, meds])

    def transform(self, rows: list[WindowedRow], data: dict[str, PatientData]) -> np.ndarray:
        vectors = []
        for w in rows:
            parts = []
            if self.needs_structured():
                parts.append(self._structured_vector(w, data))
            if self.needs_pairs():
                keys, counts = self._pair_keys(w, data)
                parts.append(vector_from_keys(keys, counts, self.vocab))
            vectors.append(np.concatenate(parts) if len(parts) > 1 else parts[0])
        return np.vstack(vectors) if vectors else np.empty((0, 0))

    def feature_names(self) -> list[str]:
        names: list[str] = []
        if self.needs_structured():
            if self.predictor_set != "icd_only":
                from .records import ETHNICITIES, RACES, SEXES

                names += [f"sex={s}" for s in SEXES]
                names += [f"race={r}" for r in RACES]
                names += [f"ethnicity={e}" for e in ETHNICITIES]
                names += [f"age_decade={a}" for a in AGE_DECADES]
                names += [f"icd:{c}" for c in self.code_vocab]
                names += [f"med:{c}" for c in self.med_vocab]
            else:
                names += [f"icd:{c}" for c in self.code_vocab]
        if self.needs_pairs():
            names += [f"{kw}@{age}" for kw, age in self.vocab.pairs]
        return names


def build_predictors(patient: PatientData, window: ObservationWindow, predictor_set: str,
                     builder: PredictorBuilder) -> np.ndarray:
    """Feature vector for one patient/window under a fitted builder."""
    if predictor_set != builder.predictor_set:
        raise ConfigError("builder was fitted for a different predictor set")
    wrow = WindowedRow(Row(patient.pid, 0, window.end, patient.pid), window)
    return builder.transform([wrow], {patient.pid: patient})[0]


# ---------------------------------------------------------------------------
# model dispatch


def train_model(name: str, X: np.ndarray, y: np.ndarray, exp: ExperimentConfig, seed: int):
    if name == "lr":
        return train_lr(X, y, l2_lambda=exp.lr_l2, max_iters=exp.lr_max_iters, tol=exp.lr_tol, seed=seed)
    if name == "svm":
        return train_svm(X, y, reg_lambda=exp.svm_lambda, epochs=exp.svm_epochs, seed=seed)
    if name == "adaboost":
        return train_adaboost(X, y, n_rounds=exp.ada_rounds)
    if name == "rf":
        return train_rf(X, y, n_trees=exp.rf_trees, max_depth=exp.rf_depth, seed=seed)
    raise ConfigError(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# subgroups


def subgroup_value(kind: str, d: PatientData, index_date: dt.date) -> str:
    if kind == "sex":
        return d.sex
    if kind == "age_band":
        age = index_date.year - d.birth_date.year
        if age < 65:
            return "lt65"
        if age < 75:
            return "65_74"
        if age < 85:
            return "75_84"
        return "ge85"
    if kind == "race_ethnicity":
        return "hispanic_or_latino" if d.ethnicity == "hispanic_or_latino" else d.race
    raise ConfigError(f"unknown subgroup kind {kind!r}")


# ---------------------------------------------------------------------------
# run_experiment


@dataclass
class CellResult:
    model: str
    clean_years: int
    subgroup: str
    report: EvalReport


@dataclass
class _CellContext:
    exp: ExperimentConfig
    data: dict[str, PatientData]
    lexicon: Lexicon
    study_start: dt.date
    min_history_years: int
    train_rows: list[Row]
    test_rows: list[Row]
    path_of_case: dict[str, str]
    primary_clean: int


@dataclass
class _CellOutput:
    clean: int
    cells: list[CellResult]
    calibration_rows: list[list]
    vocab: PairVocabulary | None = None
    importance: ImportanceTable | None = None
    features_payload: tuple | None = None
    models: dict = field(default_factory=dict)
    vocab_fit_ok: bool = True


def _run_clean_cell(ctx: _CellContext, clean: int) -> _CellOutput | None:
    """All models at one clean horizon: windows, vocabulary, features,
    training, evaluation, and (at the primary horizon) attribution."""
    exp, data = ctx.exp, ctx.data
    wtrain, _ = windowed_rows(ctx.train_rows, data, clean, ctx.study_start, ctx.min_history_years)
    wtest, _ = windowed_rows(ctx.test_rows, data, clean, ctx.study_start, ctx.min_history_years)
    if not wtrain or not wtest:
        log.warning("clean=%d leaves no usable rows; skipped", clean)
        return None
    builder = PredictorBuilder(exp.predictor_set, ctx.lexicon, exp).fit(wtrain, data)
    train_id_set = {r.pid for r in ctx.train_rows}
    out = _CellOutput(clean=clean, cells=[], calibration_rows=[])
    out.vocab_fit_ok = set(builder.fitted_on) <= train_id_set
    X_train = builder.transform(wtrain, data)
    X_test = builder.transform(wtest, data)
    y_train = np.array([w.row.label for w in wtrain], dtype=np.float64)
    y_test = np.array([w.row.label for w in wtest], dtype=np.float64)

    if clean == ctx.primary_clean and builder.vocab is not None:
        out.vocab = builder.vocab
        if exp.write_features_csv:
            out.features_payload = (builder.feature_names(), [w.row.pid for w in wtrain + wtest],
                                    np.vstack([X_train, X_test]))

    for model_name in exp.models:
        model = train_model(model_name, X_train, y_train, exp, exp.seed)
        probs = predict_proba(model, X_test)
        scores = decision_score(model, X_test)
        report = evaluate_scores(probs, scores, y_test)
        out.cells.append(CellResult(model_name, clean, "all", report))
        for g in report.calibration:
            out.calibration_rows.append(
                [model_name, clean, g.n, f"{g.mean_prob:.6g}", f"{g.observed_rate:.6g}"]
            )

        if exp.subgroup is not None:
            values = [subgroup_value(exp.subgroup, data[w.row.pid], w.row.index_date) for w in wtest]
            for val in sorted(set(values)):
                mask = np.array([v == val for v in values])
                if mask.sum() < 2 or len(set(y_test[mask].tolist())) < 2:
                    log.warning("subgroup %s=%s too small; skipped", exp.subgroup, val)
                    continue
                sub_report = evaluate_scores(probs[mask], scores[mask], y_test[mask],
                                             with_calibration=False)
                out.cells.append(CellResult(model_name, clean, f"{exp.subgroup}={val}", sub_report))

        if exp.strata_eval:
            strata = diagnosis_strata_reports(probs, scores, y_test, wtest, ctx.path_of_case)
            for stratum, rep in strata.items():
                out.cells.append(CellResult(model_name, clean, f"dx_path={stratum}", rep))

        if model_name == "lr" and clean == ctx.primary_clean and builder.vocab is not None \
                and not builder.needs_structured():
            background = X_train.mean(axis=0)
            attrs = [linear_shap(model, x, background) for x in X_test]
            test_ages = [w.row.index_date.year - data[w.row.pid].birth_date.year for w in wtest]
            out.importance = group_importance(attrs, builder.vocab, ctx.lexicon, test_ages)

        if clean == ctx.primary_clean:
            out.models[model_name] = model
    return out


_FORK_CTX: _CellContext | None = None


def _cell_worker(clean: int) -> _CellOutput | None:
    return _run_clean_cell(_FORK_CTX, clean)


def _run_cells_parallel(ctx: _CellContext, cleans, jobs: int):
    """Fan the clean horizons over worker processes (fork start method, so
    the context transfers by copy-on-write); outputs keep the input order,
    making results independent of worker count."""
    import multiprocessing as mp
    from concurrent.futures import ProcessPoolExecutor

    global _FORK_CTX
    _FORK_CTX = ctx
    try:
        mp_ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=min(jobs, len(cleans)), mp_context=mp_ctx) as pool:
            return list(pool.map(_cell_worker, cleans))
    finally:
        _FORK_CTX = None


@dataclass
class RunResult:
    cohort: CohortBuild
    cells: list[CellResult]
    importance: ImportanceTable | None
    manifest: dict
    out_dir: str | None


def _metrics_row(setting: str, cell: CellResult) -> list:
    r = cell.report
    fmt = lambda v: f"{v:.6g}"
    return [
        cell.model, setting, cell.clean_years, cell.subgroup,
        fmt(r.precision_case), fmt(r.recall_case), fmt(r.f1_case),
        fmt(r.precision_ctrl), fmt(r.recall_ctrl), fmt(r.f1_ctrl),
        fmt(r.accuracy), fmt(r.pr_auc), fmt(r.roc_auc),
        "" if r.hl_statistic is None else fmt(r.hl_statistic),
        "" if r.hl_p_value is None else fmt(r.hl_p_value),
    ]


def write_cohort_csv(build: CohortBuild, path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["case_id", "index_date", "ascertainment_path", "control_ids"])
        for pair in build.pairs:
            w.writerow([
                pair.case.patient_id,
                pair.case.index_date.isoformat(),
                pair.case.ascertainment_path,
                ";".join(pair.control_ids),
            ])


def write_exclusions_csv(exclusions: list[tuple[str, str]], path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["patient_id", "reason"])
        for pid, reason in exclusions:
            w.writerow([pid, reason])


def run_experiment(
    exp: ExperimentConfig,
    data: dict[str, PatientData],
    cohort_cfg: CohortConfig,
    lexicon: Lexicon | None = None,
    out_dir: str | None = None,
    study_start: dt.date = dt.date(1995, 1, 1),
) -> RunResult:
    """Execute cohort -> split -> windows -> features -> models -> metrics
    -> attribution -> trends for one configuration, optionally writing the
    full artifact set under out_dir."""
    t_start = time.time()
    exp.validate()
    cohort_cfg.validate()
    lexicon = lexicon or default_lexicon()

    diagnoses = {pid: d.diagnoses for pid, d in data.items()}
    meta = {pid: d.candidate() for pid, d in data.items()}
    note_dates = {
        pid: [dt.date.fromordinal(int(o)) for o in d.scanned.note_dates] for pid, d in data.items()
    }
    build = build_cohort(diagnoses, meta, note_dates, cohort_cfg, exp.seed)
    if not build.pairs:
        raise DataError("cohort is empty after ascertainment and matching")
    path_of_case = {p.case.patient_id: p.case.ascertainment_path for p in build.pairs}

    # --- split ---
    if exp.setting == SETTING_RANDOM:
        train_pairs, test_pairs = split_setting1(build.pairs, exp.split_fraction, exp.seed)
        train_rows = assemble_rows(train_pairs)
        test_rows = assemble_rows(test_pairs)
        holdout_stations: list[int] = []
    else:
        train_ids, test_ids, holdout_stations = split_setting2(
            build.pairs, data, exp.holdout_station_count, exp.seed
        )
        all_rows = assemble_rows(build.pairs)
        train_rows = [r for r in all_rows if r.pid in train_ids]
        test_rows = [r for r in all_rows if r.pid in test_ids]
    train_id_set = {r.pid for r in train_rows}
    test_id_set = {r.pid for r in test_rows}
    if exp.setting == SETTING_RANDOM and train_id_set & test_id_set:
        raise DataError("split integrity violation: patient on both sides")

    cells: list[CellResult] = []
    importance: ImportanceTable | None = None
    calibration_rows: list[list] = []
    vocab_for_artifacts: PairVocabulary | None = None
    features_csv_payload = None
    audit = {
        "train_rows": len(train_rows),
        "test_rows": len(test_rows),
        "train_ids_sha256": hashlib.sha256(",".join(sorted(train_id_set)).encode()).hexdigest(),
        "vocab_fit_ids_subset_of_train": True,
        "disjoint_sides": not (train_id_set & test_id_set) if exp.setting == SETTING_RANDOM else None,
    }

    primary_clean = exp.clean_years[0]
    ctx = _CellContext(
        exp=exp, data=data, lexicon=lexicon, study_start=study_start,
        min_history_years=cohort_cfg.min_history_years, train_rows=train_rows,
        test_rows=test_rows, path_of_case=path_of_case, primary_clean=primary_clean,
    )
    if exp.jobs > 1 and len(exp.clean_years) > 1:
        outputs = _run_cells_parallel(ctx, exp.clean_years, exp.jobs)
    else:
        outputs = [_run_clean_cell(ctx, clean) for clean in exp.clean_years]

    models_to_save: dict[str, object] = {}
    for out in outputs:
        if out is None:
            continue
        cells.extend(out.cells)
        for row in out.calibration_rows:
            calibration_rows.append([row[0], row[1], len(calibration_rows)] + row[2:])
        if not out.vocab_fit_ok:
            audit["vocab_fit_ids_subset_of_train"] = False
        if out.clean == primary_clean:
            vocab_for_artifacts = out.vocab
            importance = out.importance
            features_csv_payload = out.features_payload
            models_to_save = out.models
    if not cells:
        raise DataError("no experiment cells produced results")
    if out_dir and models_to_save:
        os.makedirs(os.path.join(out_dir, "models"), exist_ok=True)
        for model_name, model in models_to_save.items():
            save_model(model, os.path.join(out_dir, "models", f"{model_name}.model"))

    # --- trends over full history (no clean window) ---
    scanned = {pid: d.scanned for pid, d in data.items()}
    entry = {pid: d.earliest_note for pid, d in data.items()}
    birth = {pid: d.birth_date for pid, d in data.items()}
    curves = [
        trend_by_year(build.pairs, scanned, entry, normalization="raw",
                      max_years_back=exp.trends_max_years),
        trend_by_year(build.pairs, scanned, entry, normalization="per_note",
                      max_years_back=exp.trends_max_years),
    ]
    rng = np.random.default_rng(np.random.SeedSequence([exp.seed, 303]))
    n_sample = min(exp.trends_sample_n, len(build.pairs))
    sampled = [build.pairs[i] for i in sorted(rng.choice(len(build.pairs), n_sample, replace=False))]
    sampled = [CohortPair(p.case, [p.control_ids[int(rng.integers(0, len(p.control_ids)))]]) for p in sampled]
    curves.append(
        trend_by_year(sampled, scanned, entry, normalization="raw",
                      max_years_back=exp.trends_max_years, stratum=f"sample{n_sample}_all_notes")
    )
    curves.extend(trend_by_age_group(build.pairs, scanned, entry, birth))

    manifest = {
        "version": _version,
        "scan_backend": BACKEND,
        "seed": exp.seed,
        "setting": exp.setting,
        "clean_years": list(exp.clean_years),
        "models": list(exp.models),
        "predictor_set": exp.predictor_set,
        "n_patients": len(data),
        "n_pairs": len(build.pairs),
        "n_exclusions": len(build.exclusions),
        "n_partial_matches": len(build.partial_cases),
        "holdout_stations": holdout_stations,
        "audit": audit,
        "runtime_seconds": round(time.time() - t_start, 3),
    }

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_cohort_csv(build, os.path.join(out_dir, "cohort.csv"))
        write_exclusions_csv(build.exclusions, os.path.join(out_dir, "exclusions.csv"))
        with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(METRICS_COLUMNS)
            for cell in cells:
                w.writerow(_metrics_row(exp.setting, cell))
        with open(os.path.join(out_dir, "calibration.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["model", "clean_years", "row", "n", "mean_prob", "observed_rate"])
            w.writerows(calibration_rows)
        if vocab_for_artifacts is not None:
            save_vocabulary(vocab_for_artifacts, os.path.join(out_dir, "vocab.csv"))
        if features_csv_payload is not None:
            names, row_pids, X_all = features_csv_payload
            with open(os.path.join(out_dir, "features.csv"), "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["patient_id"] + names)
                for pid, xrow in zip(row_pids, X_all):
                    w.writerow([pid] + [f"{v:.10g}" for v in xrow])
        write_trends_csv(curves, os.path.join(out_dir, "trends.csv"))
        if importance is not None:
            with open(os.path.join(out_dir, "importance.csv"), "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["keyword", "age", "group", "mean_abs_phi", "rank"])
                for kw, age, group, phi, rank in importance.feature_rows:
                    w.writerow([kw, age, group, f"{phi:.10g}", rank])
            with open(os.path.join(out_dir, "group_importance_by_ageband.csv"), "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["age_band", "group", "mean_abs_phi", "rank"])
                for band, group, phi, rank in importance.group_rows:
                    w.writerow([band, group, f"{phi:.10g}", rank])
        with open(os.path.join(out_dir, "run_manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")

    return RunResult(cohort=build, cells=cells, importance=importance, manifest=manifest, out_dir=out_dir)


def diagnosis_strata_reports(probs, scores, y_test, wtest: list[WindowedRow],
                             path_of_case: dict[str, str]) -> dict[str, EvalReport]:
    """Evaluate separately on each case-ascertainment stratum, sharing the
    full control side; strata without cases are skipped."""
    out: dict[str, EvalReport] = {}
    is_control = y_test == 0
    for stratum in ("single_dementia_clinic", "multi_with_specialty"):
        in_stratum = np.array(
            [y == 1 and path_of_case.get(w.row.case_id) == stratum for y, w in zip(y_test, wtest)]
        )
        mask = in_stratum | is_control
        if not in_stratum.any():
            log.warning("diagnosis stratum %s has no test cases; skipped", stratum)
            continue
        out[stratum] = evaluate_scores(
            np.asarray(probs)[mask], np.asarray(scores)[mask], np.asarray(y_test)[mask],
            with_calibration=False,
        )
    return out


def diagnosis_strata_eval(exp: ExperimentConfig, data: dict[str, PatientData],
                          cohort_cfg: CohortConfig, lexicon: Lexicon | None = None) -> dict[str, EvalReport]:
    """Standalone per-stratum evaluation at the first clean horizon and model."""
    one = dataclasses.replace(
        exp, clean_years=(exp.clean_years[0],), models=(exp.models[0],), strata_eval=True
    )
    result = run_experiment(one, data, cohort_cfg, lexicon)
    return {
        cell.subgroup.split("=", 1)[1]: cell.report
        for cell in result.cells
        if cell.subgroup.startswith("dx_path=")
    }


def generate_and_load(corpus_cfg: CorpusConfig, seed: int, lexicon: Lexicon | None = None,
                      matcher: KeywordMatcher | None = None) -> dict[str, PatientData]:
    """Generate a corpus and scan it straight into pipeline form without
    keeping note text in memory."""
    lexicon = lexicon or default_lexicon()
    matcher = matcher or KeywordMatcher(lexicon)
    out: dict[str, PatientData] = {}
    for record, info in generate_corpus(corpus_cfg, seed, lexicon, with_info=True):
        out[record.patient_id] = patient_data_from_record(record, matcher, info)
    return out
