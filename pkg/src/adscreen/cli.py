"""Command-line interface.

Subcommands cover each pipeline stage plus an end-to-end sweep:

    generate   synthesize a corpus (patients/notes/diagnoses/manifest JSONL)
    cohort     ascertain cases, match controls -> cohort.csv, exclusions.csv
    extract    split + vocabulary + features -> vocab.csv, features.csv, design.csv
    train      fit one model from extracted features -> models/<name>.model
    evaluate   score a trained model on the test side -> metrics.csv rows
    sweep      full experiment grid (clean windows x models) in one process
    trends     keyword-occurrence curves -> trends.csv
    explain    Shapley attribution of the trained lr model -> importance.csv
    report     pretty-print metrics.csv

Exit codes: 0 success, 1 configuration error, 2 data error, 3 metric
undefined.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import os
import sys

import numpy as np

from .cohort import CaseRecord, CohortConfig, CohortPair
from .config import apply_kv, known_prefixes, parse_kv_file
from .corpus import CorpusConfig, generate_corpus
from .errors import AdscreenError, ConfigError, DataError
from .explain import group_importance, linear_shap
from .features import load_vocabulary, save_vocabulary
from .harness import (
    ExperimentConfig,
    PredictorBuilder,
    SETTING_RANDOM,
    SETTING_STATION,
    assemble_rows,
    generate_and_load,
    load_patient_data,
    run_experiment,
    split_setting1,
    split_setting2,
    windowed_rows,
    write_cohort_csv,
    write_exclusions_csv,
    METRICS_COLUMNS,
    _metrics_row,
    CellResult,
)
from .lexicon import default_lexicon, load_lexicon
from .matcher import BACKEND, KeywordMatcher
from .metrics import evaluate_scores
from .models import decision_score, load_model, predict_proba, save_model
from .records import read_corpus, write_corpus
from .trends import trend_by_age_group, trend_by_year, write_trends_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage problems are config errors (exit 1)
        raise ConfigError(message)


def _configs(args):
    corpus_cfg = CorpusConfig()
    cohort_cfg = CohortConfig()
    exp = ExperimentConfig()
    if getattr(args, "config", None):
        kv = parse_kv_file(args.config)
        known_prefixes(kv, ("corpus", "cohort", "experiment"))
        corpus_cfg = apply_kv(corpus_cfg, kv, "corpus")
        cohort_cfg = apply_kv(cohort_cfg, kv, "cohort")
        exp = apply_kv(exp, kv, "experiment")
    if getattr(args, "seed", None) is not None:
        exp.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        exp.jobs = args.jobs
    return corpus_cfg, cohort_cfg, exp


def _lexicon(args):
    if getattr(args, "lexicon", None):
        return load_lexicon(args.lexicon)
    return default_lexicon()


def _corpus_dir(args) -> str:
    d = args.corpus
    if not os.path.exists(os.path.join(d, "patients.jsonl")):
        raise DataError(f"no corpus found at {d}")
    return d


def _load_data(args, lexicon):
    matcher = KeywordMatcher(lexicon)
    return load_patient_data(read_corpus(_corpus_dir(args)), matcher)


# --- generate -------------------------------------------------------------

_GEN_STATE = None


def _gen_chunk(bounds):
    import io

    from .records import diagnosis_to_json, note_to_json, patient_to_json

    cfg, seed, lexicon, lo, hi = _GEN_STATE[0], _GEN_STATE[1], _GEN_STATE[2], bounds[0], bounds[1]
    from .corpus import _Sampler, _patient_rng

    sampler = _Sampler(cfg, lexicon)
    payload = [io.StringIO() for _ in range(4)]
    for idx in range(lo, hi):
        rng = _patient_rng(seed, idx)
        record, info = sampler.sample(rng, is_case=idx < cfg.n_cases, patient_id=f"P{idx:06d}")
        payload[0].write(json.dumps(patient_to_json(record)) + "\n")
        for note in record.notes:
            payload[1].write(json.dumps(note_to_json(record.patient_id, note)) + "\n")
        for diag in record.diagnoses:
            payload[2].write(json.dumps(diagnosis_to_json(record.patient_id, diag)) + "\n")
        manifest = {
            "patient_id": record.patient_id,
            "is_case_truth": record.is_case_truth,
            "index_date_truth": None if record.index_date_truth is None else record.index_date_truth.isoformat(),
            **info,
        }
        payload[3].write(json.dumps(manifest) + "\n")
    return tuple(p.getvalue() for p in payload)


def cmd_generate(args) -> int:
    corpus_cfg, _, exp = _configs(args)
    if args.cases is not None:
        corpus_cfg.n_cases = args.cases
    if args.controls is not None:
        corpus_cfg.n_controls = args.controls
    corpus_cfg.validate()
    lexicon = _lexicon(args)
    out = os.path.join(args.out, "corpus")
    seed = exp.seed
    total = corpus_cfg.n_cases + corpus_cfg.n_controls
    jobs = max(1, exp.jobs)
    if jobs == 1:
        n = write_corpus_stream(corpus_cfg, seed, lexicon, out)
    else:
        import multiprocessing as mp
        from concurrent.futures import ProcessPoolExecutor

        global _GEN_STATE
        _GEN_STATE = (corpus_cfg, seed, lexicon)
        chunk = max(1, (total + jobs * 4 - 1) // (jobs * 4))
        bounds = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
        os.makedirs(out, exist_ok=True)
        try:
            with ProcessPoolExecutor(max_workers=jobs, mp_context=mp.get_context("fork")) as pool, \
                 open(os.path.join(out, "patients.jsonl"), "w") as fp, \
                 open(os.path.join(out, "notes.jsonl"), "w") as fn, \
                 open(os.path.join(out, "diagnoses.jsonl"), "w") as fd, \
                 open(os.path.join(out, "manifest.jsonl"), "w") as fm:
                for patients, notes, diagnoses, manifest in pool.map(_gen_chunk, bounds):
                    fp.write(patients)
                    fn.write(notes)
                    fd.write(diagnoses)
                    fm.write(manifest)
        finally:
            _GEN_STATE = None
        n = total
    print(f"generated {n} patients at {out} (seed {seed}, scan backend {BACKEND})")
    return 0


def write_corpus_stream(corpus_cfg, seed, lexicon, out) -> int:
    manifest_extra = {}

    def records():
        for record, info in generate_corpus(corpus_cfg, seed, lexicon, with_info=True):
            manifest_extra[record.patient_id] = info
            yield record

    return write_corpus(records(), out, manifest_extra)


# --- cohort ----------------------------------------------------------------


def cmd_cohort(args) -> int:
    _, cohort_cfg, exp = _configs(args)
    lexicon = _lexicon(args)
    data = _load_data(args, lexicon)
    diagnoses = {pid: d.diagnoses for pid, d in data.items()}
    meta = {pid: d.candidate() for pid, d in data.items()}
    note_dates = {pid: [dt.date.fromordinal(int(o)) for o in d.scanned.note_dates]
                  for pid, d in data.items()}
    from .cohort import build_cohort

    build = build_cohort(diagnoses, meta, note_dates, cohort_cfg, exp.seed)
    os.makedirs(args.out, exist_ok=True)
    write_cohort_csv(build, os.path.join(args.out, "cohort.csv"))
    write_exclusions_csv(build.exclusions, os.path.join(args.out, "exclusions.csv"))
    print(f"{len(build.pairs)} matched groups, {len(build.exclusions)} exclusions, "
          f"{len(build.partial_cases)} partial matches")
    return 0


def read_cohort_csv(path: str) -> list[CohortPair]:
    pairs = []
    with open(path) as f:
        reader = csv.reader(f)
        next(reader)
        for case_id, index_date, path_, control_ids in reader:
            pairs.append(CohortPair(
                CaseRecord(case_id, dt.date.fromisoformat(index_date), path_),
                control_ids.split(";") if control_ids else [],
            ))
    return pairs


def _require_cohort(args, data, cohort_cfg, exp) -> list[CohortPair]:
    path = os.path.join(args.out, "cohort.csv")
    if os.path.exists(path):
        return read_cohort_csv(path)
    from .cohort import build_cohort

    diagnoses = {pid: d.diagnoses for pid, d in data.items()}
    meta = {pid: d.candidate() for pid, d in data.items()}
    note_dates = {pid: [dt.date.fromordinal(int(o)) for o in d.scanned.note_dates]
                  for pid, d in data.items()}
    return build_cohort(diagnoses, meta, note_dates, cohort_cfg, exp.seed).pairs


# --- extract ----------------------------------------------------------------


def cmd_extract(args) -> int:
    corpus_cfg, cohort_cfg, exp = _configs(args)
    exp.predictor_set = args.predictor_set
    exp.setting = SETTING_RANDOM if args.setting == "I" else SETTING_STATION
    lexicon = _lexicon(args)
    data = _load_data(args, lexicon)
    pairs = _require_cohort(args, data, cohort_cfg, exp)
    if exp.setting == SETTING_RANDOM:
        train_pairs, test_pairs = split_setting1(pairs, exp.split_fraction, exp.seed)
        train_rows, test_rows = assemble_rows(train_pairs), assemble_rows(test_pairs)
    else:
        train_ids, test_ids, _ = split_setting2(pairs, data, exp.holdout_station_count, exp.seed)
        all_rows = assemble_rows(pairs)
        train_rows = [r for r in all_rows if r.pid in train_ids]
        test_rows = [r for r in all_rows if r.pid in test_ids]
    clean = args.clean_years
    wtrain, _ = windowed_rows(train_rows, data, clean, corpus_cfg.study_start, cohort_cfg.min_history_years)
    wtest, _ = windowed_rows(test_rows, data, clean, corpus_cfg.study_start, cohort_cfg.min_history_years)
    if not wtrain or not wtest:
        raise DataError(f"clean window {clean} leaves an empty side")
    builder = PredictorBuilder(exp.predictor_set, lexicon, exp).fit(wtrain, data)
    X = np.vstack([builder.transform(wtrain, data), builder.transform(wtest, data)])
    names = builder.feature_names()
    os.makedirs(args.out, exist_ok=True)
    if builder.vocab is not None:
        save_vocabulary(builder.vocab, os.path.join(args.out, "vocab.csv"))
    with open(os.path.join(args.out, "design.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["row", "patient_id", "case_id", "label", "side", "window_end", "clean_years"])
        for i, (wrow, side) in enumerate(
            [(w_, "train") for w_ in wtrain] + [(w_, "test") for w_ in wtest]
        ):
            w.writerow([i, wrow.row.pid, wrow.row.case_id, wrow.row.label, side,
                        wrow.window.end.isoformat(), clean])
    with open(os.path.join(args.out, "features.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["patient_id"] + names)
        all_rows_w = wtrain + wtest
        for wrow, xrow in zip(all_rows_w, X):
            w.writerow([wrow.row.pid] + [f"{v:.10g}" for v in xrow])
    print(f"extracted {X.shape[0]} rows x {X.shape[1]} features "
          f"({len(wtrain)} train / {len(wtest)} test), clean={clean}")
    return 0


def _read_design(out_dir: str):
    rows = []
    with open(os.path.join(out_dir, "design.csv")) as f:
        reader = csv.DictReader(f)
        for r in reader:
            rows.append(r)
    return rows


def _read_features(out_dir: str):
    with open(os.path.join(out_dir, "features.csv")) as f:
        reader = csv.reader(f)
        header = next(reader)
        X = [np.array([float(v) for v in row[1:]]) for row in reader]
    return header[1:], np.vstack(X)


# --- train / evaluate -------------------------------------------------------


def cmd_train(args) -> int:
    _, _, exp = _configs(args)
    design = _read_design(args.out)
    _, X = _read_features(args.out)
    train_mask = np.array([r["side"] == "train" for r in design])
    y = np.array([float(r["label"]) for r in design])
    from .harness import train_model

    model = train_model(args.model, X[train_mask], y[train_mask], exp, exp.seed)
    os.makedirs(os.path.join(args.out, "models"), exist_ok=True)
    path = os.path.join(args.out, "models", f"{args.model}.model")
    save_model(model, path)
    print(f"trained {args.model} on {int(train_mask.sum())} rows -> {path}")
    return 0


def cmd_evaluate(args) -> int:
    design = _read_design(args.out)
    _, X = _read_features(args.out)
    test_mask = np.array([r["side"] == "test" for r in design])
    y = np.array([float(r["label"]) for r in design])
    clean = int(design[0]["clean_years"]) if design else 0
    model = load_model(os.path.join(args.out, "models", f"{args.model}.model"))
    probs = predict_proba(model, X[test_mask])
    scores = decision_score(model, X[test_mask])
    report = evaluate_scores(probs, scores, y[test_mask])
    metrics_path = os.path.join(args.out, "metrics.csv")
    new_file = not os.path.exists(metrics_path)
    with open(metrics_path, "a", newline="") as f:
        w = csv.writer(f)
        if new_file:
            w.writerow(METRICS_COLUMNS)
        w.writerow(_metrics_row("file_run", CellResult(args.model, clean, "all", report)))
    print(f"{args.model}: acc={report.accuracy:.4f} roc_auc={report.roc_auc:.4f} "
          f"pr_auc={report.pr_auc:.4f} f1_case={report.f1_case:.4f} (n={report.n})")
    return 0


# --- sweep -------------------------------------------------------------------


def cmd_sweep(args) -> int:
    corpus_cfg, cohort_cfg, exp = _configs(args)
    if args.clean_years:
        exp.clean_years = _parse_clean_list(args.clean_years)
    if args.models:
        exp.models = tuple(args.models.split(","))
    if args.setting:
        exp.setting = SETTING_RANDOM if args.setting == "I" else SETTING_STATION
    if args.predictor_set:
        exp.predictor_set = args.predictor_set
    if args.subgroup:
        exp.subgroup = args.subgroup
    lexicon = _lexicon(args)
    if args.corpus:
        data = _load_data(args, lexicon)
    else:
        data = generate_and_load(corpus_cfg, exp.seed, lexicon)
    result = run_experiment(exp, data, cohort_cfg, lexicon, out_dir=args.out,
                            study_start=corpus_cfg.study_start)
    print(f"wrote {len(result.cells)} metric rows to {os.path.join(args.out, 'metrics.csv')}")
    return 0


def _parse_clean_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError("empty clean-years list")
    return tuple(out)


# --- trends ------------------------------------------------------------------


def cmd_trends(args) -> int:
    corpus_cfg, cohort_cfg, exp = _configs(args)
    lexicon = _lexicon(args)
    data = _load_data(args, lexicon)
    pairs = _require_cohort(args, data, cohort_cfg, exp)
    scanned = {pid: d.scanned for pid, d in data.items()}
    entry = {pid: d.earliest_note for pid, d in data.items()}
    birth = {pid: d.birth_date for pid, d in data.items()}
    note_filter = ("primary_care",) if args.primary_care_only else None
    curves = [
        trend_by_year(pairs, scanned, entry, note_filter=note_filter, normalization="raw"),
        trend_by_year(pairs, scanned, entry, note_filter=note_filter, normalization="per_note"),
    ]
    curves.extend(trend_by_age_group(pairs, scanned, entry, birth, note_filter=note_filter))
    os.makedirs(args.out, exist_ok=True)
    write_trends_csv(curves, os.path.join(args.out, "trends.csv"))
    print(f"wrote {sum(len(c.offsets) for c in curves)} trend rows")
    return 0


# --- explain -------------------------------------------------------------------


def cmd_explain(args) -> int:
    lexicon = _lexicon(args)
    design = _read_design(args.out)
    names, X = _read_features(args.out)
    if any(not ("@" in n) for n in names):
        raise DataError("explain requires a keyword-pair feature set")
    vocab = load_vocabulary(os.path.join(args.out, "vocab.csv"), lexicon.keywords)
    model = load_model(os.path.join(args.out, "models", "lr.model"))
    train_mask = np.array([r["side"] == "train" for r in design])
    test_mask = ~train_mask
    background = X[train_mask].mean(axis=0)
    attrs = [linear_shap(model, x, background) for x in X[test_mask]]
    # patient age at index year, from the corpus demographics
    births = {}
    with open(os.path.join(_corpus_dir(args), "patients.jsonl")) as f:
        for line in f:
            p = json.loads(line)
            births[p["patient_id"]] = dt.date.fromisoformat(p["birth_date"])
    ages = []
    for r in design:
        if r["side"] == "test":
            window_end = dt.date.fromisoformat(r["window_end"])
            idx_year = window_end.year + int(r["clean_years"])
            ages.append(idx_year - births[r["patient_id"]].year)
    table = group_importance(attrs, vocab, lexicon, ages)
    with open(os.path.join(args.out, "importance.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["keyword", "age", "group", "mean_abs_phi", "rank"])
        for kw, age, group, phi, rank in table.feature_rows:
            w.writerow([kw, age, group, f"{phi:.10g}", rank])
    with open(os.path.join(args.out, "group_importance_by_ageband.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["age_band", "group", "mean_abs_phi", "rank"])
        for band, group, phi, rank in table.group_rows:
            w.writerow([band, group, f"{phi:.10g}", rank])
    top = [f"{kw}@{age}" for kw, age, _, _, rank in table.feature_rows[:5]]
    print("top predictors:", ", ".join(top))
    return 0


# --- report -------------------------------------------------------------------


def cmd_report(args) -> int:
    path = os.path.join(args.out, "metrics.csv")
    if not os.path.exists(path):
        raise DataError(f"no metrics.csv under {args.out}")
    with open(path) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise DataError("metrics.csv is empty")
    cols = ["model", "clean_years", "subgroup", "precision_case", "recall_case", "f1_case",
            "accuracy", "pr_auc", "roc_auc", "hl_p"]
    widths = {c: max(len(c), max(len(r[c]) for r in rows)) for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        if args.all or r["subgroup"] == "all":
            print("  ".join(r[c].ljust(widths[c]) for c in cols))
    return 0


# --- entry point ---------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="adscreen", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--out", default="runs/default", help="artifact directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for parallel stages")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("generate", help="synthesize a corpus")
    sp.add_argument("--cases", type=int, default=None)
    sp.add_argument("--controls", type=int, default=None)
    sp.add_argument("--lexicon")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("cohort", help="ascertain cases and match controls")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--lexicon")
    sp.set_defaults(func=cmd_cohort)

    sp = sub.add_parser("extract", help="split, vocabulary, features")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--clean-years", type=int, default=10)
    sp.add_argument("--setting", choices=("I", "II"), default="I")
    sp.add_argument("--predictor-set", default="keywords")
    sp.add_argument("--lexicon")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("train", help="fit a model from extracted features")
    sp.add_argument("--model", choices=("lr", "svm", "adaboost", "rf"), default="lr")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a trained model on the test side")
    sp.add_argument("--model", choices=("lr", "svm", "adaboost", "rf"), default="lr")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="full experiment grid in one run")
    sp.add_argument("--corpus", default=None, help="existing corpus dir (default: generate in memory)")
    sp.add_argument("--clean-years", default=None, help="e.g. 0-10 or 0,5,10")
    sp.add_argument("--models", default=None, help="comma list from lr,svm,adaboost,rf")
    sp.add_argument("--setting", choices=("I", "II"), default=None)
    sp.add_argument("--predictor-set", default=None)
    sp.add_argument("--subgroup", choices=("sex", "age_band", "race_ethnicity"), default=None)
    sp.add_argument("--lexicon")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("trends", help="keyword occurrence trend curves")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--primary-care-only", action="store_true")
    sp.add_argument("--lexicon")
    sp.set_defaults(func=cmd_trends)

    sp = sub.add_parser("explain", help="Shapley attribution for the lr model")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--lexicon")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("report", help="print metrics.csv as a table")
    sp.add_argument("--all", action="store_true", help="include subgroup rows")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except AdscreenError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
