"""Domain record types for the longitudinal corpus, plus JSON Lines round-trip.

A corpus on disk is four JSONL files in one directory:

    patients.jsonl   one object per patient: demographics, medications,
                     station visits, ground-truth flags
    notes.jsonl      one object per note: patient_id, date, note_type,
                     clinic_stop_code, text
    diagnoses.jsonl  one object per diagnosis event
    manifest.jsonl   ground truth only (patient_id, is_case_truth,
                     index_date_truth, ascertainment path, home station)

Notes are written grouped by patient in patient order, so readers can
stream them without an index.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from dataclasses import dataclass, field

from .errors import DataError

NOTE_TYPES = (
    "primary_care",
    "memory_clinic",
    "neurology",
    "geriatric_psychiatry",
    "geriatric_medicine",
    "cognitive_nursing",
    "mental_health",
    "comp_and_pension",
    "consultation",
)

SEXES = ("female", "male")

RACES = (
    "white",
    "black_or_african_american",
    "asian",
    "native_hawaiian_or_other_pacific_islander",
    "american_indian_or_alaska_native",
    "unknown",
)

ETHNICITIES = ("hispanic_or_latino", "not_hispanic_or_latino")

# Synthetic clinic stop codes: one per note type, plus dedicated codes for
# specialty and dementia diagnosis clinics. Only the boolean classification
# of a visit matters downstream; the integers are arbitrary but stable.
STOP_CODES = {name: 300 + i for i, name in enumerate(NOTE_TYPES)}
SPECIALTY_STOP_CODE = 410
DEMENTIA_CLINIC_STOP_CODE = 420


@dataclass(slots=True)
class Note:
    date: dt.date
    note_type: str
    clinic_stop_code: int
    text: str


@dataclass(slots=True)
class DiagnosisEvent:
    date: dt.date
    icd_code: str
    clinic_stop_code: int
    is_specialty_clinic: bool
    is_dementia_clinic: bool
    provider_type: str


@dataclass(slots=True)
class MedicationEvent:
    date: dt.date
    drug_class: str


@dataclass(slots=True)
class StationVisit:
    date: dt.date
    station_id: int


@dataclass
class PatientRecord:
    patient_id: str
    birth_date: dt.date
    sex: str
    race: str
    ethnicity: str
    notes: list[Note] = field(default_factory=list)
    diagnoses: list[DiagnosisEvent] = field(default_factory=list)
    medications: list[MedicationEvent] = field(default_factory=list)
    station_visits: list[StationVisit] = field(default_factory=list)
    is_case_truth: bool = False
    index_date_truth: dt.date | None = None

    def validate(self) -> None:
        if self.sex not in SEXES:
            raise DataError(f"unknown sex {self.sex!r} for {self.patient_id}")
        if self.race not in RACES:
            raise DataError(f"unknown race {self.race!r} for {self.patient_id}")
        if self.ethnicity not in ETHNICITIES:
            raise DataError(f"unknown ethnicity {self.ethnicity!r} for {self.patient_id}")
        dates = [n.date for n in self.notes]
        if dates != sorted(dates):
            raise DataError(f"notes out of order for {self.patient_id}")
        if dates and dates[0] < self.birth_date:
            raise DataError(f"note predates birth for {self.patient_id}")
        for n in self.notes:
            if not n.text:
                raise DataError(f"empty note text for {self.patient_id}")
            if n.note_type not in NOTE_TYPES:
                raise DataError(f"unknown note type {n.note_type!r} for {self.patient_id}")
        for d in self.diagnoses:
            if d.is_dementia_clinic and not d.is_specialty_clinic:
                raise DataError(f"dementia clinic flag without specialty flag for {self.patient_id}")
        if self.is_case_truth and self.index_date_truth is None:
            raise DataError(f"case without index date for {self.patient_id}")

    def first_visit_date(self) -> dt.date:
        if not self.station_visits:
            raise DataError(f"{self.patient_id} has no visits")
        return min(v.date for v in self.station_visits)


def _iso(d: dt.date | None) -> str | None:
    return None if d is None else d.isoformat()


def _date(s: str | None) -> dt.date | None:
    return None if s is None else dt.date.fromisoformat(s)


def patient_to_json(rec: PatientRecord) -> dict:
    return {
        "patient_id": rec.patient_id,
        "birth_date": _iso(rec.birth_date),
        "sex": rec.sex,
        "race": rec.race,
        "ethnicity": rec.ethnicity,
        "medications": [[_iso(m.date), m.drug_class] for m in rec.medications],
        "station_visits": [[_iso(v.date), v.station_id] for v in rec.station_visits],
        "is_case_truth": rec.is_case_truth,
        "index_date_truth": _iso(rec.index_date_truth),
    }


def note_to_json(patient_id: str, n: Note) -> dict:
    return {
        "patient_id": patient_id,
        "date": _iso(n.date),
        "note_type": n.note_type,
        "clinic_stop_code": n.clinic_stop_code,
        "text": n.text,
    }


def diagnosis_to_json(patient_id: str, d: DiagnosisEvent) -> dict:
    return {
        "patient_id": patient_id,
        "date": _iso(d.date),
        "icd_code": d.icd_code,
        "clinic_stop_code": d.clinic_stop_code,
        "is_specialty_clinic": d.is_specialty_clinic,
        "is_dementia_clinic": d.is_dementia_clinic,
        "provider_type": d.provider_type,
    }


def write_corpus(records, out_dir: str, manifest_extra=None) -> int:
    """Stream patient records to the four JSONL corpus files.

    `records` may be any iterable; each record is written and released, so
    corpora larger than memory are fine. Returns the number of patients
    written. `manifest_extra` maps patient_id -> dict merged into the
    manifest row (generator internals such as the home station).
    """
    os.makedirs(out_dir, exist_ok=True)
    n = 0
    with open(os.path.join(out_dir, "patients.jsonl"), "w") as fp, \
         open(os.path.join(out_dir, "notes.jsonl"), "w") as fn, \
         open(os.path.join(out_dir, "diagnoses.jsonl"), "w") as fd, \
         open(os.path.join(out_dir, "manifest.jsonl"), "w") as fm:
        for rec in records:
            fp.write(json.dumps(patient_to_json(rec)) + "\n")
            for note in rec.notes:
                fn.write(json.dumps(note_to_json(rec.patient_id, note)) + "\n")
            for diag in rec.diagnoses:
                fd.write(json.dumps(diagnosis_to_json(rec.patient_id, diag)) + "\n")
            manifest = {
                "patient_id": rec.patient_id,
                "is_case_truth": rec.is_case_truth,
                "index_date_truth": _iso(rec.index_date_truth),
            }
            if manifest_extra and rec.patient_id in manifest_extra:
                manifest.update(manifest_extra[rec.patient_id])
            fm.write(json.dumps(manifest) + "\n")
            n += 1
    return n


def read_corpus(corpus_dir: str):
    """Yield PatientRecord objects from a corpus directory.

    Relies on notes.jsonl and diagnoses.jsonl being grouped by patient in
    the same order as patients.jsonl (write_corpus guarantees this).
    """
    notes_path = os.path.join(corpus_dir, "notes.jsonl")
    diag_path = os.path.join(corpus_dir, "diagnoses.jsonl")
    patients_path = os.path.join(corpus_dir, "patients.jsonl")
    if not os.path.exists(patients_path):
        raise DataError(f"no corpus at {corpus_dir}")

    def grouped(path, key="patient_id"):
        # Generator of (patient_id, list-of-rows); rows must be contiguous per patient.
        current_id = None
        bucket: list[dict] = []
        with open(path) as f:
            for line in f:
                row = json.loads(line)
                if row[key] != current_id:
                    if current_id is not None:
                        yield current_id, bucket
                    current_id = row[key]
                    bucket = []
                bucket.append(row)
        if current_id is not None:
            yield current_id, bucket

    notes_iter = grouped(notes_path)
    diag_iter = grouped(diag_path)
    pending_note = next(notes_iter, None)
    pending_diag = next(diag_iter, None)

    with open(patients_path) as f:
        for line in f:
            p = json.loads(line)
            pid = p["patient_id"]
            notes: list[Note] = []
            diagnoses: list[DiagnosisEvent] = []
            if pending_note is not None and pending_note[0] == pid:
                notes = [
                    Note(_date(r["date"]), r["note_type"], r["clinic_stop_code"], r["text"])
                    for r in pending_note[1]
                ]
                pending_note = next(notes_iter, None)
            if pending_diag is not None and pending_diag[0] == pid:
                diagnoses = [
                    DiagnosisEvent(
                        _date(r["date"]),
                        r["icd_code"],
                        r["clinic_stop_code"],
                        r["is_specialty_clinic"],
                        r["is_dementia_clinic"],
                        r["provider_type"],
                    )
                    for r in pending_diag[1]
                ]
                pending_diag = next(diag_iter, None)
            yield PatientRecord(
                patient_id=pid,
                birth_date=_date(p["birth_date"]),
                sex=p["sex"],
                race=p["race"],
                ethnicity=p["ethnicity"],
                notes=notes,
                diagnoses=diagnoses,
                medications=[MedicationEvent(_date(d), c) for d, c in p["medications"]],
                station_visits=[StationVisit(_date(d), s) for d, s in p["station_visits"]],
                is_case_truth=p["is_case_truth"],
                index_date_truth=_date(p["index_date_truth"]),
            )
