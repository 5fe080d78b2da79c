import csv
import json
import os

import pytest

from adscreen.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Run the full file-based CLI flow once on a tiny corpus."""
    out = str(tmp_path_factory.mktemp("ws"))
    corpus = os.path.join(out, "corpus")
    assert main(["--out", out, "--seed", "9", "generate", "--cases", "60", "--controls", "540"]) == 0
    assert main(["--out", out, "cohort", "--corpus", corpus]) == 0
    assert main(["--out", out, "--seed", "9", "extract", "--corpus", corpus, "--clean-years", "2"]) == 0
    assert main(["--out", out, "train", "--model", "lr"]) == 0
    assert main(["--out", out, "evaluate", "--model", "lr"]) == 0
    assert main(["--out", out, "trends", "--corpus", corpus]) == 0
    assert main(["--out", out, "explain", "--corpus", corpus]) == 0
    return out


class TestFlow:
    def test_corpus_files(self, workspace):
        corpus = os.path.join(workspace, "corpus")
        for name in ("patients.jsonl", "notes.jsonl", "diagnoses.jsonl", "manifest.jsonl"):
            assert os.path.getsize(os.path.join(corpus, name)) > 0

    def test_cohort_csv(self, workspace):
        with open(os.path.join(workspace, "cohort.csv")) as f:
            rows = list(csv.DictReader(f))
        assert rows
        assert set(rows[0]) == {"case_id", "index_date", "ascertainment_path", "control_ids"}

    def test_design_and_features_align(self, workspace):
        with open(os.path.join(workspace, "design.csv")) as f:
            design = list(csv.DictReader(f))
        with open(os.path.join(workspace, "features.csv")) as f:
            features = list(csv.reader(f))[1:]
        assert len(design) == len(features)
        assert all(d["patient_id"] == frow[0] for d, frow in zip(design, features))

    def test_metrics_row_written(self, workspace):
        with open(os.path.join(workspace, "metrics.csv")) as f:
            rows = list(csv.DictReader(f))
        assert rows[0]["model"] == "lr"
        assert float(rows[0]["roc_auc"]) > 0.55

    def test_trends_csv(self, workspace):
        with open(os.path.join(workspace, "trends.csv")) as f:
            rows = list(csv.DictReader(f))
        assert any(r["normalization"] == "per_note" for r in rows)

    def test_importance_files(self, workspace):
        with open(os.path.join(workspace, "importance.csv")) as f:
            rows = list(csv.DictReader(f))
        assert rows and "@" not in rows[0]["keyword"]
        assert os.path.exists(os.path.join(workspace, "group_importance_by_ageband.csv"))

    def test_report_prints(self, workspace, capsys):
        assert main(["--out", workspace, "report"]) == 0
        out = capsys.readouterr().out
        assert "roc_auc" in out and "lr" in out

    def test_model_file_loadable(self, workspace):
        from adscreen.models import load_model

        model = load_model(os.path.join(workspace, "models", "lr.model"))
        assert model.kind == "logistic"


class TestSweepCommand:
    def test_sweep_from_existing_corpus(self, workspace, tmp_path):
        corpus = os.path.join(workspace, "corpus")
        out = str(tmp_path / "sweep")
        code = main(["--out", out, "--seed", "9", "sweep", "--corpus", corpus,
                     "--clean-years", "0,2", "--models", "lr"])
        assert code == 0
        with open(os.path.join(out, "metrics.csv")) as f:
            rows = list(csv.DictReader(f))
        assert {r["clean_years"] for r in rows} == {"0", "2"}


class TestGenerateParallel:
    def test_jobs_do_not_change_output(self, tmp_path):
        outs = []
        for jobs in ("1", "2"):
            out = str(tmp_path / f"gen{jobs}")
            assert main(["--out", out, "--seed", "4", "--jobs", jobs,
                         "generate", "--cases", "8", "--controls", "24"]) == 0
            outs.append(os.path.join(out, "corpus"))
        for name in ("patients.jsonl", "notes.jsonl", "diagnoses.jsonl", "manifest.jsonl"):
            a = open(os.path.join(outs[0], name), "rb").read()
            b = open(os.path.join(outs[1], name), "rb").read()
            assert a == b, name


class TestExitCodes:
    def test_config_error_is_one(self):
        assert main(["--out", "/tmp/x", "sweep", "--clean-years", "99"]) == 1

    def test_unknown_flag_is_one(self, capsys):
        assert main(["--out", "/tmp/x", "generate", "--bogus"]) == 1

    def test_missing_corpus_is_two(self, tmp_path):
        assert main(["--out", str(tmp_path), "cohort", "--corpus", str(tmp_path / "nope")]) == 2

    def test_missing_metrics_is_two(self, tmp_path):
        assert main(["--out", str(tmp_path), "report"]) == 2

    def test_metric_undefined_is_three(self, tmp_path, workspace):
        # single-class test side: ROC AUC undefined
        import shutil

        out = str(tmp_path / "broken")
        shutil.copytree(workspace, out)
        design_path = os.path.join(out, "design.csv")
        with open(design_path) as f:
            rows = list(csv.reader(f))
        header, body = rows[0], rows[1:]
        li = header.index("label")
        si = header.index("side")
        for r in body:
            if r[si] == "test":
                r[li] = "0"
        with open(design_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows(body)
        assert main(["--out", out, "evaluate", "--model", "lr"]) == 3
