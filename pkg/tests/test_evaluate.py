"""Scoring, warning counting, and the data-fraction study."""

import shutil
import sys

import pytest

from quill.encoding import build_napast
from quill.errors import (CheckerFailed, MissingChecker, QuillError,
                          SignatureMismatch)
from quill.evaluate import (EvalReport, ProjectScore, count_warnings,
                            data_fraction_study, evaluate_corpus,
                            sample_fraction, score_predictions, score_sets,
                            study_csv, truth_signatures)
from quill.generator import GeneratorSpec, generate_corpus, write_corpus
from quill.ingest import parse_class
from quill.learn import GcnConfig, SplitSpec, train
from quill.predict import ModelRouter, PredictionSet, Prediction
from quill.rewrite import erase_project
from quill.stubcheck import check_project, check_source

STUB_CMD = f"{sys.executable} -m quill.stubcheck {{project_dir}}"
NULLNESS = r"warning: \[Nullness\]"


def naps_of(files):
    return [build_napast(parse_class(files[n], path=n)) for n in sorted(files)]


def test_half_overlap_scores_point_five():
    s = score_sets({"A#x", "A#y"}, {"A#y", "A#z"})
    assert s.tp == 1 and s.fp == 1 and s.fn == 1
    assert s.precision == 0.5 and s.recall == 0.5 and s.f1 == 0.5


def test_empty_denominators_score_zero():
    s = score_sets(set(), {"A#x"})
    assert s.precision == 0.0 and s.f1 == 0.0 and s.recall == 0.0
    s = score_sets(set(), set())
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)


def test_micro_totals_sum_counts_not_ratios():
    rep = EvalReport(projects={
        "big": ProjectScore(tp=90, fp=10, fn=0),
        "small": ProjectScore(tp=0, fp=10, fn=2),
    })
    t = rep.totals()
    assert (t.tp, t.fp, t.fn) == (90, 20, 2)
    assert t.precision == pytest.approx(90 / 110)
    macro = (90 / 100 + 0.0) / 2
    assert t.precision != pytest.approx(macro)


def test_non_canonical_signatures_rejected():
    with pytest.raises(SignatureMismatch):
        score_sets({"justAName"}, {"A#x"})
    with pytest.raises(SignatureMismatch):
        score_sets({"A#x"}, {"getFoo()"})


def test_prediction_set_scoring():
    pset = PredictionSet(entries={
        "A#x": Prediction("A#x", 0.95, True, [], [], "A", 1),
        "A#y": Prediction("A#y", 0.40, False, [], [], "A", 2),
    }, threshold=0.9)
    s = score_predictions(pset, {"A#x", "A#y"})
    assert s.tp == 1 and s.fn == 1 and s.fp == 0


def test_report_json_round_trip_and_csv(tmp_path):
    rep = EvalReport(projects={"p": ProjectScore(tp=3, fp=1, fn=2)},
                     warnings_baseline=100, warnings_after=40,
                     runtime_seconds=1.5)
    rep.save(tmp_path / "r.json")
    back = EvalReport.load(tmp_path / "r.json")
    assert back.projects["p"] == rep.projects["p"]
    assert back.warnings_baseline == 100 and back.warnings_after == 40
    csv_text = rep.to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0].startswith("project,")
    assert lines[-1].startswith("TOTAL,3,1,2")


def test_reduction_pct_rendering():
    rep = EvalReport(warnings_baseline=100, warnings_after=40)
    assert rep.reduction_pct() == pytest.approx(60.0)
    assert rep.to_json()["reduction_pct"] == pytest.approx(60.0)
    rep = EvalReport(warnings_baseline=0, warnings_after=0)
    assert rep.reduction_pct() is None
    assert rep.to_json()["reduction_pct"] == "-"
    assert EvalReport().to_json()["reduction_pct"] == "-"


def test_count_warnings_counts_matching_lines(tmp_path):
    cmd = (f"{sys.executable} -c \"print('a.java:1: warning: x'); "
           f"print('note: y'); print('b.java:2: warning: z')\"")
    assert count_warnings(tmp_path, cmd, r"warning:") == 2


def test_count_warnings_failure_modes(tmp_path):
    with pytest.raises(MissingChecker):
        count_warnings(tmp_path, "")
    with pytest.raises(MissingChecker):
        count_warnings(tmp_path, "no-such-binary-xyz {project_dir}")
    bad = f"{sys.executable} -c \"import sys; sys.exit(3)\""
    with pytest.raises(CheckerFailed):
        count_warnings(tmp_path, bad, r"warning:")
    noisy = (f"{sys.executable} -c \"import sys; "
             f"print('f.java:1: warning: w'); sys.exit(1)\"")
    assert count_warnings(tmp_path, noisy, r"warning:") == 1


def test_stubcheck_flags_null_flows():
    src = """import javax.annotation.Nullable;
class A {
  String bad;
  @Nullable String ok;
  String init = null;
  String load() { return null; }
  @Nullable String fine() { return null; }
  void set() { this.bad = null; this.ok = null; }
  void local() { String x = null; }
  void compare() { if (bad != null) { this.ok = bad; } }
}
"""
    warnings = check_source(src, "A.java")
    assert len(warnings) == 3
    assert all("warning: [Nullness]" in w for w in warnings)
    assert any("init" in w for w in warnings)
    assert any("load" in w for w in warnings)
    assert any("bad" in w for w in warnings)


def test_stubcheck_over_generated_corpus(tmp_path):
    files, _ = generate_corpus(GeneratorSpec(class_count=30, seed=5))
    annotated = tmp_path / "annotated"
    erased = tmp_path / "erased"
    write_corpus(files, annotated)
    shutil.copytree(annotated, erased)
    erase_project(erased)

    assert check_project(annotated) == []
    baseline = count_warnings(erased, STUB_CMD, NULLNESS)
    after = count_warnings(annotated, STUB_CMD, NULLNESS)
    assert baseline > 0 and after == 0
    rep = EvalReport(warnings_baseline=baseline, warnings_after=after)
    assert rep.reduction_pct() == pytest.approx(100.0)


def test_truth_signatures_reads_labels():
    files, manifest = generate_corpus(GeneratorSpec(class_count=20, seed=6))
    naps = naps_of(files)
    want = {s for c in manifest["classes"] for s in c["truth"]}
    assert truth_signatures(naps) == want


def test_evaluate_corpus_counts_are_consistent():
    files, _ = generate_corpus(GeneratorSpec(class_count=24, seed=7))
    naps = naps_of(files)
    truth = truth_signatures(naps)
    ckpt, _ = train(naps, SplitSpec(seed=0), GcnConfig(hidden_dim=8, seed=0),
                    rounds=2)
    pset, report = evaluate_corpus(naps, ModelRouter.single(ckpt), tau=0.5)
    t = report.totals()
    assert t.tp + t.fn == len(truth)
    assert t.tp + t.fp == len(pset.decided_signatures())
    assert report.runtime_seconds > 0


def test_sample_fraction_is_seeded_and_stable():
    ids = [f"c{i}" for i in range(40)]
    a = sample_fraction(ids, 0.25, seed=3)
    b = sample_fraction(ids, 0.25, seed=3)
    assert a == b and len(a) == 10
    assert sample_fraction(ids, 0.25, seed=4) != a
    assert sample_fraction(ids, 1.0, seed=9) == sorted(ids)
    assert set(a) <= set(ids)


def test_fraction_validation():
    files, _ = generate_corpus(GeneratorSpec(class_count=10, seed=8))
    naps = naps_of(files)
    cfg = GcnConfig(hidden_dim=8, seed=0)
    with pytest.raises(QuillError):
        data_fraction_study(naps, naps, [0.0], cfg)
    with pytest.raises(QuillError):
        data_fraction_study(naps, naps, [1.5], cfg)


def test_data_fraction_study_rows_and_csv():
    files, _ = generate_corpus(GeneratorSpec(class_count=30, seed=9))
    naps = naps_of(files)
    cfg = GcnConfig(hidden_dim=8, seed=0)
    rows = data_fraction_study(naps, naps, [1.0, 0.5], cfg, seed=1, rounds=2,
                               tau=0.5)
    assert [r["fraction"] for r in rows] == [0.5, 1.0]
    assert rows[0]["train_classes"] == 15
    assert rows[1]["train_classes"] == 30

    ckpt, _ = train(naps, SplitSpec(seed=1), cfg, rounds=2)
    _, report = evaluate_corpus(naps, ModelRouter.single(ckpt), tau=0.5)
    assert rows[1]["f1"] == pytest.approx(report.totals().f1)

    text = study_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == "fraction,train_classes,precision,recall,f1"
    assert len(lines) == 3 and lines[1].startswith("0.5000,15,")
