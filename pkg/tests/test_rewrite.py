"""Annotation insertion planning, hash-guarded application, erasure."""

import pathlib

import pytest

from quill.errors import (
    HashMismatch, IllegalPosition, JavaParseError, QuillError, StaleAnchor,
)
from quill.ingest import QualifierAliasTable, erase_annotations, parse_class
from quill.javasrc.lexer import lex
from quill.rewrite import (
    DEFAULT_ANNOTATION, EditPlan, FileEdit, apply_edits, diff_of,
    erase_project, plan_edits,
)

BOX = """package p;
import javax.annotation.Nullable;
public class Box {
    @Nullable String item;
    String tag;
    @Nullable String getItem() { return item; }
    void put(@Nullable String v) { this.item = v; }
}
"""

BOX_TRUTH = {"p.Box#item", "p.Box#getItem()", "p.Box#put(String)#0"}


def write_project(tmp_path, files):
    for name, src in files.items():
        p = tmp_path / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(src)
    return tmp_path


def scan_labels(buf, path="F.java"):
    g = parse_class(buf, QualifierAliasTable(), path)
    return {n.anchor.sig for n in g.nodes if n.label is not None}


def test_plan_apply_rescan_round_trip(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    plan = plan_edits(BOX_TRUTH, root)
    apply_edits(plan, root)
    edited = (root / "Box.java").read_bytes()
    assert scan_labels(edited, "Box.java") == BOX_TRUTH
    imports = [t for t, _, k in
               ((text, o, kind) for fe in plan.files
                for o, text, kind in fe.insertions)
               if k == "import"]
    assert len(imports) == 1


def test_apply_then_erase_is_byte_identical(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    erased = (root / "Box.java").read_bytes()
    plan = plan_edits(BOX_TRUTH, root)
    apply_edits(plan, root)
    edited = (root / "Box.java").read_bytes()
    assert erase_annotations(edited, path="Box.java") == erased


def test_empty_decided_set_plans_nothing(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    before = (root / "Box.java").read_bytes()
    plan = plan_edits(set(), root)
    assert plan.files == []
    apply_edits(plan, root)
    assert (root / "Box.java").read_bytes() == before


def test_two_members_share_one_import(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    plan = plan_edits({"p.Box#item", "p.Box#getItem()"}, root)
    kinds = [k for fe in plan.files for _, _, k in fe.insertions]
    assert kinds.count("annotation") == 2
    assert kinds.count("import") == 1
    apply_edits(plan, root)
    assert scan_labels((root / "Box.java").read_bytes(),
                       "Box.java") == {"p.Box#item", "p.Box#getItem()"}


def test_parameter_annotation_lands_before_its_type(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    plan = plan_edits({"p.Box#put(String)#0"}, root)
    apply_edits(plan, root)
    text = (root / "Box.java").read_text()
    assert "void put(@Nullable String v)" in text


def test_annotation_goes_after_modifiers(tmp_path):
    src = """package p;
public class T {
    private static String f;
}
"""
    root = write_project(tmp_path, {"T.java": src})
    plan = plan_edits({"p.T#f"}, root)
    apply_edits(plan, root)
    assert "private static @Nullable String f;" in (root / "T.java").read_text()


def test_stale_signature_raises(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    with pytest.raises(StaleAnchor):
        plan_edits({"p.Box#gone"}, root)


def test_second_apply_hits_hash_guard(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    plan = plan_edits({"p.Box#item"}, root)
    apply_edits(plan, root)
    with pytest.raises(HashMismatch):
        apply_edits(plan, root)


def test_edit_after_planning_hits_hash_guard(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    plan = plan_edits({"p.Box#item"}, root)
    path = root / "Box.java"
    path.write_bytes(path.read_bytes() + b"// drift\n")
    with pytest.raises(HashMismatch):
        apply_edits(plan, root)


def test_failed_run_leaves_no_partial_edit(tmp_path):
    a = BOX
    b = BOX.replace("Box", "Crate")
    root = write_project(tmp_path, {"A.java": a, "B.java": b})
    erase_project(root)
    plan = plan_edits({"p.Box#item", "p.Crate#item"}, root)
    before_a = (root / "A.java").read_bytes()
    (root / "B.java").write_bytes((root / "B.java").read_bytes() + b"//x\n")
    with pytest.raises(HashMismatch):
        apply_edits(plan, root)
    assert (root / "A.java").read_bytes() == before_a


def test_token_stream_gains_only_inserted_tokens(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    before = len(lex((root / "Box.java").read_bytes())[0])
    plan = plan_edits(BOX_TRUTH, root)
    apply_edits(plan, root)
    after = len(lex((root / "Box.java").read_bytes())[0])
    inserted = sum(len(lex(text.encode())[0]) - 1  # minus each EOF token
                   for fe in plan.files for _, text, _ in fe.insertions)
    assert after == before + inserted


def test_plan_validation_rejects_bad_shapes():
    unsorted_plan = EditPlan(DEFAULT_ANNOTATION, [
        FileEdit("A.java", "0" * 64,
                 [(5, "@Nullable ", "annotation"),
                  (9, "@Nullable ", "annotation")])])
    with pytest.raises(QuillError):
        unsorted_plan.validate()
    at_zero = EditPlan(DEFAULT_ANNOTATION, [
        FileEdit("A.java", "0" * 64, [(0, "@Nullable ", "annotation")])])
    with pytest.raises(IllegalPosition):
        at_zero.validate()


def test_partial_multi_declarator_field_rejected(tmp_path):
    src = """package p;
public class T {
    String a, b;
}
"""
    root = write_project(tmp_path, {"T.java": src})
    with pytest.raises(IllegalPosition):
        plan_edits({"p.T#a"}, root)
    plan = plan_edits({"p.T#a", "p.T#b"}, root)
    apply_edits(plan, root)
    edited = (root / "T.java").read_bytes()
    assert b"@Nullable String a, b;" in edited
    assert scan_labels(edited, "T.java") == {"p.T#a", "p.T#b"}


def test_import_name_clash_spells_fully_qualified(tmp_path):
    src = """package p;
import other.Nullable;
public class T {
    Nullable widget;
    String f;
}
"""
    root = write_project(tmp_path, {"T.java": src})
    plan = plan_edits({"p.T#f"}, root)
    kinds = [k for fe in plan.files for _, _, k in fe.insertions]
    assert "import" not in kinds
    apply_edits(plan, root)
    edited = (root / "T.java").read_bytes()
    assert b"@javax.annotation.Nullable String f;" in edited
    assert scan_labels(edited, "T.java") == {"p.T#f"}


def test_import_placement_without_package_or_imports(tmp_path):
    src = """public class T {
    String f;
}
"""
    root = write_project(tmp_path, {"T.java": src})
    plan = plan_edits({"T#f"}, root)
    apply_edits(plan, root)
    edited = (root / "T.java").read_bytes()
    assert edited.startswith(b"import javax.annotation.Nullable;\n")
    assert scan_labels(edited, "T.java") == {"T#f"}
    assert erase_annotations(edited, path="T.java") == src.encode()


def test_import_placement_after_package_line(tmp_path):
    src = """package p;
public class T {
    String f;
}
"""
    root = write_project(tmp_path, {"T.java": src})
    plan = plan_edits({"p.T#f"}, root)
    apply_edits(plan, root)
    lines = (root / "T.java").read_text().splitlines()
    assert lines[0] == "package p;"
    assert lines[1] == "import javax.annotation.Nullable;"
    assert erase_annotations((root / "T.java").read_bytes(),
                             path="T.java") == src.encode()


def test_dry_run_returns_bytes_without_writing(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    before = (root / "Box.java").read_bytes()
    plan = plan_edits({"p.Box#item"}, root)
    result = apply_edits(plan, root, dry_run=True)
    assert (root / "Box.java").read_bytes() == before
    assert b"@Nullable String item;" in result["Box.java"]
    diff = diff_of(plan, root)
    assert "+    @Nullable String item;" in diff
    assert "-    String item;" in diff


def test_plan_json_round_trip(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    plan = plan_edits(BOX_TRUTH, root)
    path = tmp_path / "plan.json"
    plan.save(path)
    back = EditPlan.load(path)
    assert back.to_json() == plan.to_json()
    assert back.insertion_count() == plan.insertion_count()


def test_corrupt_plan_cannot_break_parse(tmp_path):
    root = write_project(tmp_path, {"Box.java": BOX})
    buf = (root / "Box.java").read_bytes()
    import hashlib
    bad = EditPlan(DEFAULT_ANNOTATION, [
        FileEdit("Box.java", hashlib.sha256(buf).hexdigest(),
                 [(20, "}}}{{{ ", "annotation")])])
    with pytest.raises(JavaParseError):
        apply_edits(bad, root)
    assert (root / "Box.java").read_bytes() == buf


def test_erase_project_counts_changed_files(tmp_path):
    plain = """package p;
public class Plain {
    String f;
}
"""
    root = write_project(tmp_path, {"Box.java": BOX, "Plain.java": plain})
    assert erase_project(root) == 1
    assert erase_project(root) == 0


def test_multi_file_plan_edits_both(tmp_path):
    crate = BOX.replace("Box", "Crate")
    root = write_project(tmp_path, {"Box.java": BOX, "sub/Crate.java": crate})
    erase_project(root)
    plan = plan_edits({"p.Box#item", "p.Crate#item"}, root)
    assert [fe.path for fe in plan.files] == ["Box.java", "sub/Crate.java"]
    apply_edits(plan, root)
    assert scan_labels((root / "Box.java").read_bytes(),
                       "Box.java") == {"p.Box#item"}
    assert scan_labels((root / "sub/Crate.java").read_bytes(),
                       "Crate.java") == {"p.Crate#item"}


def test_prediction_set_drives_planning(tmp_path):
    from quill.predict import Prediction, PredictionSet
    root = write_project(tmp_path, {"Box.java": BOX})
    erase_project(root)
    pset = PredictionSet({
        "p.Box#item": Prediction("p.Box#item", 0.95, True),
        "p.Box#tag": Prediction("p.Box#tag", 0.2, False)}, 0.9)
    plan = plan_edits(pset, root)
    apply_edits(plan, root)
    assert scan_labels((root / "Box.java").read_bytes(),
                       "Box.java") == {"p.Box#item"}
