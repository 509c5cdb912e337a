import random

import pytest

from quill.errors import JavaParseError
from quill.graphs import RawGraph
from quill.ingest import (
    QualifierAliasTable, erase_annotations, parse_class, read_graphs,
    scan_corpus, write_graphs,
)

NULLABLE_IMPORT = "import javax.annotation.Nullable;\n"


def test_field_label_harvest_oracle():
    src = NULLABLE_IMPORT + "class A { @Nullable String f; String g; }\n"
    g = parse_class(src)
    assert g.class_id == "A"
    labeled = [n for n in g.nodes if n.label is not None]
    assert len(labeled) == 1
    assert labeled[0].kind == "VariableDeclarator"
    assert labeled[0].name == "f"
    assert labeled[0].anchor.sig == "A#f"
    unlabeled = [n for n in g.nodes if n.name == "g"]
    assert unlabeled[0].label is None
    assert unlabeled[0].anchor.sig == "A#g"
    # qualifier annotations are harvested, never nodes
    assert all("Anno" not in n.kind for n in g.nodes)
    edges = g.edge_lists()
    assert len(edges["ParentChild"]) == len(g.nodes) - 1
    assert edges["ChildParent"] == sorted(
        (c, p) for p, c in edges["ParentChild"])


def test_modifier_inheritance_onto_declarator():
    src = "class A { public static int f; }\n"
    g = parse_class(src)
    decl = next(n for n in g.nodes if n.name == "f")
    assert decl.modifiers == ("public", "static")
    assert decl.label is None
    assert "label_site" not in decl.tags  # primitive fields are not sites
    wrapper = g.nodes[g.parent[decl.id]]
    assert "field_decl" in wrapper.tags
    assert "primitive_decl" in wrapper.tags


def test_method_and_param_signatures():
    src = ("package p;\n" + NULLABLE_IMPORT +
           "class A {\n"
           "  A(int x) {}\n"
           "  @Nullable String m(@Nullable String a, int b, String[] c) {"
           " return a; }\n"
           "  void v() {}\n"
           "}\n")
    g = parse_class(src)
    sigs = {n.anchor.sig for n in g.nodes if n.anchor.sig}
    assert "p.A#<init>(int)" in sigs
    assert "p.A#m(String,int,String[])" in sigs
    assert "p.A#m(String,int,String[])#0" in sigs
    assert "p.A#m(String,int,String[])#2" in sigs
    assert "p.A#m(String,int,String[])#1" not in sigs  # primitive param
    labeled = {n.anchor.sig for n in g.nodes if n.label is not None}
    assert labeled == {"p.A#m(String,int,String[])",
                       "p.A#m(String,int,String[])#0"}
    void_m = next(n for n in g.nodes if n.anchor.sig == "p.A#v()")
    assert "label_site" not in void_m.tags


def test_multi_declarator_labels_every_name():
    src = NULLABLE_IMPORT + "class A { @Nullable String a, b; int c, d; }\n"
    g = parse_class(src)
    labeled = sorted(n.name for n in g.nodes if n.label is not None)
    assert labeled == ["a", "b"]
    prim = [n for n in g.nodes if n.name in ("c", "d")]
    assert all(n.label is None and "label_site" not in n.tags for n in prim)


def test_qualified_annotation_needs_no_import():
    src = "class A { @javax.annotation.Nullable String f; }\n"
    g = parse_class(src)
    assert g.label_count == 1


def test_unimported_simple_name_is_not_a_qualifier():
    src = "class A { @Nullable String f; }\n"  # no import: unknown marker
    g = parse_class(src)
    assert g.label_count == 0


def test_non_qualifier_annotations_stay_in_graph():
    plain = "class A { String f; }\n"
    deco = "class A { @Deprecated String f; }\n"
    assert len(parse_class(deco).nodes) == len(parse_class(plain).nodes) + 1


def test_alias_table_covers_common_spellings():
    table = QualifierAliasTable()
    for fq in ("org.jetbrains.annotations.Nullable",
               "androidx.annotation.Nullable",
               "org.checkerframework.checker.nullness.qual.Nullable"):
        src = f"import {fq};\nclass A {{ @Nullable String f; }}\n"
        assert parse_class(src, table).label_count == 1


def test_erase_round_trip_structure():
    src = (NULLABLE_IMPORT +
           "class A {\n"
           "  @Nullable String f;\n"
           "  @Nullable String m(@Nullable String p) { return p; }\n"
           "}\n")
    before = parse_class(src)
    erased = erase_annotations(src)
    after = parse_class(erased)
    assert before.label_count == 3
    assert after.label_count == 0
    # harvesting means annotations never made nodes; only the now-unused
    # alias import may disappear
    keep = lambda g: [n.kind for n in g.nodes if n.kind != "ImportDeclaration"]
    assert keep(after) == keep(before)
    assert erase_annotations(erased) == erased


def test_erase_removes_only_unused_alias_imports():
    src = (NULLABLE_IMPORT + "import java.util.List;\n"
           "class A { @Nullable List<String> f; }\n")
    erased = erase_annotations(src).decode()
    assert "javax.annotation.Nullable" not in erased
    assert "java.util.List" in erased
    assert "@Nullable" not in erased


def test_erase_without_qualifiers_is_identity():
    src = "import java.util.Map;\nclass A { Map<String, String> m; }\n"
    assert erase_annotations(src) == src.encode()


def test_line_comment_attaches_to_deepest_node():
    src = "class A { void m() { int x = 1; // note\n } }\n"
    g = parse_class(src)
    comments = [n for n in g.nodes if n.kind == "LineComment"]
    assert len(comments) == 1
    host = g.nodes[g.parent[comments[0].id]]
    assert host.kind == "BlockStmt"


def test_facts_record_members_and_calls():
    src = ("package p;\n" + NULLABLE_IMPORT +
           "class A extends Base {\n"
           "  String f;\n"
           "  int k;\n"
           "  String getF() { return f; }\n"
           "  String viaThis() { return this.f; }\n"
           "  void use(B b) { b.take(f); take(k); }\n"
           "  void take(int n) {}\n"
           "}\n")
    g = parse_class(src)
    t = g.facts["types"]["p.A"]
    assert t["supertypes"] == ["Base"]
    assert t["fields"]["f"] == {"sig": "p.A#f", "type": "String",
                                "ref": True, "annotated": False}
    byname = {m["name"]: m for m in t["methods"]}
    assert byname["getF"]["returns_fields"] == ["f"]
    assert byname["viaThis"]["returns_fields"] == ["f"]
    assert byname["use"]["returns_fields"] == []
    calls = {(c["receiver"], c["name"]): c for c in t["calls"]}
    assert calls[("B", "take")]["arg_fields"] == {"0": "f"}
    assert calls[("A", "take")]["arg_fields"] == {"0": "k"}


def test_facts_scope_shadows_field():
    src = ("class A {\n"
           "  String f;\n"
           "  String m() { String f = \"x\"; return f; }\n"
           "}\n")
    g = parse_class(src)
    m = g.facts["types"]["A"]["methods"][0]
    assert m["returns_fields"] == []  # local shadows the field


def test_graph_jsonl_round_trip(tmp_path):
    srcs = [
        NULLABLE_IMPORT + "class A { @Nullable String f; }\n",
        "package q;\nclass B { void m(String s) { m(s); } }\n",
    ]
    graphs = [parse_class(s) for s in srcs]
    path = tmp_path / "graphs.jsonl"
    write_graphs(path, graphs)
    back = read_graphs(path)
    assert [g.to_json() for g in back] == [g.to_json() for g in graphs]


def test_label_conservation_random():
    rng = random.Random(7)
    for trial in range(25):
        n_fields = rng.randint(1, 5)
        n_methods = rng.randint(0, 3)
        planted = 0
        lines = [NULLABLE_IMPORT, "class T%d {\n" % trial]
        for i in range(n_fields):
            if rng.random() < 0.5:
                lines.append(f"  @Nullable String f{i};\n")
                planted += 1
            elif rng.random() < 0.5:
                lines.append(f"  int f{i};\n")
            else:
                lines.append(f"  String f{i};\n")
        for i in range(n_methods):
            anno = ""
            if rng.random() < 0.5:
                anno = "@Nullable "
                planted += 1
            if rng.random() < 0.5:
                lines.append(f"  {anno}String m{i}(@Nullable String p)"
                             " { return p; }\n")
                planted += 1
            else:
                lines.append(f"  {anno}String m{i}() {{ return null; }}\n")
        lines.append("}\n")
        src = "".join(lines)
        g = parse_class(src)
        assert g.label_count == planted
        erased = erase_annotations(src)
        g2 = parse_class(erased)
        assert g2.label_count == 0
        kinds = [n.kind for n in g.nodes if n.kind != "ImportDeclaration"]
        kinds2 = [n.kind for n in g2.nodes if n.kind != "ImportDeclaration"]
        assert kinds2 == kinds


def test_parse_error_reports_position():
    with pytest.raises(JavaParseError) as e:
        parse_class("class A { void m( { } }\n", path="Broken.java")
    assert "Broken.java" in str(e.value)


def test_scan_corpus_manifest(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "A.java").write_text(
        NULLABLE_IMPORT + "class A { @Nullable String f; String g; }\n")
    (tmp_path / "sub" / "B.java").write_text(
        "class B { int n; }\n")  # no labels
    (tmp_path / "Broken.java").write_text("class { oops\n")
    manifest = scan_corpus(tmp_path, size_bounds=(3, 50))
    rows = {r["path"]: r for r in manifest["classes"]}
    assert rows["A.java"]["included"]
    assert rows["A.java"]["label_count"] == 1
    assert rows["A.java"]["labels"] == ["A#f"]
    assert not rows["sub/B.java"]["included"]
    assert rows["sub/B.java"]["exclusion_reason"] == "NoLabels"
    assert len(manifest["errors"]) == 1
    assert manifest["errors"][0]["path"] == "Broken.java"
    assert manifest["bounds"] == [3, 50]


def test_scan_corpus_size_bounds(tmp_path):
    (tmp_path / "Tiny.java").write_text(
        NULLABLE_IMPORT + "class Tiny { @Nullable String f; }\n")
    manifest = scan_corpus(tmp_path, size_bounds=(100, 8000))
    row = manifest["classes"][0]
    assert not row["included"]
    assert row["exclusion_reason"] == "TooSmall"


def test_graph_validates_single_root_and_dense_ids():
    g = parse_class("class A { void m() {} }\n")
    roots = [i for i, p in enumerate(g.parent) if p < 0]
    assert roots == [0]
    assert [n.id for n in g.nodes] == list(range(len(g.nodes)))
