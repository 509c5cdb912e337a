import json
import random

import numpy as np
import pytest

from quill.common import canonical_json
from quill.encoding import (
    DEFAULT_PHASE2_DROP, DEFAULT_PHASE3_PRUNE, LABEL_BEARING_KINDS, NapAst,
    PruneConfig, augment_names, build_napast, drop_kinds, encode_features,
    phase1_prune, phase2_prune, phase3_prune,
)
from quill.errors import CapExceeded, QuillError
from quill.graphs import (
    FEATURE_DIM, KIND_INDEX, KIND_VOCAB, MODIFIER_INDEX, RawGraph, RawNode,
    SourceAnchor,
)
from quill.ingest import parse_class

NULLABLE_IMPORT = "import javax.annotation.Nullable;\n"


def node(i, kind, mods=(), name=None, label=None, tags=(), sig=None):
    return RawNode(id=i, kind=kind, modifiers=tuple(mods),
                   anchor=SourceAnchor("t.java", (i, i + 1), sig), name=name,
                   label=label, tags=frozenset(tags), orig_id=i)


def test_default_config_validates():
    cfg = PruneConfig()
    cfg.validate()
    assert cfg.phase2_drop_kinds == DEFAULT_PHASE2_DROP
    assert len(DEFAULT_PHASE2_DROP) == 26
    assert len(DEFAULT_PHASE3_PRUNE) == 10
    assert not DEFAULT_PHASE2_DROP & LABEL_BEARING_KINDS


def test_config_rejects_label_bearing_drops():
    cfg = PruneConfig(phase2_drop_kinds=frozenset({"VariableDeclarator"}))
    with pytest.raises(QuillError):
        cfg.validate()


def test_config_rejects_non_statement_phase3():
    cfg = PruneConfig(phase3_prune_stmt_kinds=frozenset({"BinaryExpr"}))
    with pytest.raises(QuillError):
        cfg.validate()


def test_config_rejects_unknown_rule_and_guard():
    with pytest.raises(QuillError):
        PruneConfig(phase1_rules=("no-such-rule",)).validate()
    with pytest.raises(QuillError):
        PruneConfig(guard_kind="NotAKind").validate()


def test_config_json_round_trip():
    cfg = PruneConfig()
    assert PruneConfig.from_json(cfg.to_json()) == cfg
    assert cfg.digest() == PruneConfig.from_json(cfg.to_json()).digest()


def test_phase1_removes_primitive_declarations():
    g = parse_class("class A { int x; String s; }\n")
    out = phase1_prune(g, PruneConfig())
    kinds = [n.kind for n in out.nodes]
    assert "PrimitiveType" not in [n.kind for n in g.nodes]  # maps to Other
    assert not any("primitive_type" in n.tags for n in out.nodes)
    assert not any("primitive_decl" in n.tags for n in out.nodes)
    x = next(n for n in out.nodes if n.name == "x")
    cls = next(n for n in out.nodes if n.kind == "ClassOrInterfaceDecl")
    assert out.parent[x.id] == cls.id  # reconnected past the dropped wrapper
    s = next(n for n in out.nodes if n.name == "s")
    wrapper = out.nodes[out.parent[s.id]]
    assert "field_decl" in wrapper.tags  # reference decl wrapper survives


def test_phase1_empty_rules_is_identity():
    g = parse_class("class A { int x; void m() { long y = 1L; } }\n")
    out = phase1_prune(g, PruneConfig(phase1_rules=()))
    assert out.to_json() == g.to_json()


def test_chain_reconnection_oracle():
    # root -> A -> prim -> B ; dropping prim leaves root -> A -> B
    nodes = [
        node(0, "Other"),
        node(1, "BlockStmt"),
        node(2, "Other", tags=("primitive_type",)),
        node(3, "Other"),
    ]
    g = RawGraph("t", nodes, [-1, 0, 1, 2])
    out = phase1_prune(g, PruneConfig())
    assert len(out.nodes) == 3
    assert out.parent == [-1, 0, 1]
    edges = out.edge_lists()
    assert edges["ChildParent"] == [(c, p) for p, c in edges["ParentChild"]]


def test_phase2_drop_reattaches_children():
    # stmt with 3 children under a block: drop the stmt kind
    nodes = [
        node(0, "Other"),
        node(1, "IfStmt"),
        node(2, "Other"), node(3, "Other"), node(4, "Other"),
    ]
    g = RawGraph("t", nodes, [-1, 0, 1, 1, 1])
    out = drop_kinds(g, {"IfStmt"})
    assert len(out.nodes) == len(g.nodes) - 1
    root_children = [i for i, p in enumerate(out.parent) if p == 0]
    assert len(root_children) == 3


def test_phase2_confluence_random():
    rng = random.Random(11)
    for trial in range(10):
        src = _random_class(rng, trial)
        g = phase1_prune(parse_class(src), PruneConfig())
        kinds = sorted(DEFAULT_PHASE2_DROP)
        all_at_once = drop_kinds(g, DEFAULT_PHASE2_DROP).to_json()
        for _ in range(3):
            rng.shuffle(kinds)
            step = g
            for k in kinds:
                step = drop_kinds(step, {k})
            assert step.to_json() == all_at_once


def test_phase2_never_drops_labeled_nodes():
    src = NULLABLE_IMPORT + "class A { @Nullable String f; String g; }\n"
    g = phase1_prune(parse_class(src), PruneConfig())
    out = drop_kinds(g, {"VariableDeclarator"})  # ablation-style drop
    names = [n.name for n in out.nodes if n.kind == "VariableDeclarator"]
    assert names == ["f"]  # labeled survives, unlabeled dropped


def test_phase2_never_drops_root():
    g = RawGraph("t", [node(0, "IfStmt"), node(1, "Other")], [-1, 0])
    out = drop_kinds(g, {"IfStmt"})
    assert len(out.nodes) == 2


def test_augment_names_oracle():
    src = "class A { void m(String x) { x = null; } }\n"
    g = phase1_prune(parse_class(src), PruneConfig())
    before_edges = g.edge_lists()
    out = augment_names(g)
    name_nodes = [n for n in out.nodes if n.kind == "NameNode"]
    x_node = next(n for n in name_nodes if n.name == "x")
    uses = [u for nn, u in out.name_links if nn == x_node.id]
    assert len(uses) == 2  # the parameter and the assignment target
    use_kinds = {out.nodes[u].kind for u in uses}
    assert use_kinds == {"Parameter", "Other"}
    # AST edges unchanged
    assert out.edge_lists()["ParentChild"] == before_edges["ParentChild"]
    for nn in name_nodes:
        assert out.parent[nn.id] == -1


def test_augment_names_without_names_is_identity():
    g = RawGraph("t", [node(0, "Other"), node(1, "BlockStmt")], [-1, 0])
    out = augment_names(g)
    assert out.to_json() == g.to_json()


def test_augment_shared_name_is_single_node():
    src = ("class A {\n"
           "  void m1() { String v; v = \"a\"; }\n"
           "  void m2() { String v; v = \"b\"; }\n"
           "}\n")
    g = phase1_prune(parse_class(src), PruneConfig())
    out = augment_names(g)
    v_nodes = [n for n in out.nodes if n.kind == "NameNode" and n.name == "v"]
    assert len(v_nodes) == 1
    uses = [u for nn, u in out.name_links if nn == v_nodes[0].id]
    assert len(uses) == 4  # two declarators + two assignment targets


def test_phase3_guard_keeps_null_bearing_loops():
    cfg = PruneConfig()
    with_null = ("class A { String f;\n"
                 "  void m() { while (true) { f = null; } }\n"
                 "}\n")
    without = ("class A { String f;\n"
               "  void m() { while (true) { f = \"x\"; } }\n"
               "}\n")
    for src, expect_kept in ((with_null, True), (without, False)):
        raw = parse_class(src)
        g1 = phase1_prune(raw, cfg)
        g3 = augment_names(phase2_prune(g1, cfg))
        out = phase3_prune(g3, g1, cfg)
        kept = any(n.kind == "WhileStmt" for n in out.nodes)
        assert kept == expect_kept


def test_phase3_removes_name_only_neighbors():
    cfg = PruneConfig()
    src = ("class A { String f;\n"
           "  void m() { while (true) { String only = \"x\"; only = \"y\"; } }\n"
           "}\n")
    raw = parse_class(src)
    g1 = phase1_prune(raw, cfg)
    g3 = augment_names(phase2_prune(g1, cfg))
    assert any(n.kind == "NameNode" and n.name == "only" for n in g3.nodes)
    out = phase3_prune(g3, g1, cfg)
    assert not any(n.name == "only" for n in out.nodes)
    assert any(n.kind == "NameNode" and n.name == "f" for n in out.nodes)


def test_phase3_stops_short_of_labeled_nodes():
    # synthetic: a prunable block holding a labeled declarator
    nodes = [
        node(0, "Other"),
        node(1, "BlockStmt"),
        node(2, "Other"),
        node(3, "VariableDeclarator", name="f", label="Nullable",
             tags=("label_site",), sig="T#f"),
        node(4, "Other"),
    ]
    g = RawGraph("t", nodes, [-1, 0, 1, 1, 3])
    out = phase3_prune(g, g, PruneConfig())
    survivors = {n.name or n.kind for n in out.nodes}
    assert "f" in survivors
    labeled = next(n for n in out.nodes if n.name == "f")
    assert out.parent[labeled.id] == 0  # reattached above the pruned block
    assert any(out.parent[n.id] == labeled.id for n in out.nodes)  # subtree kept
    assert not any(n.kind == "BlockStmt" for n in out.nodes)


def test_pipeline_monotone_and_name_growth():
    rng = random.Random(23)
    cfg = PruneConfig()
    for trial in range(10):
        raw = parse_class(_random_class(rng, trial))
        g1 = phase1_prune(raw, cfg)
        g2 = phase2_prune(g1, cfg)
        distinct = len({n.name for n in g2.nodes if n.name})
        g3 = augment_names(g2)
        g4 = phase3_prune(g3, g1, cfg)
        assert len(g1.nodes) <= len(raw.nodes)
        assert len(g2.nodes) <= len(g1.nodes)
        assert len(g3.nodes) == len(g2.nodes) + distinct
        assert len(g4.nodes) <= len(g3.nodes)
        assert g4.label_count == raw.label_count


def test_feature_rows_oracle():
    src = NULLABLE_IMPORT + "class A { public static String f; }\n"
    nap = build_napast(parse_class(src))
    decl = next(n for n in nap.nodes if n.name == "f"
                and n.kind == "VariableDeclarator")
    row = nap.features[decl.id]
    expected = np.zeros(FEATURE_DIM, dtype=np.uint8)
    expected[KIND_INDEX["VariableDeclarator"]] = 1
    expected[len(KIND_VOCAB) + MODIFIER_INDEX["public"]] = 1
    expected[len(KIND_VOCAB) + MODIFIER_INDEX["static"]] = 1
    assert (row == expected).all()
    assert row.sum() == 3
    name_node = next(n for n in nap.nodes if n.kind == "NameNode"
                     and n.name == "f")
    nrow = nap.features[name_node.id]
    assert nrow.sum() == 2
    assert nrow[KIND_INDEX["NameNode"]] == 1
    assert nrow[FEATURE_DIM - 1] == 1


def test_mini_class_feature_matrix_oracle():
    src = NULLABLE_IMPORT + "class A { @Nullable String f; }\n"
    nap = build_napast(parse_class(src))
    # pipeline leaves: unit, class, field wrapper, type, declarator,
    # then NameNodes for "A" and "f" (sorted)
    assert [n.kind for n in nap.nodes] == [
        "Other", "ClassOrInterfaceDecl", "Other", "Other",
        "VariableDeclarator", "NameNode", "NameNode"]
    expected = np.zeros((7, FEATURE_DIM), dtype=np.uint8)
    expected[0, KIND_INDEX["Other"]] = 1
    expected[1, KIND_INDEX["ClassOrInterfaceDecl"]] = 1
    expected[2, KIND_INDEX["Other"]] = 1
    expected[3, KIND_INDEX["Other"]] = 1
    expected[4, KIND_INDEX["VariableDeclarator"]] = 1
    for i in (5, 6):
        expected[i, KIND_INDEX["NameNode"]] = 1
        expected[i, FEATURE_DIM - 1] = 1
    assert (nap.features == expected).all()
    assert nap.label_vector == ["Unlabeled", "Unlabeled", "Unlabeled",
                                "Unlabeled", "Nullable", "Unlabeled",
                                "Unlabeled"]


def test_label_vector_marks_sites():
    src = (NULLABLE_IMPORT +
           "class A { @Nullable String f; String g;\n"
           "  String m(String p) { return g; } }\n")
    nap = build_napast(parse_class(src))
    by_sig = {n.anchor.sig: nap.label_vector[n.id]
              for n in nap.nodes if n.anchor.sig}
    assert by_sig["A#f"] == "Nullable"
    assert by_sig["A#g"] == "NotNullable"
    assert by_sig["A#m(String)"] == "NotNullable"
    assert by_sig["A#m(String)#0"] == "NotNullable"


def test_encode_cap_exceeded():
    g = parse_class("class A { void m() { int a; int b; } }\n")
    with pytest.raises(CapExceeded):
        build_napast(g, cap=3)


def test_napast_jsonl_round_trip(tmp_path):
    from quill.encoding import read_napasts, write_napasts
    naps = [build_napast(parse_class(s)) for s in (
        NULLABLE_IMPORT + "class A { @Nullable String f; }\n",
        "class B { void m(String s) { s = null; } }\n")]
    p = tmp_path / "naps.jsonl"
    write_napasts(p, naps)
    back = read_napasts(p)
    assert [b.to_json() for b in back] == [n.to_json() for n in naps]
    assert back[0].prune_digest == PruneConfig().digest()


def test_packed_features_survive_json():
    src = NULLABLE_IMPORT + "class A { @Nullable public String f; }\n"
    nap = build_napast(parse_class(src))
    row = json.loads(json.dumps(nap.to_json()))
    back = NapAst.from_json(row)
    assert (back.features == nap.features).all()
    assert back.features.dtype == np.uint8


def test_determinism_bytes():
    src = NULLABLE_IMPORT + ("class A { @Nullable String f;\n"
                             "  String m() { return f; } }\n")
    a = canonical_json(build_napast(parse_class(src)).to_json())
    b = canonical_json(build_napast(parse_class(src)).to_json())
    assert a == b


def _random_class(rng, trial):
    lines = [NULLABLE_IMPORT, f"class T{trial} {{\n"]
    for i in range(rng.randint(1, 4)):
        anno = "@Nullable " if rng.random() < 0.4 else ""
        typ = rng.choice(["String", "int", "Object"])
        if typ == "int":
            anno = ""
        lines.append(f"  {anno}{typ} f{i};\n")
    for i in range(rng.randint(1, 3)):
        body = rng.choice([
            "return null;",
            "if (f0 == null) { return f0; } return null;",
            "for (int i = 0; i < 3; i++) { f0 = \"x\"; } return f0;",
            "while (f0 != null) { break; } return f0;",
        ])
        anno = "@Nullable " if rng.random() < 0.5 else ""
        lines.append(f"  {anno}String m{i}() {{ {body} }}\n")
    lines.append("}\n")
    return "".join(lines)
