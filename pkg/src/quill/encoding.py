"""Graph transformation pipeline: prune, name-augment, encode.

Order is fixed: phase1_prune -> phase2_prune -> augment_names ->
phase3_prune -> encode_features. Phases 1-3 only remove nodes (children
reconnect to the nearest surviving ancestor); name augmentation adds one
NameNode per distinct identifier. Labeled nodes survive every phase.

Feature rows are multi-hot: kind one-hot block, modifier bits, and one
name-layer bit, packed row-wise into hex bitstrings for serialization
(MSB-first within each byte).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .common import digest_of, read_jsonl, write_jsonl
from .errors import BadArtifact, CapExceeded, QuillError
from .graphs import (
    EDGE_KINDS, FEATURE_DIM, KIND_INDEX, KIND_VOCAB, MODIFIER_INDEX,
    TAG_LABEL_SITE, TAG_PRIMITIVE_DECL, TAG_PRIMITIVE_TYPE,
    RawGraph, RawNode, SourceAnchor,
)

LABEL_BEARING_KINDS = frozenset(
    ("VariableDeclarator", "MethodDeclaration", "Parameter"))

STATEMENT_KINDS = frozenset(k for k in KIND_VOCAB if k.endswith("Stmt")) | {
    "CatchClause"}

PHASE1_RULES = {
    "primitive-type-nodes": lambda n: TAG_PRIMITIVE_TYPE in n.tags,
    "primitive-declarations": lambda n: TAG_PRIMITIVE_DECL in n.tags,
}

# Node kinds whose removal hurt a preliminary model less than removing the
# same number of random nodes, minus the label-bearing exemption.
DEFAULT_PHASE2_DROP = frozenset((
    "InstanceOfExpr", "ArrayInitializerExpr", "TypeExpr", "MethodCallExpr",
    "ForStmt", "UnaryExpr", "VarType", "NullLiteralExpr",
    "NormalAnnotationExpr", "IfStmt", "LambdaExpr", "ArrayCreationLevel",
    "EnclosedExpr", "BinaryExpr", "ImportDeclaration", "ExplCtorInvocStmt",
    "ReturnStmt", "TryStmt", "ForEachStmt", "IntegerLiteralExpr",
    "WildcardType", "ConstructorDeclaration", "LineComment",
    "ConditionalExpr", "ObjectCreationExpr", "ArrayType",
))

# Statement kinds whose whole subtrees can go when no null literal occurs
# inside the original subtree.
DEFAULT_PHASE3_PRUNE = frozenset((
    "ForStmt", "BlockStmt", "LocalClassDeclStmt", "SynchronizedStmt",
    "ForEachStmt", "CatchClause", "WhileStmt", "LabeledStmt", "AssertStmt",
    "ThrowStmt",
))

GUARD_KIND = "NullLiteralExpr"


@dataclass(frozen=True)
class PruneConfig:
    phase1_rules: tuple[str, ...] = (
        "primitive-declarations", "primitive-type-nodes")
    phase2_drop_kinds: frozenset = DEFAULT_PHASE2_DROP
    phase3_prune_stmt_kinds: frozenset = DEFAULT_PHASE3_PRUNE
    guard_kind: str = GUARD_KIND

    def validate(self) -> None:
        for rule in self.phase1_rules:
            if rule not in PHASE1_RULES:
                raise QuillError(f"unknown phase1 rule '{rule}'")
        bad = set(self.phase2_drop_kinds) & LABEL_BEARING_KINDS
        if bad:
            raise QuillError(
                f"phase2 drop set contains label-bearing kinds: {sorted(bad)}")
        off = set(self.phase3_prune_stmt_kinds) - STATEMENT_KINDS
        if off:
            raise QuillError(
                f"phase3 prune set contains non-statement kinds: {sorted(off)}")
        if self.guard_kind not in KIND_VOCAB:
            raise QuillError(f"unknown guard kind '{self.guard_kind}'")

    def to_json(self) -> dict:
        return {
            "phase1_rules": sorted(self.phase1_rules),
            "phase2_drop_kinds": sorted(self.phase2_drop_kinds),
            "phase3_prune_stmt_kinds": sorted(self.phase3_prune_stmt_kinds),
            "guard_kind": self.guard_kind,
        }

    @staticmethod
    def from_json(d: dict) -> "PruneConfig":
        cfg = PruneConfig(
            tuple(d["phase1_rules"]),
            frozenset(d["phase2_drop_kinds"]),
            frozenset(d["phase3_prune_stmt_kinds"]),
            d["guard_kind"])
        cfg.validate()
        return cfg

    def digest(self) -> str:
        return digest_of(self.to_json())


# --------------------------------------------------------------------------
# node removal with upward reconnection (shared by phases 1-3)


def _rebuild(g: RawGraph, removed: set[int]) -> RawGraph:
    """Drop `removed` ids; survivors keep order, children reconnect to the
    nearest surviving ancestor. The root and labeled nodes must not be in
    `removed` (callers guarantee this)."""
    if not removed:
        return g
    old_to_new: dict[int, int] = {}
    nodes: list[RawNode] = []
    for n in g.nodes:
        if n.id in removed:
            continue
        old_to_new[n.id] = len(nodes)
        nodes.append(n)
    parent: list[int] = []
    for n in g.nodes:
        if n.id in removed:
            continue
        p = g.parent[n.id]
        while p >= 0 and p in removed:
            p = g.parent[p]
        parent.append(old_to_new[p] if p >= 0 else -1)
    renumbered = [replace(n, id=i) for i, n in enumerate(nodes)]
    links = [(old_to_new[a], old_to_new[b]) for a, b in g.name_links
             if a not in removed and b not in removed]
    out = RawGraph(g.class_id, renumbered, parent, sorted(links), g.facts)
    out.validate()
    return out


def drop_kinds(g: RawGraph, kinds: frozenset | set) -> RawGraph:
    """Remove every non-root, unlabeled node whose kind is in `kinds`.

    Kind-by-kind application in any order gives the same graph: membership
    is decided on the input alone and reconnection always targets the
    nearest surviving ancestor.
    """
    removed = {n.id for n in g.nodes
               if n.kind in kinds and n.label is None and g.parent[n.id] >= 0}
    return _rebuild(g, removed)


def drop_ids(g: RawGraph, ids: set[int]) -> RawGraph:
    """Remove specific nodes (root and labeled nodes are kept regardless)."""
    removed = {i for i in ids
               if g.parent[i] >= 0 and g.nodes[i].label is None}
    return _rebuild(g, removed)


def phase1_prune(g: RawGraph, cfg: PruneConfig) -> RawGraph:
    rules = [PHASE1_RULES[r] for r in cfg.phase1_rules]
    removed = {n.id for n in g.nodes
               if any(rule(n) for rule in rules)
               and n.label is None and g.parent[n.id] >= 0}
    return _rebuild(g, removed)


def phase2_prune(g: RawGraph, cfg: PruneConfig) -> RawGraph:
    return drop_kinds(g, cfg.phase2_drop_kinds)


def augment_names(g: RawGraph) -> RawGraph:
    """Add one NameNode per distinct identifier, linked to every bearer."""
    uses: dict[str, list[int]] = {}
    for n in g.nodes:
        if n.name and n.kind != "NameNode":
            uses.setdefault(n.name, []).append(n.id)
    nodes = list(g.nodes)
    parent = list(g.parent)
    links = list(g.name_links)
    path = g.nodes[0].anchor.path if g.nodes else "<none>"
    for name in sorted(uses):
        nid = len(nodes)
        nodes.append(RawNode(
            id=nid, kind="NameNode", modifiers=(),
            anchor=SourceAnchor(path, (0, 0)), name=name, orig_id=nid))
        parent.append(-1)
        for use in uses[name]:
            links.append((nid, use))
    out = RawGraph(g.class_id, nodes, parent, sorted(links), g.facts)
    out.validate()
    return out


def phase3_prune(g: RawGraph, original: RawGraph,
                 cfg: PruneConfig) -> RawGraph:
    """Prune statement subtrees whose original subtree has no guard node.

    `original` is the graph before kind pruning (its ids are what orig_id
    on g's nodes refer to). Labeled nodes stop the subtree walk: they and
    everything below them survive and reattach upward. NameNodes whose
    every use is pruned go too.
    """
    orig_index = {n.orig_id: n.id for n in original.nodes}
    orig_children: dict[int, list[int]] = {}
    for c, p in enumerate(original.parent):
        if p >= 0:
            orig_children.setdefault(p, []).append(c)
    guarded: dict[int, bool] = {}

    def subtree_has_guard(oid: int) -> bool:
        if oid in guarded:
            return guarded[oid]
        stack = [oid]
        hit = False
        while stack:
            i = stack.pop()
            if original.nodes[i].kind == cfg.guard_kind:
                hit = True
                break
            stack.extend(orig_children.get(i, ()))
        guarded[oid] = hit
        return hit

    children: dict[int, list[int]] = {}
    for c, p in enumerate(g.parent):
        if p >= 0:
            children.setdefault(p, []).append(c)

    removed: set[int] = set()
    for n in g.nodes:
        if n.kind not in cfg.phase3_prune_stmt_kinds or n.id in removed:
            continue
        if n.label is not None or g.parent[n.id] < 0:
            continue
        oid = orig_index.get(n.orig_id)
        if oid is not None and subtree_has_guard(oid):
            continue
        stack = [n.id]
        while stack:
            i = stack.pop()
            if g.nodes[i].label is not None:
                continue  # pruning stops short of labeled nodes
            removed.add(i)
            stack.extend(children.get(i, ()))

    if removed:
        by_name_node: dict[int, list[int]] = {}
        for nn, use in g.name_links:
            by_name_node.setdefault(nn, []).append(use)
        for nn, use_list in by_name_node.items():
            if all(u in removed for u in use_list):
                removed.add(nn)
    return _rebuild(g, removed)


def encode_features(g: RawGraph, cap: int = 8000) -> "NapAst":
    if len(g.nodes) > cap:
        raise CapExceeded(
            f"{g.class_id}: {len(g.nodes)} nodes exceeds cap {cap}")
    n = len(g.nodes)
    feats = np.zeros((n, FEATURE_DIM), dtype=np.uint8)
    labels: list[str] = []
    name_bit = FEATURE_DIM - 1
    mod_base = len(KIND_VOCAB)
    for node in g.nodes:
        feats[node.id, KIND_INDEX[node.kind]] = 1
        for m in node.modifiers:
            idx = MODIFIER_INDEX.get(m)
            if idx is not None:
                feats[node.id, mod_base + idx] = 1
        if node.kind == "NameNode":
            feats[node.id, name_bit] = 1
        if node.label is not None:
            labels.append("Nullable")
        elif TAG_LABEL_SITE in node.tags:
            labels.append("NotNullable")
        else:
            labels.append("Unlabeled")
    return NapAst(
        class_id=g.class_id, nodes=list(g.nodes), features=feats,
        edge_sets=g.edge_lists(), label_vector=labels,
        prune_digest="", facts=g.facts or {})


@dataclass
class NapAst:
    class_id: str
    nodes: list[RawNode]
    features: np.ndarray
    edge_sets: dict[str, list[tuple[int, int]]]
    label_vector: list[str]
    prune_digest: str
    facts: dict = field(default_factory=dict)

    @property
    def anchor_index(self) -> dict[int, SourceAnchor]:
        return {n.id: n.anchor for n in self.nodes}

    def node_count(self) -> int:
        return len(self.nodes)

    def to_json(self) -> dict:
        return {
            "class_id": self.class_id,
            "nodes": [n.to_json() for n in self.nodes],
            "features": [_pack_bits(row) for row in self.features],
            "edge_sets": {k: [list(e) for e in v]
                          for k, v in self.edge_sets.items()},
            "label_vector": self.label_vector,
            "prune_digest": self.prune_digest,
            "facts": self.facts,
        }

    @staticmethod
    def from_json(d: dict) -> "NapAst":
        nodes = [RawNode.from_json(nd) for nd in d["nodes"]]
        feats = np.array([_unpack_bits(s, FEATURE_DIM)
                          for s in d["features"]], dtype=np.uint8)
        if feats.size == 0:
            feats = feats.reshape(0, FEATURE_DIM)
        edge_sets = {k: [tuple(e) for e in v]
                     for k, v in d["edge_sets"].items()}
        for k in EDGE_KINDS:
            edge_sets.setdefault(k, [])
        return NapAst(d["class_id"], nodes, feats, edge_sets,
                      list(d["label_vector"]), d.get("prune_digest", ""),
                      d.get("facts") or {})


def _pack_bits(row: np.ndarray) -> str:
    return np.packbits(row.astype(np.uint8)).tobytes().hex()


def _unpack_bits(hexstr: str, width: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
    bits = np.unpackbits(raw)[:width]
    if bits.shape[0] != width:
        raise BadArtifact(f"feature bitstring too short for width {width}")
    return bits


def build_napast(raw: RawGraph, cfg: PruneConfig | None = None,
                 cap: int = 8000) -> NapAst:
    cfg = cfg or PruneConfig()
    cfg.validate()
    g1 = phase1_prune(raw, cfg)
    g2 = phase2_prune(g1, cfg)
    g3 = augment_names(g2)
    g4 = phase3_prune(g3, g1, cfg)
    nap = encode_features(g4, cap)
    nap.prune_digest = cfg.digest()
    return nap


def write_napasts(path, naps: list[NapAst]) -> None:
    write_jsonl(path, [n.to_json() for n in naps])


def read_napasts(path) -> list[NapAst]:
    return [NapAst.from_json(row) for row in read_jsonl(path)]
