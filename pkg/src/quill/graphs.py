"""Graph domain types: nodes, anchors, graphs, and the kind vocabulary.

A RawGraph is the typed-node/typed-edge view of one compilation unit: a
parent-child forest (plus the exact reversed edges) whose nodes carry kind,
modifiers, optional identifier name, a byte-span source anchor, and an
optional harvested Nullable label. After name augmentation a graph also
holds name links (NameNode id -> use id), realized as NameUse/UseName
edge pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

# The closed node-kind taxonomy. Parsed constructs outside it map to Other;
# NameNode marks synthesized name-layer nodes.
NODE_KINDS = (
    "AssertStmt", "ArrayAccessExpr", "ArrayCreationExpr", "ArrayCreationLevel",
    "ArrayInitializerExpr", "ArrayType", "AssignExpr", "BinaryExpr",
    "BlockStmt", "CatchClause", "CharLiteralExpr", "ClassExpr",
    "ClassOrInterfaceDecl", "ConditionalExpr", "ConstructorDeclaration",
    "ContinueStmt", "EnclosedExpr", "EnumDeclaration", "ExplCtorInvocStmt",
    "ExpressionStmt", "ForEachStmt", "ForStmt", "IfStmt", "ImportDeclaration",
    "InstanceOfExpr", "IntegerLiteralExpr", "IntersectionType", "LabeledStmt",
    "LambdaExpr", "LineComment", "LocalClassDeclStmt", "MemberValuePair",
    "MethodCallExpr", "MethodDeclaration", "Modifier", "NormalAnnotationExpr",
    "NullLiteralExpr", "ObjectCreationExpr", "Parameter", "ReturnStmt",
    "SingleMemAnnoExpr", "SwitchStmt", "SynchronizedStmt", "ThisExpr",
    "ThrowStmt", "TryStmt", "TypeExpr", "TypeParameter", "UnaryExpr",
    "VarType", "VariableDeclarator", "WhileStmt", "WildcardType",
)

KIND_VOCAB = tuple(sorted(NODE_KINDS + ("Other", "NameNode")))
KIND_INDEX = {k: i for i, k in enumerate(KIND_VOCAB)}

MODIFIER_VOCAB = tuple(sorted(
    "public private protected static final abstract synchronized "
    "transient volatile native default strictfp".split()
))
MODIFIER_INDEX = {m: i for i, m in enumerate(MODIFIER_VOCAB)}

# kind one-hot block ++ modifier bits ++ name-layer bit
FEATURE_DIM = len(KIND_VOCAB) + len(MODIFIER_VOCAB) + 1

EDGE_PARENT_CHILD = "ParentChild"
EDGE_CHILD_PARENT = "ChildParent"
EDGE_NAME_USE = "NameUse"
EDGE_USE_NAME = "UseName"
EDGE_KINDS = (EDGE_PARENT_CHILD, EDGE_CHILD_PARENT, EDGE_NAME_USE, EDGE_USE_NAME)

LABEL_NULLABLE = "Nullable"

# tags carried on nodes (serialized sorted; absent when empty)
TAG_LABEL_SITE = "label_site"          # may legally carry a Nullable label
TAG_PRIMITIVE_TYPE = "primitive_type"  # primitive/void type node
TAG_PRIMITIVE_DECL = "primitive_decl"  # declaration wrapper of primitive type
TAG_FIELD_DECL = "field_decl"          # field declaration wrapper
TAG_LOCAL_DECL = "local_decl"          # local variable declaration wrapper
TAG_FIELD = "field"                    # declarator of a field
TAG_UNTYPED_LAMBDA = "untyped_lambda"  # inferred lambda parameter
TAG_CATCH_PARAM = "catch_param"


@dataclass(frozen=True)
class SourceAnchor:
    path: str
    span: tuple[int, int]
    sig: str | None = None

    def to_json(self) -> dict:
        d: dict = {"path": self.path, "span": [self.span[0], self.span[1]]}
        if self.sig:
            d["sig"] = self.sig
        return d

    @staticmethod
    def from_json(d: dict) -> "SourceAnchor":
        return SourceAnchor(d["path"], (d["span"][0], d["span"][1]),
                            d.get("sig"))


@dataclass(frozen=True)
class RawNode:
    id: int
    kind: str
    modifiers: tuple[str, ...]
    anchor: SourceAnchor
    name: str | None = None
    label: str | None = None
    tags: frozenset[str] = frozenset()
    orig_id: int = -1

    def to_json(self) -> dict:
        d: dict = {"id": self.id, "kind": self.kind,
                   "modifiers": sorted(self.modifiers),
                   "anchor": self.anchor.to_json()}
        if self.name is not None:
            d["name"] = self.name
        if self.label is not None:
            d["label"] = self.label
        if self.tags:
            d["tags"] = sorted(self.tags)
        if self.orig_id != self.id:
            d["orig"] = self.orig_id
        return d

    @staticmethod
    def from_json(d: dict) -> "RawNode":
        return RawNode(
            id=d["id"], kind=d["kind"], modifiers=tuple(d.get("modifiers", [])),
            anchor=SourceAnchor.from_json(d["anchor"]), name=d.get("name"),
            label=d.get("label"), tags=frozenset(d.get("tags", [])),
            orig_id=d.get("orig", d["id"]))


@dataclass
class RawGraph:
    class_id: str
    nodes: list[RawNode]
    parent: list[int]                      # parent id per node, -1 at the root
    name_links: list[tuple[int, int]] = field(default_factory=list)
    facts: dict | None = None

    @property
    def label_count(self) -> int:
        return sum(1 for n in self.nodes if n.label is not None)

    def parent_child_pairs(self) -> list[tuple[int, int]]:
        return [(p, c) for c, p in enumerate(self.parent) if p >= 0]

    def edge_lists(self) -> dict[str, list[tuple[int, int]]]:
        pc = sorted(self.parent_child_pairs())
        nu = sorted(self.name_links)
        return {
            EDGE_PARENT_CHILD: pc,
            EDGE_CHILD_PARENT: sorted((c, p) for p, c in pc),
            EDGE_NAME_USE: nu,
            EDGE_USE_NAME: sorted((u, n) for n, u in nu),
        }

    def validate(self) -> None:
        n = len(self.nodes)
        assert len(self.parent) == n
        for i, node in enumerate(self.nodes):
            assert node.id == i, f"node id {node.id} at position {i}"
        roots = [i for i, p in enumerate(self.parent)
                 if p < 0 and self.nodes[i].kind != "NameNode"]
        assert len(roots) == 1, f"expected single root, got {roots}"
        for c, p in enumerate(self.parent):
            if p >= 0:
                assert 0 <= p < n
            else:
                assert c == roots[0] or self.nodes[c].kind == "NameNode"
        for a, b in self.name_links:
            assert 0 <= a < n and 0 <= b < n
            assert self.nodes[a].kind == "NameNode"
            assert self.nodes[b].kind != "NameNode"

    def to_json(self) -> dict:
        edges = []
        lists = self.edge_lists()
        for kind in EDGE_KINDS:
            for s, d in lists[kind]:
                edges.append([s, d, kind])
        out: dict = {
            "class_id": self.class_id,
            "nodes": [nd.to_json() for nd in self.nodes],
            "edges": edges,
            "label_count": self.label_count,
        }
        if self.facts is not None:
            out["facts"] = self.facts
        return out

    @staticmethod
    def from_json(d: dict) -> "RawGraph":
        nodes = [RawNode.from_json(nd) for nd in d["nodes"]]
        parent = [-1] * len(nodes)
        name_links = []
        for s, dst, kind in d["edges"]:
            if kind == EDGE_PARENT_CHILD:
                parent[dst] = s
            elif kind == EDGE_NAME_USE:
                name_links.append((s, dst))
        g = RawGraph(d["class_id"], nodes, parent, sorted(name_links),
                     d.get("facts"))
        return g


def relabel(node: RawNode, **changes) -> RawNode:
    return replace(node, **changes)
