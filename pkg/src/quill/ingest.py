"""Java ingestion: source -> RawGraph, annotation erasure, corpus scanning.

parse_class turns one compilation unit into a RawGraph. Qualifier
annotations (any alias-table spelling) are harvested into node labels and
never appear as nodes; all other annotations stay in the graph. Each graph
also carries a per-class symbol fact table (declared members, supertypes,
calls, returned fields) so later stages can link classes without re-reading
sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .common import FORMAT_VERSION, digest_of, read_jsonl, write_jsonl
from .errors import JavaParseError, QuillError, UnsupportedConstruct
from .graphs import (
    LABEL_NULLABLE, TAG_CATCH_PARAM, TAG_FIELD, TAG_FIELD_DECL,
    TAG_LABEL_SITE, TAG_LOCAL_DECL, TAG_PRIMITIVE_DECL, TAG_PRIMITIVE_TYPE,
    TAG_UNTYPED_LAMBDA, RawGraph, RawNode, SourceAnchor,
)
from .javasrc.lexer import IDENT, lex
from .javasrc.parser import SynNode, parse_compilation_unit

DEFAULT_ALIASES = (
    "android.annotation.Nullable",
    "android.support.annotation.Nullable",
    "androidx.annotation.Nullable",
    "com.android.annotations.Nullable",
    "com.google.firebase.database.annotations.Nullable",
    "com.mongodb.lang.Nullable",
    "com.sun.istack.internal.Nullable",
    "edu.umd.cs.findbugs.annotations.CheckForNull",
    "edu.umd.cs.findbugs.annotations.Nullable",
    "edu.umd.cs.findbugs.annotations.PossiblyNull",
    "io.reactivex.annotations.Nullable",
    "io.reactivex.rxjava3.annotations.Nullable",
    "jakarta.annotation.Nullable",
    "javax.annotation.CheckForNull",
    "javax.annotation.Nullable",
    "org.checkerframework.checker.nullness.compatqual.NullableDecl",
    "org.checkerframework.checker.nullness.compatqual.NullableType",
    "org.checkerframework.checker.nullness.qual.Nullable",
    "org.eclipse.jdt.annotation.Nullable",
    "org.jetbrains.annotations.Nullable",
    "org.jspecify.annotations.Nullable",
    "org.jspecify.nullness.Nullable",
    "org.netbeans.api.annotations.common.CheckForNull",
    "org.netbeans.api.annotations.common.NullAllowed",
    "org.springframework.lang.Nullable",
)

_ANNOTATION_TYPES = ("MarkerAnnotationExpr", "SingleMemAnnoExpr",
                     "NormalAnnotationExpr")

# Parser node types whose kind survives one-for-one; everything else -> Other.
_IDENTITY_KINDS = frozenset((
    "ClassOrInterfaceDecl", "EnumDeclaration", "ImportDeclaration",
    "MethodDeclaration", "ConstructorDeclaration", "Parameter",
    "TypeParameter", "VariableDeclarator", "BlockStmt", "IfStmt", "ForStmt",
    "ForEachStmt", "WhileStmt", "TryStmt", "CatchClause", "SwitchStmt",
    "ReturnStmt", "ThrowStmt", "AssertStmt", "LabeledStmt",
    "SynchronizedStmt", "LocalClassDeclStmt", "ExplCtorInvocStmt",
    "ContinueStmt", "ExpressionStmt", "AssignExpr", "BinaryExpr", "UnaryExpr",
    "ConditionalExpr", "InstanceOfExpr", "LambdaExpr", "MethodCallExpr",
    "ObjectCreationExpr", "ArrayCreationExpr", "ArrayCreationLevel",
    "ArrayInitializerExpr", "ArrayAccessExpr", "EnclosedExpr", "ClassExpr",
    "ThisExpr", "NullLiteralExpr", "IntegerLiteralExpr", "CharLiteralExpr",
    "TypeExpr", "MemberValuePair", "NormalAnnotationExpr",
    "SingleMemAnnoExpr", "ArrayType", "IntersectionType", "WildcardType",
    "VarType", "LineComment",
))

# Parser node types that carry an identifier participating in the name layer.
_NAMED_TYPES = frozenset((
    "ClassOrInterfaceDecl", "EnumDeclaration", "RecordDecl", "EnumConstant",
    "MethodDeclaration", "ConstructorDeclaration", "Parameter",
    "VariableDeclarator", "NameExpr", "FieldAccessExpr", "MethodCallExpr",
    "ObjectCreationExpr", "MethodRefExpr",
))

_TYPE_DECL_TYPES = frozenset((
    "ClassOrInterfaceDecl", "EnumDeclaration", "RecordDecl", "AnnotationDecl",
))


@dataclass(frozen=True)
class QualifierAliasTable:
    entries: tuple[str, ...] = DEFAULT_ALIASES

    def simple_names(self) -> frozenset[str]:
        return frozenset(e.rsplit(".", 1)[-1] for e in self.entries)

    def digest(self) -> str:
        return digest_of(sorted(self.entries))


def _kind_of(syn_type: str) -> str:
    return syn_type if syn_type in _IDENTITY_KINDS else "Other"


class _QualifierResolver:
    """Decides whether an annotation node spells a Nullable qualifier."""

    def __init__(self, unit: SynNode, alias: QualifierAliasTable):
        self.fq = frozenset(alias.entries)
        imported: dict[str, str] = {}
        for child in unit.children:
            if child.type == "ImportDeclaration" and not child.info.get("star"):
                q = child.info["qualified"]
                imported[q.rsplit(".", 1)[-1]] = q
        self.imported = imported

    def is_qualifier(self, anno: SynNode) -> bool:
        name = anno.info.get("anno_name", "")
        if "." in name:
            return name in self.fq
        return self.imported.get(name) in self.fq


def parse_class(source: bytes | str,
                alias_table: QualifierAliasTable | None = None,
                path: str = "<memory>") -> RawGraph:
    """Parse one compilation unit into a RawGraph with harvested labels."""
    if isinstance(source, str):
        source = source.encode("utf-8")
    alias = alias_table or QualifierAliasTable()
    unit, comments = parse_compilation_unit(source, path)
    quals = _QualifierResolver(unit, alias)
    builder = _GraphBuilder(path, quals)
    builder.visit(unit, -1)
    builder.attach_comments(unit, comments)
    package = ""
    for child in unit.children:
        if child.type == "PackageDeclaration":
            package = child.info["qualified"]
    class_id = _class_id_of(unit, package, path)
    graph = RawGraph(class_id, builder.nodes, builder.parent)
    graph.facts = extract_facts(unit, package, quals)
    graph.validate()
    return graph


def _class_id_of(unit: SynNode, package: str, path: str) -> str:
    for child in unit.children:
        if child.type in _TYPE_DECL_TYPES and child.name:
            return f"{package}.{child.name}" if package else child.name
    stem = Path(path).stem or "unit"
    return f"{package}.{stem}" if package else stem


class _GraphBuilder:
    def __init__(self, path: str, quals: _QualifierResolver):
        self.path = path
        self.quals = quals
        self.nodes: list[RawNode] = []
        self.parent: list[int] = []
        self.syn_id: dict[int, int] = {}   # id(SynNode) -> node id
        self.package = ""
        self.anon_counter = 0

    # -- scope bookkeeping is threaded through visit() arguments ------------

    def visit(self, syn: SynNode, parent_id: int,
              type_fq: str = "", method_sig: str = "",
              inherited_mods: tuple[str, ...] = (),
              param_ordinal: int | None = None) -> int | None:
        if syn.type == "PackageDeclaration":
            self.package = syn.info["qualified"]
        if syn.type in _ANNOTATION_TYPES and self.quals.is_qualifier(syn):
            return None  # harvested by the declaring node, never a node

        mods = tuple(sorted(syn.info.get("modifiers", ()))) or inherited_mods
        tags: set[str] = set()
        label = None
        sig = None
        name = syn.name if syn.type in _NAMED_TYPES else None

        if syn.type in _TYPE_DECL_TYPES:
            type_fq = self._fq_for_type(syn, type_fq)
        if syn.type in ("PrimitiveType", "VoidType"):
            tags.add(TAG_PRIMITIVE_TYPE)
        if syn.type == "FieldDeclaration":
            tags.add(TAG_FIELD_DECL)
            if syn.info.get("primitive"):
                tags.add(TAG_PRIMITIVE_DECL)
        if syn.type == "LocalVarDecl":
            tags.add(TAG_LOCAL_DECL)
            if syn.info.get("primitive"):
                tags.add(TAG_PRIMITIVE_DECL)
        if syn.type == "MethodDeclaration":
            method_sig = _method_sig(type_fq, syn)
            sig = method_sig
            if not syn.info.get("return_primitive"):
                tags.add(TAG_LABEL_SITE)
                if self._has_qualifier(syn):
                    label = LABEL_NULLABLE
        if syn.type == "ConstructorDeclaration":
            method_sig = _ctor_sig(type_fq, syn)
            sig = method_sig
        if syn.type == "Parameter":
            if syn.info.get("untyped_lambda"):
                tags.add(TAG_UNTYPED_LAMBDA)
            if syn.info.get("catch_param"):
                tags.add(TAG_CATCH_PARAM)
            eligible = (method_sig and param_ordinal is not None
                        and not syn.info.get("primitive")
                        and not syn.info.get("untyped_lambda")
                        and not syn.info.get("catch_param")
                        and syn.name != "this")
            if eligible:
                sig = f"{method_sig}#{param_ordinal}"
                tags.add(TAG_LABEL_SITE)
                if self._has_qualifier(syn):
                    label = LABEL_NULLABLE

        node_id = len(self.nodes)
        self.nodes.append(RawNode(
            id=node_id, kind=_kind_of(syn.type), modifiers=mods,
            anchor=SourceAnchor(self.path, (syn.start, syn.end), sig),
            name=name, label=label, tags=frozenset(tags), orig_id=node_id))
        self.parent.append(parent_id)
        self.syn_id[id(syn)] = node_id

        if syn.type in ("FieldDeclaration", "LocalVarDecl"):
            self._visit_declaration(syn, node_id, type_fq, method_sig, mods)
            return node_id

        ordinal = 0
        for child in syn.children:
            child_ordinal = None
            if child.type == "Parameter" and syn.type in (
                    "MethodDeclaration", "ConstructorDeclaration"):
                child_ordinal = ordinal
                ordinal += 1
            self.visit(child, node_id, type_fq, method_sig,
                       param_ordinal=child_ordinal)
        return node_id

    def _visit_declaration(self, syn: SynNode, node_id: int, type_fq: str,
                           method_sig: str, mods: tuple[str, ...]):
        """Field/local declaration: declarators inherit modifiers and, for
        fields of reference type, become label sites."""
        is_field = syn.type == "FieldDeclaration"
        qualifier = self._has_qualifier(syn)
        for child in syn.children:
            if child.type == "VariableDeclarator":
                tags = set()
                sig = None
                label = None
                if is_field:
                    tags.add(TAG_FIELD)
                    if not child.info.get("primitive"):
                        tags.add(TAG_LABEL_SITE)
                        sig = f"{type_fq}#{child.name}"
                        if qualifier:
                            label = LABEL_NULLABLE
                cid = len(self.nodes)
                self.nodes.append(RawNode(
                    id=cid, kind="VariableDeclarator", modifiers=mods,
                    anchor=SourceAnchor(self.path, (child.start, child.end), sig),
                    name=child.name, label=label, tags=frozenset(tags),
                    orig_id=cid))
                self.parent.append(node_id)
                self.syn_id[id(child)] = cid
                for sub in child.children:
                    self.visit(sub, cid, type_fq, method_sig)
            else:
                self.visit(child, node_id, type_fq, method_sig)

    def _has_qualifier(self, decl: SynNode) -> bool:
        return any(c.type in _ANNOTATION_TYPES and self.quals.is_qualifier(c)
                   for c in decl.children)

    def _fq_for_type(self, syn: SynNode, enclosing: str) -> str:
        name = syn.name
        if not name:
            self.anon_counter += 1
            name = f"$anon{self.anon_counter}"
        if enclosing:
            return f"{enclosing}.{name}"
        return f"{self.package}.{name}" if self.package else name

    def attach_comments(self, unit: SynNode, comments: list[tuple[int, int]]):
        for start, end in comments:
            host = _deepest_containing(unit, start)
            pid = self.syn_id.get(id(host), 0)
            nid = len(self.nodes)
            self.nodes.append(RawNode(
                id=nid, kind="LineComment", modifiers=(),
                anchor=SourceAnchor(self.path, (start, end)), orig_id=nid))
            self.parent.append(pid)


def _deepest_containing(root: SynNode, pos: int) -> SynNode:
    node = root
    while True:
        nxt = None
        for c in node.children:
            if c.start <= pos < c.end:
                nxt = c
                break
        if nxt is None:
            return node
        node = nxt


def _method_sig(type_fq: str, syn: SynNode) -> str:
    params = ",".join(syn.info.get("param_types", []))
    return f"{type_fq}#{syn.name}({params})"


def _ctor_sig(type_fq: str, syn: SynNode) -> str:
    params = ",".join(syn.info.get("param_types", []))
    return f"{type_fq}#<init>({params})"


# --------------------------------------------------------------------------
# facts: per-class symbol tables for linking, post-processing, and checking


def extract_facts(unit: SynNode, package: str,
                  quals: _QualifierResolver) -> dict:
    facts: dict = {"package": package, "types": {}, "refs": []}
    refs: set[str] = set()

    def collect_refs(syn: SynNode):
        if syn.type == "ClassType":
            refs.add(syn.info.get("type_sig", ""))
        if syn.type == "ObjectCreationExpr" and syn.name:
            refs.add(syn.name)
        for c in syn.children:
            collect_refs(c)

    collect_refs(unit)

    def walk_types(syn: SynNode, enclosing: str):
        for child in syn.children:
            if child.type in _TYPE_DECL_TYPES and child.name:
                fq = f"{enclosing}.{child.name}" if enclosing else (
                    f"{package}.{child.name}" if package else child.name)
                facts["types"][fq] = _type_facts(child, fq, quals)
                walk_types(child, fq)
            else:
                walk_types(child, enclosing)

    walk_types(unit, "")
    facts["refs"] = sorted(r for r in refs if r)
    return facts


def _type_facts(decl: SynNode, fq: str, quals: _QualifierResolver) -> dict:
    simple = decl.name or ""
    supers = [s.rsplit(".", 1)[-1] for s in decl.info.get("supertypes", []) if s]
    fields: dict[str, dict] = {}
    methods: list[dict] = []
    calls: list[dict] = []

    member_decls = [c for c in decl.children
                    if c.type in ("FieldDeclaration", "MethodDeclaration",
                                  "ConstructorDeclaration", "EnumConstant",
                                  "InitializerBlock")]
    for m in member_decls:
        if m.type == "FieldDeclaration":
            for d in m.children:
                if d.type == "VariableDeclarator":
                    fields[d.name] = {
                        "sig": f"{fq}#{d.name}",
                        "type": _simple_type(d.info.get("type_sig", "")),
                        "ref": not d.info.get("primitive", False),
                        "annotated": _decl_has_qualifier(m, quals),
                    }

    for m in member_decls:
        if m.type in ("MethodDeclaration", "ConstructorDeclaration"):
            methods.append(_method_facts(m, fq, simple, fields, quals))
        scope = dict(_param_scope(m))
        _collect_calls(m, simple, fields, scope, calls, top=True)

    return {"simple": simple, "supertypes": supers, "fields": fields,
            "methods": methods, "calls": calls}


def _decl_has_qualifier(decl: SynNode, quals: _QualifierResolver) -> bool:
    return any(c.type in _ANNOTATION_TYPES and quals.is_qualifier(c)
               for c in decl.children)


def _simple_type(type_sig: str) -> str:
    return type_sig.replace("[]", "")


def _param_scope(member: SynNode) -> dict[str, str]:
    scope: dict[str, str] = {}
    for c in member.children:
        if c.type == "Parameter" and c.name:
            scope[c.name] = c.info.get("type_sig", "")
    for n in member.walk():
        if n.type == "LocalVarDecl":
            sig = n.info.get("type_sig", "")
            for d in n.children:
                if d.type == "VariableDeclarator":
                    scope.setdefault(d.name, sig)
    return scope


def _method_facts(m: SynNode, fq: str, simple: str, fields: dict,
                  quals: _QualifierResolver) -> dict:
    is_ctor = m.type == "ConstructorDeclaration"
    name = "<init>" if is_ctor else (m.name or "")
    sig = _ctor_sig(fq, m) if is_ctor else _method_sig(fq, m)
    params = [c for c in m.children if c.type == "Parameter"]
    param_types = [_simple_type(p.info.get("type_sig", "")) for p in params]
    param_refs = [not p.info.get("primitive", False) for p in params]
    param_annos = [_decl_has_qualifier(p, quals) for p in params]
    scope = _param_scope(m)
    returned: set[str] = set()
    body = m.child_of_type("BlockStmt")
    if body is not None and not is_ctor:
        _collect_returned_fields(body, fields, scope, params, returned)
    return {
        "sig": sig,
        "name": name,
        "arity": len(params),
        "param_types": param_types,
        "param_refs": param_refs,
        "param_sigs": [f"{sig}#{i}" for i in range(len(params))],
        "param_annotated": param_annos,
        "return_ref": (not m.info.get("return_primitive", True)) and not is_ctor,
        "return_annotated": (not is_ctor) and _decl_has_qualifier(m, quals),
        "returns_fields": sorted(returned),
    }


def _collect_returned_fields(syn: SynNode, fields: dict, scope: dict,
                             params: list, returned: set[str]):
    if syn.type in ("LambdaExpr", "ClassOrInterfaceDecl", "EnumDeclaration",
                    "RecordDecl", "ObjectCreationExpr"):
        return  # returns inside nested bodies belong to those bodies
    if syn.type == "ReturnStmt" and syn.children:
        fname = _field_read_name(syn.children[0], fields, scope)
        if fname is not None:
            returned.add(fname)
    for c in syn.children:
        _collect_returned_fields(c, fields, scope, params, returned)


def _field_read_name(expr: SynNode, fields: dict, scope: dict) -> str | None:
    """Name of the field a bare `f` or `this.f` expression reads, if any."""
    if expr.type == "NameExpr" and expr.name in fields and expr.name not in scope:
        return expr.name
    if (expr.type == "FieldAccessExpr" and expr.children
            and expr.children[0].type == "ThisExpr"
            and not expr.children[0].children
            and expr.name in fields):
        return expr.name
    return None


def _collect_calls(syn: SynNode, simple: str, fields: dict, scope: dict,
                   calls: list[dict], top: bool):
    if syn.type in ("ClassOrInterfaceDecl", "EnumDeclaration", "RecordDecl") \
            and not top:
        return  # nested type bodies produce their own fact tables
    if syn.type == "MethodCallExpr":
        args = syn.children[1:] if syn.info.get("scope_expr") else syn.children
        receiver = simple
        if syn.info.get("scope_expr"):
            receiver = _receiver_type(syn.children[0], simple, fields, scope)
        entry = _call_entry(syn.name or "", receiver, args, fields, scope)
        if entry is not None:
            calls.append(entry)
    if syn.type == "ObjectCreationExpr":
        # children after the type node are arguments (anonymous bodies excluded)
        args = []
        seen_type = False
        for c in syn.children:
            if not seen_type and c.type in ("ClassType", "PrimitiveType",
                                            "ArrayType", "VarType"):
                seen_type = True
                continue
            if seen_type and c.type not in (
                    "FieldDeclaration", "MethodDeclaration",
                    "ConstructorDeclaration", "InitializerBlock",
                    "ClassOrInterfaceDecl", "EnumDeclaration", "RecordDecl",
                    "AnnotationDecl"):
                args.append(c)
        entry = _call_entry("<init>", syn.name or "", args, fields, scope)
        if entry is not None:
            calls.append(entry)
    for c in syn.children:
        _collect_calls(c, simple, fields, scope, calls, top=False)


def _receiver_type(scope_expr: SynNode, simple: str, fields: dict,
                   scope: dict) -> str:
    if scope_expr.type == "ThisExpr" and not scope_expr.children:
        return simple
    if scope_expr.type == "NameExpr" and scope_expr.name:
        n = scope_expr.name
        if n in scope:
            return _simple_type(scope[n])
        if n in fields:
            return fields[n]["type"]
        if n[:1].isupper():
            return n
    return ""


def _call_entry(name: str, receiver: str, args: list[SynNode], fields: dict,
                scope: dict) -> dict | None:
    arg_fields = {}
    for i, a in enumerate(args):
        fname = _field_read_name(a, fields, scope)
        if fname is not None:
            arg_fields[str(i)] = fname
    return {"name": name, "receiver": receiver, "arity": len(args),
            "arg_fields": arg_fields}


# --------------------------------------------------------------------------
# erasure


def erase_annotations(source: bytes | str,
                      alias_table: QualifierAliasTable | None = None,
                      path: str = "<memory>") -> bytes:
    """Remove qualifier annotations (and imports they leave unused)."""
    if isinstance(source, str):
        source = source.encode("utf-8")
    alias = alias_table or QualifierAliasTable()
    unit, _ = parse_compilation_unit(source, path)
    quals = _QualifierResolver(unit, alias)
    spans = [(n.start, n.end) for n in unit.walk()
             if n.type in _ANNOTATION_TYPES and quals.is_qualifier(n)]
    out = _remove_spans(source, spans)
    if not spans:
        return out  # byte-identical, and no import can have become unused

    unit2, _ = parse_compilation_unit(out, path)
    alias_fq = frozenset(alias.entries)
    import_spans = []
    for child in unit2.children:
        if child.type != "ImportDeclaration" or child.info.get("star"):
            continue
        q = child.info["qualified"]
        if q not in alias_fq:
            continue
        simple = q.rsplit(".", 1)[-1]
        if not _ident_used_outside_imports(out, unit2, simple):
            import_spans.append((child.start, child.end))
    return _remove_spans(out, import_spans)


def _ident_used_outside_imports(buf: bytes, unit: SynNode, simple: str) -> bool:
    imports = [(c.start, c.end) for c in unit.children
               if c.type == "ImportDeclaration"]
    tokens, _ = lex(buf)
    for t in tokens:
        if t.type == IDENT and t.value == simple:
            if not any(s <= t.start < e for s, e in imports):
                return True
    return False


def _remove_spans(buf: bytes, spans: list[tuple[int, int]]) -> bytes:
    """Remove spans plus each span's trailing whitespace run (at most one
    newline, plus the following indentation)."""
    out = buf
    for start, end in sorted(spans, reverse=True):
        j = end
        while j < len(out) and out[j] in (0x20, 0x09):
            j += 1
        if j < len(out) and out[j] == 0x0A:
            j += 1
            while j < len(out) and out[j] in (0x20, 0x09):
                j += 1
        out = out[:start] + out[j:]
    return out


# --------------------------------------------------------------------------
# graph corpus IO


def write_graphs(path: str | Path, graphs: list[RawGraph]) -> None:
    write_jsonl(path, [g.to_json() for g in graphs])


def read_graphs(path: str | Path) -> list[RawGraph]:
    return [RawGraph.from_json(row) for row in read_jsonl(path)]


# --------------------------------------------------------------------------
# corpus scanning


def scan_corpus(root: str | Path,
                alias_table: QualifierAliasTable | None = None,
                size_bounds: tuple[int, int] = (10, 8000)) -> dict:
    """Inventory every .java file under root into a corpus manifest."""
    alias = alias_table or QualifierAliasTable()
    rootp = Path(root)
    min_nodes, max_nodes = size_bounds
    classes = []
    errors = []
    for path in sorted(rootp.rglob("*.java")):
        rel = path.relative_to(rootp).as_posix()
        try:
            data = path.read_bytes()
        except OSError as exc:
            errors.append({"path": rel, "error": "io-error", "detail": str(exc)})
            continue
        try:
            graph = parse_class(data, alias, rel)
        except (JavaParseError, UnsupportedConstruct) as exc:
            errors.append({"path": rel, "error": exc.code, "detail": str(exc)})
            continue
        n = len(graph.nodes)
        labels = sorted(nd.anchor.sig for nd in graph.nodes
                        if nd.label is not None and nd.anchor.sig)
        row = {
            "class_id": graph.class_id,
            "path": rel,
            "bytes": len(data),
            "node_count": n,
            "label_count": graph.label_count,
            "labels": labels,
            "included": True,
        }
        if graph.label_count == 0:
            row["included"] = False
            row["exclusion_reason"] = "NoLabels"
        elif n < min_nodes:
            row["included"] = False
            row["exclusion_reason"] = "TooSmall"
        elif n > max_nodes:
            row["included"] = False
            row["exclusion_reason"] = "TooLarge"
        classes.append(row)
    return {
        "format_version": FORMAT_VERSION,
        "root": str(rootp),
        "bounds": [min_nodes, max_nodes],
        "alias_digest": alias.digest(),
        "classes": classes,
        "errors": errors,
    }
