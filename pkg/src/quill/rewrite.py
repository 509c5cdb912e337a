"""Materialize decided predictions as source annotations.

Planning resolves each decided signature against a fresh parse of the
sources, places one `@Nullable` insertion before the declared type, and
adds one import per file that needs it. Application is back-to-front,
hash-guarded, and atomic per file. Erasure of a whole project tree lives
here too since evaluation needs it as the inverse operation.
"""

from __future__ import annotations

import difflib
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .common import FORMAT_VERSION, read_json, write_json
from .errors import IllegalPosition, QuillError, StaleAnchor
from .graphs import TAG_LABEL_SITE
from .ingest import QualifierAliasTable, erase_annotations, parse_class
from .javasrc.parser import SynNode, parse_compilation_unit

DEFAULT_ANNOTATION = "javax.annotation.Nullable"

KIND_ANNOTATION = "annotation"
KIND_IMPORT = "import"

_TYPE_NODE_TYPES = ("ClassType", "PrimitiveType", "VoidType", "ArrayType",
                    "VarType", "IntersectionType", "WildcardType")


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------
# edit plan


@dataclass
class FileEdit:
    path: str
    sha256: str
    insertions: list[tuple[int, str, str]]  # (offset, text, kind), desc

    def to_json(self) -> dict:
        return {"path": self.path, "sha256": self.sha256,
                "insertions": [[o, t, k] for o, t, k in self.insertions]}

    @staticmethod
    def from_json(d: dict) -> "FileEdit":
        return FileEdit(d["path"], d["sha256"],
                        [(o, t, k) for o, t, k in d["insertions"]])


@dataclass
class EditPlan:
    annotation: str = DEFAULT_ANNOTATION
    files: list[FileEdit] = field(default_factory=list)

    def validate(self) -> None:
        for fe in self.files:
            offsets = [o for o, _, _ in fe.insertions]
            if offsets != sorted(offsets, reverse=True):
                raise QuillError(
                    f"{fe.path}: insertions not sorted back-to-front")
            for offset, _, kind in fe.insertions:
                if kind == KIND_ANNOTATION and offset <= 0:
                    raise IllegalPosition(
                        f"{fe.path}: annotation at offset {offset}")
                if offset < 0:
                    raise IllegalPosition(
                        f"{fe.path}: negative offset {offset}")

    def insertion_count(self) -> int:
        return sum(len(fe.insertions) for fe in self.files)

    def to_json(self) -> dict:
        return {"format_version": FORMAT_VERSION,
                "annotation": self.annotation,
                "files": [fe.to_json() for fe in self.files]}

    @staticmethod
    def from_json(d: dict) -> "EditPlan":
        return EditPlan(d["annotation"],
                        [FileEdit.from_json(f) for f in d["files"]])

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_json())

    @staticmethod
    def load(path: str | Path) -> "EditPlan":
        return EditPlan.from_json(read_json(path))


# --------------------------------------------------------------------------
# planning


def _load_sources(sources) -> dict[str, bytes]:
    if isinstance(sources, Mapping):
        return {str(k): (v.encode() if isinstance(v, str) else bytes(v))
                for k, v in sources.items()}
    root = Path(sources)
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*.java"))}


def _index_decls(unit: SynNode):
    """(type, start, end) -> (node, parent) for declaration nodes."""
    index = {}

    def walk(syn: SynNode, parent: SynNode | None):
        if syn.type in ("MethodDeclaration", "VariableDeclarator",
                        "Parameter", "FieldDeclaration"):
            index[(syn.type, syn.start, syn.end)] = (syn, parent)
        for c in syn.children:
            walk(c, syn)

    walk(unit, None)
    return index


def _type_child(syn: SynNode) -> SynNode | None:
    for c in syn.children:
        if c.type in _TYPE_NODE_TYPES:
            return c
    return None


def _anno_offset(kind: str, span: tuple[int, int], decls) -> int:
    """Byte offset of the declared type the annotation goes in front of."""
    if kind == "MethodDeclaration":
        syn, _ = decls[(kind, span[0], span[1])]
        rtype = _type_child(syn)
    elif kind == "VariableDeclarator":
        _, parent = decls[(kind, span[0], span[1])]
        rtype = _type_child(parent) if parent is not None else None
    else:
        syn, _ = decls[(kind, span[0], span[1])]
        rtype = _type_child(syn)
    if rtype is None:
        raise IllegalPosition(f"no type node for {kind} at {span}")
    return rtype.start


def _import_point(unit: SynNode, buf: bytes) -> tuple[int, str]:
    """Where a new import goes and its text, shaped so erasure undoes it."""
    anchor_end = None
    for child in unit.children:
        if child.type == "ImportDeclaration":
            anchor_end = child.end if anchor_end is None \
                else max(anchor_end, child.end)
    if anchor_end is None:
        for child in unit.children:
            if child.type == "PackageDeclaration":
                anchor_end = child.end
    if anchor_end is None:
        return 0, "import {fq};\n"
    nl = buf.find(b"\n", anchor_end)
    if nl < 0:
        return anchor_end, " import {fq};"
    return nl + 1, "import {fq};\n"


def plan_edits(pset, sources, annotation_fq: str = DEFAULT_ANNOTATION,
               alias_table: QualifierAliasTable | None = None) -> EditPlan:
    """One insertion per decided signature, plus imports where needed."""
    alias = alias_table or QualifierAliasTable()
    contents = _load_sources(sources)
    decided = pset.decided_signatures() if hasattr(
        pset, "decided_signatures") else set(pset)
    simple = annotation_fq.rsplit(".", 1)[-1]

    sites: dict[str, tuple[str, str, tuple[int, int]]] = {}
    units: dict[str, SynNode] = {}
    for path, buf in sorted(contents.items()):
        graph = parse_class(buf, alias, path)
        unit, _ = parse_compilation_unit(buf, path)
        units[path] = unit
        for node in graph.nodes:
            if node.anchor.sig and TAG_LABEL_SITE in node.tags:
                sites.setdefault(node.anchor.sig,
                                 (path, node.kind, node.anchor.span))

    missing = sorted(s for s in decided if s not in sites)
    if missing:
        raise StaleAnchor(f"undecidable signatures: {', '.join(missing)}")

    per_file: dict[str, list[tuple[str, str, tuple[int, int]]]] = {}
    for sig in sorted(decided):
        path, kind, span = sites[sig]
        per_file.setdefault(path, []).append((sig, kind, span))

    plan = EditPlan(annotation_fq, [])
    for path in sorted(per_file):
        buf = contents[path]
        unit = units[path]
        decls = _index_decls(unit)
        _check_declarator_groups(per_file[path], decls, sites, decided, path)

        imports = {c.info["qualified"]: c for c in unit.children
                   if c.type == "ImportDeclaration"
                   and not c.info.get("star")}
        clash = any(q.rsplit(".", 1)[-1] == simple and q != annotation_fq
                    for q in imports)
        clash = clash or any(c.name == simple for c in unit.walk()
                             if c.type in ("ClassOrInterfaceDecl",
                                           "EnumDeclaration", "RecordDecl"))
        spelled = f"@{annotation_fq} " if clash else f"@{simple} "

        insertions: set[tuple[int, str, str]] = set()
        for _, kind, span in per_file[path]:
            offset = _anno_offset(kind, span, decls)
            insertions.add((offset, spelled, KIND_ANNOTATION))
        if not clash and annotation_fq not in imports:
            offset, template = _import_point(unit, buf)
            insertions.add((offset, template.format(fq=annotation_fq),
                            KIND_IMPORT))
        ordered = sorted(insertions, key=lambda i: (-i[0], i[1]))
        plan.files.append(FileEdit(path, _sha(buf), ordered))
    plan.validate()
    return plan


def _check_declarator_groups(targets, decls, sites, decided, path):
    """A multi-declarator field can only be annotated as a unit: deciding a
    strict subset of its declarators has no legal annotation position."""
    for _, kind, span in targets:
        if kind != "VariableDeclarator":
            continue
        _, parent = decls[(kind, span[0], span[1])]
        if parent is None:
            continue
        group = [c for c in parent.children
                 if c.type == "VariableDeclarator"]
        if len(group) < 2:
            continue
        group_sigs = [s for s, (p, k, sp) in sites.items()
                      if p == path and k == "VariableDeclarator"
                      and any(sp == (c.start, c.end) for c in group)]
        chosen = [s for s in group_sigs if s in decided]
        if chosen and len(chosen) != len(group_sigs):
            raise IllegalPosition(
                f"{path}: decided {sorted(chosen)} covers part of a "
                f"multi-declarator field {sorted(group_sigs)}")


# --------------------------------------------------------------------------
# application


def _edited_bytes(fe: FileEdit, buf: bytes) -> bytes:
    out = buf
    for offset, text, _ in fe.insertions:
        if offset > len(out):
            raise IllegalPosition(
                f"{fe.path}: offset {offset} beyond end of file")
        out = out[:offset] + text.encode("utf-8") + out[offset:]
    return out


def apply_edits(plan: EditPlan, root: str | Path,
                dry_run: bool = False) -> dict[str, bytes]:
    """Insert back-to-front; verify hashes and reparses before any write."""
    from .errors import HashMismatch
    plan.validate()
    rootp = Path(root)
    staged: list[tuple[Path, bytes]] = []
    results: dict[str, bytes] = {}
    for fe in plan.files:
        target = rootp / fe.path
        try:
            buf = target.read_bytes()
        except OSError as exc:
            raise StaleAnchor(f"{fe.path}: {exc}") from exc
        if _sha(buf) != fe.sha256:
            raise HashMismatch(f"{fe.path}: file changed since planning")
        new = _edited_bytes(fe, buf)
        parse_compilation_unit(new, fe.path)  # must still parse
        staged.append((target, new))
        results[fe.path] = new
    if dry_run:
        return results
    for target, new in staged:
        tmp = target.with_name(target.name + ".quill-tmp")
        tmp.write_bytes(new)
        tmp.replace(target)
    return results


def diff_of(plan: EditPlan, root: str | Path) -> str:
    """Unified diffs for every planned file, without writing anything."""
    rootp = Path(root)
    chunks = []
    for fe in plan.files:
        before = (rootp / fe.path).read_bytes()
        after = _edited_bytes(fe, before)
        diff = difflib.unified_diff(
            before.decode("utf-8", "replace").splitlines(keepends=True),
            after.decode("utf-8", "replace").splitlines(keepends=True),
            fromfile=f"a/{fe.path}", tofile=f"b/{fe.path}")
        chunks.append("".join(diff))
    return "".join(chunks)


# --------------------------------------------------------------------------
# whole-project erasure


def erase_project(root: str | Path,
                  alias_table: QualifierAliasTable | None = None) -> int:
    """Erase qualifier annotations in every .java file; count changed."""
    alias = alias_table or QualifierAliasTable()
    rootp = Path(root)
    changed = 0
    for path in sorted(rootp.rglob("*.java")):
        before = path.read_bytes()
        after = erase_annotations(before, alias,
                                  path.relative_to(rootp).as_posix())
        if after != before:
            tmp = path.with_name(path.name + ".quill-tmp")
            tmp.write_bytes(after)
            tmp.replace(path)
            changed += 1
    return changed
