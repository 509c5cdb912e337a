"""A tiny nullness checker for tests and demos.

Run as ``python -m quill.stubcheck <project_dir>``. It flags two flows a
real checker would: a method that returns a null literal, and a field
that is assigned or initialized with one. Members already marked
@Nullable are quiet, so annotating a project lowers its count.
"""

from __future__ import annotations

import sys
from pathlib import Path

from .errors import QuillError
from .ingest import parse_class

PREFIX = "warning: [Nullness]"


def _line_of(source: str, offset: int) -> int:
    return source.count("\n", 0, offset) + 1


def check_source(source: str, path: str) -> list[str]:
    graph = parse_class(source, path=path)
    nodes = {n.id: n for n in graph.nodes}
    fields = {n.name: n for n in graph.nodes
              if n.kind == "VariableDeclarator" and n.anchor.sig}
    children: dict[int, list[int]] = {}
    for n in graph.nodes:
        p = graph.parent[n.id]
        if p >= 0:
            children.setdefault(p, []).append(n.id)

    def ancestors(nid: int):
        cur = graph.parent[nid]
        while cur >= 0:
            yield nodes[cur]
            cur = graph.parent[cur]

    out = []
    for n in graph.nodes:
        if n.kind != "NullLiteralExpr":
            continue
        hit = None
        for anc in ancestors(n.id):
            if anc.kind == "ReturnStmt":
                meth = next((a for a in ancestors(anc.id)
                             if a.kind == "MethodDeclaration"), None)
                if meth and meth.anchor.sig and meth.label is None:
                    hit = (n.anchor.span[0],
                           f"method {meth.name}() may return null")
                break
            if anc.kind == "AssignExpr":
                kids = children.get(anc.id, [])
                target = next((nodes[k] for k in sorted(kids)
                               if nodes[k].name), None)
                if target and target.name in fields:
                    f = fields[target.name]
                    if f.label is None:
                        hit = (n.anchor.span[0],
                               f"field {f.name} may be assigned null")
                break
            if anc.kind == "VariableDeclarator":
                if anc.anchor.sig and anc.label is None:
                    hit = (n.anchor.span[0],
                           f"field {anc.name} may be initialized null")
                break
            if anc.kind == "MethodDeclaration":
                break
        if hit:
            off, msg = hit
            out.append(f"{path}:{_line_of(source, off)}: {PREFIX} {msg}")
    return sorted(set(out))


def check_project(root: str | Path) -> list[str]:
    rootp = Path(root)
    out = []
    for p in sorted(rootp.rglob("*.java")):
        rel = p.relative_to(rootp).as_posix()
        out.extend(check_source(p.read_text(encoding="utf-8"), rel))
    return out


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: python -m quill.stubcheck <project_dir>",
              file=sys.stderr)
        return 2
    try:
        warnings = check_project(args[0])
    except (QuillError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for line in warnings:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
