"""Shared helpers: canonical JSON, digests, stable hashing, artifact io."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from .errors import BadArtifact

FORMAT_VERSION = 1


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and fixed separators so equal values
    always produce equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest_of(obj: Any) -> str:
    """sha256 hex digest of an object's canonical JSON form."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def stable_hash(*parts: str) -> int:
    """Process-independent 64-bit hash (builtin hash() is randomized)."""
    h = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def write_json(path: str | Path, obj: Any) -> None:
    """Write a canonical-JSON artifact with a trailing newline, atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(canonical_json(obj) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_json(path: str | Path, expect_version: int | None = FORMAT_VERSION) -> Any:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadArtifact(f"{path}: {exc}") from exc
    if expect_version is not None and isinstance(obj, dict):
        got = obj.get("format_version")
        if got != expect_version:
            raise BadArtifact(
                f"{path}: format_version {got!r}, expected {expect_version}"
            )
    return obj


def write_jsonl(path: str | Path, lines: list[Any]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(canonical_json(obj))
            fh.write("\n")
    tmp.replace(path)


def read_jsonl(path: str | Path) -> list[Any]:
    path = Path(path)
    out = []
    try:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise BadArtifact(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise BadArtifact(f"{path}: {exc}") from exc
    return out
