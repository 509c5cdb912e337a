"""Synthetic Java corpus with exact nullability ground truth.

Each generated class realizes one of five shapes: a field assigned null
somewhere, a parameter guarded by a null check, a getter over a nullable
field, a plain class with nothing nullable, or an inheritance pair whose
override keeps the supertype's nullable return. Sources carry the truth
as real annotations, so scanning the output recovers it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import floor
from pathlib import Path

import numpy as np

from .common import FORMAT_VERSION, read_json, write_json
from .errors import QuillError

PATTERN_FIELD_NULL = "field_null"
PATTERN_CHECKED_PARAM = "checked_param"
PATTERN_NULLABLE_GETTER = "nullable_getter"
PATTERN_PLAIN = "plain"
PATTERN_INHERITANCE = "inheritance"
PATTERNS = (PATTERN_FIELD_NULL, PATTERN_CHECKED_PARAM,
            PATTERN_NULLABLE_GETTER, PATTERN_PLAIN, PATTERN_INHERITANCE)

DEFAULT_WEIGHTS = {
    PATTERN_FIELD_NULL: 0.25,
    PATTERN_CHECKED_PARAM: 0.20,
    PATTERN_NULLABLE_GETTER: 0.20,
    PATTERN_PLAIN: 0.25,
    PATTERN_INHERITANCE: 0.10,
}

ANNOTATION_IMPORT = "import javax.annotation.Nullable;"

_WORDS = ("alpha", "bravo", "copper", "delta", "ember", "flint", "grove",
          "harbor", "iris", "jasper", "kestrel", "lumen", "meadow", "nickel",
          "onyx", "pepper", "quartz", "raven", "slate", "tundra")


@dataclass
class GeneratorSpec:
    class_count: int = 100
    members_per_class: int = 3
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    seed: int = 0
    package: str = "gen"

    def validate(self) -> None:
        if self.class_count <= 0:
            raise QuillError("class_count must be positive")
        if self.members_per_class < 0:
            raise QuillError("members_per_class must be non-negative")
        unknown = set(self.weights) - set(PATTERNS)
        if unknown:
            raise QuillError(f"unknown patterns: {sorted(unknown)}")
        if any(w < 0 for w in self.weights.values()):
            raise QuillError("weights must be non-negative")
        if sum(self.weights.values()) <= 0:
            raise QuillError("weights must sum to a positive value")

    def to_json(self) -> dict:
        return {"class_count": self.class_count,
                "members_per_class": self.members_per_class,
                "weights": {k: self.weights[k] for k in sorted(self.weights)},
                "seed": self.seed,
                "package": self.package}

    @staticmethod
    def from_json(d: dict) -> "GeneratorSpec":
        return GeneratorSpec(**d)

    def save(self, path: str | Path) -> None:
        write_json(path, {"format_version": FORMAT_VERSION,
                          "spec": self.to_json()})

    @staticmethod
    def load(path: str | Path) -> "GeneratorSpec":
        return GeneratorSpec.from_json(read_json(path)["spec"])


def pattern_quota(weights: dict, n: int) -> dict:
    """Largest-remainder allocation; inheritance rounds to an even count."""
    total = sum(weights.values())
    shares = {p: weights.get(p, 0.0) / total * n for p in PATTERNS}
    counts = {p: floor(s) for p, s in shares.items()}
    leftovers = sorted(PATTERNS, key=lambda p: (counts[p] - shares[p], p))
    i = 0
    while sum(counts.values()) < n:
        counts[leftovers[i % len(leftovers)]] += 1
        i += 1
    if counts[PATTERN_INHERITANCE] % 2:
        counts[PATTERN_INHERITANCE] -= 1
        counts[PATTERN_PLAIN] += 1
    return counts


def _word(rng) -> str:
    return _WORDS[int(rng.integers(len(_WORDS)))]


def _filler_members(rng, idx: int, count: int, peers: list[str]) -> list[str]:
    """Unlabeled members: negatives for reference sites, noise otherwise."""
    out = []
    for k in range(count):
        w = _word(rng)
        pick = int(rng.integers(4))
        if pick == 0:
            out.append(f'    private String {w}{k} = "{w}";')
        elif pick == 1:
            out.append(f"    private int {w}Count{k} = {int(rng.integers(100))};")
        elif pick == 2:
            out.append(f'    String join{k}(String part{k}) '
                       f'{{ return part{k} + "-{w}"; }}')
        else:
            out.append(f"    int size{k}() "
                       f"{{ return {int(rng.integers(10))}; }}")
    if peers and rng.random() < 0.5:
        peer = peers[int(rng.integers(len(peers)))]
        out.append(f"    private {peer} peer{idx};")
    return out


def _class_file(package: str, name: str, body_lines: list[str],
                needs_import: bool, extends: str | None = None) -> str:
    lines = [f"package {package};"]
    if needs_import:
        lines.append(ANNOTATION_IMPORT)
    head = f"public class {name}"
    if extends:
        head += f" extends {extends}"
    lines.append(head + " {")
    lines.extend(body_lines)
    lines.append("}")
    return "\n".join(lines) + "\n"


def generate_corpus(spec: GeneratorSpec) -> tuple[dict, dict]:
    """Returns ({path: source}, manifest with per-class pattern and truth)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    counts = pattern_quota(spec.weights, spec.class_count)
    patterns = [p for p in PATTERNS for _ in range(counts[p])]
    rng.shuffle(patterns)

    pkg = spec.package
    files: dict[str, str] = {}
    classes: list[dict] = []
    names = [f"G{i:04d}" for i in range(spec.class_count)]
    pending_base: tuple[str, int] | None = None

    for idx, pattern in enumerate(patterns):
        name = names[idx]
        fq = f"{pkg}.{name}"
        peers = names[:idx]
        body: list[str] = []
        truth: list[str] = []
        needs_import = False
        extends = None

        if pattern == PATTERN_FIELD_NULL:
            body.append(f"    @Nullable private String data{idx};")
            body.append(f"    void clear{idx}() "
                        f"{{ this.data{idx} = null; }}")
            truth.append(f"{fq}#data{idx}")
            needs_import = True
        elif pattern == PATTERN_CHECKED_PARAM:
            body.append(f"    private String kept{idx};")
            body.append(f"    void accept{idx}(@Nullable String given{idx}) {{")
            body.append(f"        if (given{idx} != null) "
                        f"{{ this.kept{idx} = given{idx}; }}")
            body.append("    }")
            truth.append(f"{fq}#accept{idx}(String)#0")
            needs_import = True
        elif pattern == PATTERN_NULLABLE_GETTER:
            body.append(f"    @Nullable private String slot{idx};")
            body.append(f"    @Nullable String pollSlot{idx}() {{")
            body.append(f"        this.slot{idx} = null;")
            body.append(f"        return slot{idx};")
            body.append("    }")
            truth.append(f"{fq}#slot{idx}")
            truth.append(f"{fq}#pollSlot{idx}()")
            needs_import = True
        elif pattern == PATTERN_PLAIN:
            w = _word(rng)
            body.append(f'    private String tag{idx} = "{w}";')
            body.append(f"    String getTag{idx}() {{ return tag{idx}; }}")
        elif pending_base is None:
            body.append(f"    @Nullable private String cache{idx};")
            body.append("    @Nullable String fetch() {")
            body.append(f"        this.cache{idx} = null;")
            body.append(f"        return cache{idx};")
            body.append("    }")
            truth.append(f"{fq}#cache{idx}")
            truth.append(f"{fq}#fetch()")
            needs_import = True
            pending_base = (name, idx)
        else:
            base_name, _ = pending_base
            extends = base_name
            body.append(f"    @Nullable private String store{idx};")
            body.append("    @Override @Nullable String fetch() {")
            body.append(f"        this.store{idx} = null;")
            body.append(f"        return store{idx};")
            body.append("    }")
            truth.append(f"{fq}#store{idx}")
            truth.append(f"{fq}#fetch()")
            needs_import = True
            pending_base = None

        body.extend(_filler_members(rng, idx, spec.members_per_class, peers))
        files[f"{name}.java"] = _class_file(pkg, name, body, needs_import,
                                            extends)
        classes.append({"name": name, "class_id": fq, "path": f"{name}.java",
                        "pattern": pattern, "truth": sorted(truth)})

    manifest = {"format_version": FORMAT_VERSION,
                "spec": spec.to_json(),
                "classes": classes}
    return files, manifest


def corpus_truth(manifest: dict) -> dict:
    return {c["class_id"]: list(c["truth"]) for c in manifest["classes"]}


def write_corpus(files: dict, root: str | Path) -> None:
    rootp = Path(root)
    rootp.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (rootp / name).write_text(files[name], encoding="utf-8")
