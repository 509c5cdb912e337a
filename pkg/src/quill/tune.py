"""Empirical derivation of prune configs, plus graph clustering.

Ablation measures, for each node or statement kind, how much a cheap
preliminary model suffers when that kind is removed from the encoding
pipeline; kinds that hurt less than removing the same number of random
nodes are safe to drop. The module also ships the reference ablation
tables the default drop lists were derived from, so the derivation is
auditable end to end, and a seeded k-means (elbow-selected k) for routing
graphs to per-cluster models.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .common import FORMAT_VERSION, read_json, write_json
from .encoding import (
    LABEL_BEARING_KINDS, STATEMENT_KINDS, NapAst, PruneConfig, augment_names,
    drop_ids, drop_kinds, encode_features, phase1_prune, phase2_prune,
    phase3_prune,
)
from .errors import (
    BadArtifact, DegenerateFeatures, MissingBaseline, QuillError,
    ShapeMismatch,
)
from .graphs import KIND_INDEX, KIND_VOCAB, NODE_KINDS, RawGraph
from .learn import GcnConfig, SplitSpec, train

RANDOM_BASELINE = "<random>"

# Preliminary model for ablation runs: small, fast, deterministic.
PRELIM_CFG = GcnConfig(hidden_dim=16, dropout_rate=0.1, learning_rate=0.1,
                       epochs_per_batch=10, seed=0)

# Reference ablation measurements (mean held-out F1 per removed kind, with
# the random-removal baseline) from the original large-corpus study. The
# default drop lists ship pre-derived; feeding these tables through
# derive_drop_list reproduces them exactly.
REFERENCE_NODE_ABLATION = (
    ("InstanceOfExpr", 0.9492),
    ("ArrayInitializerExpr", 0.9441),
    ("TypeExpr", 0.939),
    ("MethodCallExpr", 0.9351),
    ("ForStmt", 0.9305),
    ("VariableDeclarator", 0.9219),
    ("UnaryExpr", 0.9151),
    ("VarType", 0.9132),
    ("NullLiteralExpr", 0.9058),
    ("NormalAnnotationExpr", 0.9035),
    ("IfStmt", 0.8986),
    ("LambdaExpr", 0.8973),
    ("ArrayCreationLevel", 0.8961),
    ("EnclosedExpr", 0.8959),
    ("BinaryExpr", 0.8957),
    ("ImportDeclaration", 0.8927),
    ("ExplCtorInvocStmt", 0.892),
    ("ReturnStmt", 0.8917),
    ("TryStmt", 0.8862),
    ("ForEachStmt", 0.8838),
    ("IntegerLiteralExpr", 0.8775),
    ("WildcardType", 0.8748),
    ("ConstructorDeclaration", 0.8721),
    ("LineComment", 0.8712),
    ("ConditionalExpr", 0.8666),
    ("ObjectCreationExpr", 0.8656),
    ("ArrayType", 0.8566),
    (RANDOM_BASELINE, 0.8561),
    ("ArrayCreationExpr", 0.8559),
    ("ArrayAccessExpr", 0.8473),
    ("CharLiteralExpr", 0.8438),
    ("IntersectionType", 0.8436),
    ("AssignExpr", 0.8354),
    ("SingleMemAnnoExpr", 0.8294),
    ("MemberValuePair", 0.8069),
    ("ClassExpr", 0.8032),
    ("Parameter", 0.8018),
    ("EnumDeclaration", 0.7828),
    ("BlockStmt", 0.7732),
    ("TypeParameter", 0.7722),
    ("ClassOrInterfaceDecl", 0.7699),
    ("Modifier", 0.7604),
    ("ThisExpr", 0.713),
    ("MethodDeclaration", 0.666),
)

REFERENCE_STATEMENT_ABLATION = (
    ("ForStmt", 0.9489),
    ("BlockStmt", 0.9234),
    ("LocalClassDeclStmt", 0.9226),
    ("SynchronizedStmt", 0.9189),
    ("ForEachStmt", 0.906),
    ("CatchClause", 0.898),
    ("WhileStmt", 0.88),
    ("LabeledStmt", 0.8762),
    ("AssertStmt", 0.8709),
    ("ThrowStmt", 0.863),
    (RANDOM_BASELINE, 0.861),
    ("ExplCtorInvocStmt", 0.8538),
    ("ReturnStmt", 0.8479),
    ("IfStmt", 0.8471),
    ("ContinueStmt", 0.8388),
    ("SwitchStmt", 0.8264),
    ("TryStmt", 0.819),
    ("ExpressionStmt", 0.7743),
)


@dataclass(frozen=True)
class AblationResult:
    target: str                  # node kind, or RANDOM_BASELINE
    f1_scores: tuple[float, ...]

    def __post_init__(self):
        if not self.f1_scores:
            raise BadArtifact(f"{self.target}: empty f1_scores")
        if any(not 0.0 <= f <= 1.0 for f in self.f1_scores):
            raise BadArtifact(f"{self.target}: F1 outside [0, 1]")

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1_scores))

    def to_json(self) -> dict:
        return {"target": self.target,
                "f1_scores": list(self.f1_scores),
                "mean_f1": self.mean_f1}

    @staticmethod
    def from_json(d: dict) -> "AblationResult":
        return AblationResult(d["target"], tuple(d["f1_scores"]))


def reference_results(table) -> list[AblationResult]:
    """Wrap a reference table as single-measurement results."""
    return [AblationResult(kind, (f1,)) for kind, f1 in table]


# --------------------------------------------------------------------------
# ablation


def _empty_drops(cfg: PruneConfig | None) -> PruneConfig:
    if cfg is not None:
        return cfg
    return PruneConfig(phase2_drop_kinds=frozenset(),
                       phase3_prune_stmt_kinds=frozenset())


def _rep_seed(seed: int, rep: int) -> int:
    h = hashlib.sha256(f"{seed}|{rep}".encode()).hexdigest()
    return int(h[:8], 16)


def _rep_f1(corpus: list[NapAst], prelim: GcnConfig, rep_seed: int) -> float:
    cfg = replace(prelim, seed=rep_seed)
    _, report = train(corpus, SplitSpec(seed=rep_seed), cfg)
    return report.test_f1


def _eligible_ids(g: RawGraph) -> list[int]:
    return [n.id for n in g.nodes
            if g.parent[n.id] >= 0 and n.label is None]


def _sample_drops(pools: list[list[int]], count: int,
                  rng: np.random.Generator) -> dict[int, set[int]]:
    """Pick `count` (class index, node id) pairs uniformly from the pools."""
    flat = [(ci, nid) for ci, pool in enumerate(pools) for nid in pool]
    if not flat or count <= 0:
        return {}
    take = min(count, len(flat))
    picks = rng.choice(len(flat), size=take, replace=False)
    chosen: dict[int, set[int]] = {}
    for p in sorted(int(i) for i in picks):
        ci, nid = flat[p]
        chosen.setdefault(ci, set()).add(nid)
    return chosen


def _finish(g3: RawGraph, original: RawGraph, cfg: PruneConfig,
            cap: int) -> NapAst:
    g4 = phase3_prune(g3, original, cfg)
    nap = encode_features(g4, cap)
    nap.prune_digest = cfg.digest()
    return nap


def ablate_node_types(graphs: list[RawGraph],
                      base_cfg: PruneConfig | None = None,
                      kinds: list[str] | None = None,
                      reps: int = 50, seed: int = 0,
                      prelim_cfg: GcnConfig | None = None,
                      cap: int = 8000) -> list[AblationResult]:
    """Measure held-out F1 with each kind dropped on top of `base_cfg`,
    plus a baseline dropping the same number of random nodes (re-rolled
    per repetition). Results come back sorted by mean F1, descending."""
    if reps < 1:
        raise QuillError("reps must be >= 1")
    base = _empty_drops(base_cfg)
    kinds = sorted(set(kinds if kinds is not None else NODE_KINDS))
    prelim = prelim_cfg or PRELIM_CFG

    firsts = [phase1_prune(raw, base) for raw in graphs]
    staged = [(g1, phase2_prune(g1, base)) for g1 in firsts]

    counts = {k: sum(sum(1 for n in g2.nodes
                         if n.kind == k and n.label is None
                         and g2.parent[n.id] >= 0)
                     for _, g2 in staged)
              for k in kinds}
    mean_count = int(round(np.mean([counts[k] for k in kinds]))) if kinds else 0

    results: list[AblationResult] = []
    for kind in kinds:
        corpus = [_finish(augment_names(drop_kinds(g2, {kind})), g1, base, cap)
                  for g1, g2 in staged]
        scores = tuple(_rep_f1(corpus, prelim, _rep_seed(seed, r))
                       for r in range(reps))
        results.append(AblationResult(kind, scores))

    pools = [_eligible_ids(g2) for _, g2 in staged]
    scores = []
    for r in range(reps):
        rng = np.random.default_rng([seed, r])
        chosen = _sample_drops(pools, mean_count, rng)
        corpus = [_finish(augment_names(drop_ids(g2, chosen.get(ci, set()))),
                          g1, base, cap)
                  for ci, (g1, g2) in enumerate(staged)]
        scores.append(_rep_f1(corpus, prelim, _rep_seed(seed, r)))
    results.append(AblationResult(RANDOM_BASELINE, tuple(scores)))

    results.sort(key=lambda r: (-r.mean_f1, r.target))
    return results


def ablate_statement_types(graphs: list[RawGraph],
                           base_cfg: PruneConfig | None = None,
                           stmt_kinds: list[str] | None = None,
                           reps: int = 50, seed: int = 0,
                           prelim_cfg: GcnConfig | None = None,
                           cap: int = 8000) -> list[AblationResult]:
    """As ablate_node_types, but the removal is guarded statement-subtree
    pruning (plus orphaned name nodes) instead of a kind drop."""
    if reps < 1:
        raise QuillError("reps must be >= 1")
    base = _empty_drops(base_cfg)
    kinds = sorted(set(stmt_kinds if stmt_kinds is not None
                       else STATEMENT_KINDS))
    off = set(kinds) - STATEMENT_KINDS
    if off:
        raise QuillError(f"not statement kinds: {sorted(off)}")
    prelim = prelim_cfg or PRELIM_CFG

    staged = []
    for raw in graphs:
        g1 = phase1_prune(raw, base)
        g3 = augment_names(phase2_prune(g1, base))
        g4 = phase3_prune(g3, g1, base)
        staged.append((g1, g3, g4))

    removed_counts = {}
    variant_corpora = {}
    for kind in kinds:
        cfg_k = replace(base, phase3_prune_stmt_kinds=frozenset(
            set(base.phase3_prune_stmt_kinds) | {kind}))
        corpus = []
        removed = 0
        for g1, g3, g4 in staged:
            g4k = phase3_prune(g3, g1, cfg_k)
            removed += len(g4.nodes) - len(g4k.nodes)
            nap = encode_features(g4k, cap)
            nap.prune_digest = cfg_k.digest()
            corpus.append(nap)
        removed_counts[kind] = removed
        variant_corpora[kind] = corpus
    mean_count = (int(round(np.mean([removed_counts[k] for k in kinds])))
                  if kinds else 0)

    results = []
    for kind in kinds:
        scores = tuple(_rep_f1(variant_corpora[kind], prelim,
                               _rep_seed(seed, r))
                       for r in range(reps))
        results.append(AblationResult(kind, scores))

    pools = [_eligible_ids(g4) for _, _, g4 in staged]
    scores = []
    for r in range(reps):
        rng = np.random.default_rng([seed, r])
        chosen = _sample_drops(pools, mean_count, rng)
        corpus = []
        for ci, (_, _, g4) in enumerate(staged):
            g = drop_ids(g4, chosen.get(ci, set()))
            nap = encode_features(g, cap)
            nap.prune_digest = base.digest()
            corpus.append(nap)
        scores.append(_rep_f1(corpus, prelim, _rep_seed(seed, r)))
    results.append(AblationResult(RANDOM_BASELINE, tuple(scores)))

    results.sort(key=lambda r: (-r.mean_f1, r.target))
    return results


def derive_drop_list(results: list[AblationResult]) -> set[str]:
    """Every kind scoring strictly above the random baseline, except the
    label-bearing kinds (their nodes carry the training signal)."""
    baseline = next((r for r in results if r.target == RANDOM_BASELINE), None)
    if baseline is None:
        raise MissingBaseline("no random-removal baseline in results")
    return {r.target for r in results
            if r.target != RANDOM_BASELINE
            and r.mean_f1 > baseline.mean_f1
            and r.target not in LABEL_BEARING_KINDS}


def export_ablation_csv(results: list[AblationResult],
                        path: str | Path) -> None:
    rows = sorted(results, key=lambda r: (-r.mean_f1, r.target))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "mean_f1"])
        for r in rows:
            writer.writerow([r.target, f"{r.mean_f1:.6f}"])


def write_ablation(path: str | Path, results: list[AblationResult]) -> None:
    write_json(path, {"format_version": FORMAT_VERSION,
                      "results": [r.to_json() for r in results]})


def read_ablation(path: str | Path) -> list[AblationResult]:
    obj = read_json(path)
    return [AblationResult.from_json(d) for d in obj["results"]]


# --------------------------------------------------------------------------
# clustering

FEATURE_RECIPE = "kind-histogram+log-sizes+name-label-fractions/1"
DEFAULT_CLUSTER_COUNT = 5  # fallback when the inertia curve has no elbow
DEFAULT_K_RANGE = (1, 2, 3, 4, 5, 6, 7, 8)


def graph_feature(nap: NapAst) -> np.ndarray:
    """Graph-level descriptor: normalized kind histogram, log node and edge
    counts, name-node fraction, labeled fraction."""
    n = nap.node_count()
    hist = np.zeros(len(KIND_VOCAB))
    names = 0
    for node in nap.nodes:
        hist[KIND_INDEX[node.kind]] += 1
        if node.kind == "NameNode":
            names += 1
    denom = max(1, n)
    edges = (len(nap.edge_sets.get("ParentChild", ()))
             + len(nap.edge_sets.get("NameUse", ())))
    labeled = sum(1 for v in nap.label_vector if v != "Unlabeled")
    tail = np.array([np.log1p(n), np.log1p(edges),
                     names / denom, labeled / denom])
    return np.concatenate([hist / denom, tail])


def _kmeans_pp_init(x: np.ndarray, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    centroids = [x[int(rng.integers(x.shape[0]))]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.array(centroids)[None]) ** 2)
                    .sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(x.shape[0]))
        else:
            idx = int(rng.choice(x.shape[0], p=d2 / total))
        centroids.append(x[idx])
    return np.array(centroids)


def kmeans(x: np.ndarray, k: int, seed: int,
           max_iter: int = 100) -> tuple[np.ndarray, np.ndarray, float]:
    """Seeded k-means++ with Lloyd iterations; deterministic tie-breaks."""
    if k < 1 or k > x.shape[0]:
        raise ShapeMismatch(f"k={k} out of range for {x.shape[0]} points")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(x, k, rng)
    for _ in range(max_iter):
        d = ((x[:, None, :] - centroids[None]) ** 2).sum(-1)
        assign = d.argmin(axis=1)
        moved = centroids.copy()
        for j in range(k):
            members = x[assign == j]
            if members.shape[0]:
                moved[j] = members.mean(axis=0)
            else:  # claim the point farthest from its centroid
                moved[j] = x[int(d.min(axis=1).argmax())]
        if np.allclose(moved, centroids, atol=1e-12):
            break
        centroids = moved
    d = ((x[:, None, :] - centroids[None]) ** 2).sum(-1)
    assign = d.argmin(axis=1)
    inertia = float(d.min(axis=1).sum())
    return centroids, assign, inertia


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    feature_recipe: str
    assignments: dict[str, int]
    inertia_curve: list[tuple[int, float]] = field(default_factory=list)

    def assign(self, vec: np.ndarray) -> int:
        d = ((self.centroids - vec[None]) ** 2).sum(axis=1)
        return int(d.argmin())

    def route(self, nap: NapAst) -> int:
        return self.assign(graph_feature(nap))

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "k": self.k,
            "centroids": [[float(v) for v in row] for row in self.centroids],
            "feature_recipe": self.feature_recipe,
            "assignments": dict(sorted(self.assignments.items())),
            "inertia_curve": [[k, v] for k, v in self.inertia_curve],
        }

    @staticmethod
    def from_json(d: dict) -> "ClusterModel":
        return ClusterModel(
            k=d["k"], centroids=np.array(d["centroids"], dtype=float),
            feature_recipe=d["feature_recipe"],
            assignments={k: int(v) for k, v in d["assignments"].items()},
            inertia_curve=[(int(k), float(v)) for k, v in d["inertia_curve"]])

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_json())

    @staticmethod
    def load(path: str | Path) -> "ClusterModel":
        return ClusterModel.from_json(read_json(path))


def _pick_elbow(ks: list[int], inertias: list[float]) -> int:
    if len(ks) == 1:
        return ks[0]
    if len(ks) >= 3:
        second = [inertias[i - 1] - 2 * inertias[i] + inertias[i + 1]
                  for i in range(1, len(ks) - 1)]
        best = int(np.argmax(second))
        if second[best] > 1e-9 * max(1.0, abs(inertias[0])):
            return ks[best + 1]
    # flat curve (or only two k values): no elbow to pick
    if DEFAULT_CLUSTER_COUNT in ks:
        return DEFAULT_CLUSTER_COUNT
    return ks[0]


def cluster_graphs(corpus: list[NapAst],
                   k_range: tuple[int, ...] = DEFAULT_K_RANGE,
                   seed: int = 0) -> ClusterModel:
    """Cluster graph descriptors with seeded k-means over each k in
    `k_range`; pick k at the maximum second difference of inertia."""
    if not corpus:
        raise QuillError("empty corpus")
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1:
        raise QuillError("k_range must contain positive integers")
    if ks[-1] > len(corpus):
        raise ShapeMismatch(
            f"max k {ks[-1]} exceeds corpus size {len(corpus)}")
    x = np.vstack([graph_feature(nap) for nap in corpus])
    if np.allclose(x, x[0][None], atol=1e-12):
        raise DegenerateFeatures("all graph feature vectors are identical")

    runs = {}
    curve = []
    for k in ks:
        centroids, assign, inertia = kmeans(x, k, seed)
        runs[k] = (centroids, assign)
        curve.append((k, inertia))
    chosen = _pick_elbow(ks, [v for _, v in curve])
    centroids, assign = runs[chosen]
    assignments = {nap.class_id: int(assign[i])
                   for i, nap in enumerate(corpus)}
    return ClusterModel(k=chosen, centroids=centroids,
                        feature_recipe=FEATURE_RECIPE,
                        assignments=assignments, inertia_curve=curve)
