"""Project-level qualifier decisions.

Scores every annotation site, pairing classes that share symbols so the
model sees cross-class uses (each pair's graphs are united and their name
layers bridged), averages per-site probabilities across pairs, thresholds,
and then repairs obvious inconsistencies with four post-processing rules
run to a fixpoint.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .common import FORMAT_VERSION, read_json, write_json
from .encoding import NapAst
from .errors import (
    CapExceeded, CheckpointMismatch, MissingModel, NonTermination, QuillError,
)
from .graphs import TAG_CATCH_PARAM, TAG_UNTYPED_LAMBDA
from .learn import ModelCheckpoint, model_from_checkpoint, score_arrays
from .tune import ClusterModel

DEFAULT_THRESHOLD = 0.9
DEFAULT_PAIR_CAP = 500

RULE_FIELD_RETURN = "R1:field-return"
RULE_ARGUMENT = "R2:argument-parameter"
RULE_ILLEGAL = "R3:illegal-position"
RULE_INHERITANCE = "R4:inheritance"
_REMOVAL_RULES = (RULE_ILLEGAL, RULE_INHERITANCE)


# --------------------------------------------------------------------------
# project symbol index


@dataclass(frozen=True)
class SymbolLink:
    """A resolved cross-class reference: some node in the consuming class
    depends on a declaration in the producing class."""
    producer: str            # decl signature (or fq type) being referenced
    producer_class: str
    producer_node: int       # NameNode id in the producer graph, -1 if none
    consumer_class: str
    consumer_node: int       # anchor node id in the consumer graph
    kind: str                # FieldUse | MethodCall | Override | ArgumentOf


@dataclass
class ProjectIndex:
    """Cross-class symbol tables assembled from per-class parse facts."""
    types: dict[str, dict]            # fq type name -> type fact record
    type_class: dict[str, str]        # fq type name -> declaring class_id
    class_types: dict[str, list]      # class_id -> fq types it declares
    simple_to_fq: dict[str, str]      # simple name -> fq (sorted-first wins)
    sites: dict[str, tuple[str, int]]  # decl signature -> (class_id, node id)
    site_tags: dict[str, frozenset]   # decl signature -> node tags
    declared_names: dict[str, set]    # class_id -> identifiers it declares
    name_layer: dict[str, dict]       # class_id -> name -> NameNode id
    name_uses: dict[str, dict]        # class_id -> name -> use node ids

    @staticmethod
    def build(project: list[NapAst]) -> "ProjectIndex":
        types: dict[str, dict] = {}
        type_class: dict[str, str] = {}
        class_types: dict[str, list] = {}
        sites: dict[str, tuple[str, int]] = {}
        site_tags: dict[str, frozenset] = {}
        declared: dict[str, set] = {}
        layer: dict[str, dict] = {}
        uses: dict[str, dict] = {}
        for nap in project:
            names: set[str] = set()
            class_types[nap.class_id] = []
            for fq, rec in (nap.facts.get("types") or {}).items():
                if fq not in types:
                    types[fq] = rec
                    type_class[fq] = nap.class_id
                    class_types[nap.class_id].append(fq)
                names.add(rec.get("simple", ""))
                names.update(rec.get("fields", {}))
                names.update(m["name"] for m in rec.get("methods", []))
            declared[nap.class_id] = {n for n in names if n}

            node_names: dict[int, str] = {}
            by_name: dict[str, int] = {}
            for node in nap.nodes:
                if node.kind == "NameNode" and node.name:
                    by_name[node.name] = node.id
                    node_names[node.id] = node.name
            layer[nap.class_id] = by_name
            use_map: dict[str, list[int]] = {}
            for nn, use in nap.edge_sets.get("NameUse", []):
                name = node_names.get(nn)
                if name is not None:
                    use_map.setdefault(name, []).append(use)
            uses[nap.class_id] = use_map

            for node in nap.nodes:
                sig = node.anchor.sig
                if sig and nap.label_vector[node.id] != "Unlabeled":
                    sites.setdefault(sig, (nap.class_id, node.id))
                    site_tags.setdefault(sig, node.tags)
        simple = {}
        for fq in sorted(types):
            simple.setdefault(types[fq].get("simple", ""), fq)
        simple.pop("", None)
        return ProjectIndex(types, type_class, class_types, simple, sites,
                            site_tags, declared, layer, uses)

    def shared_symbols(self, a: str, b: str) -> set[str]:
        """Names declared in one class and present in the other's name layer."""
        return ((self.declared_names.get(a, set())
                 & set(self.name_layer.get(b, {})))
                | (self.declared_names.get(b, set())
                   & set(self.name_layer.get(a, {}))))

    def _consumes(self, consumer: str, producer: str) -> list[SymbolLink]:
        """Links from the consumer class's declarations into the producer's."""
        out: list[SymbolLink] = []
        player = self.name_layer.get(producer, {})
        clayer = self.name_layer.get(consumer, {})
        prod_simples = {self.types[fq].get("simple", ""): fq
                        for fq in self.class_types.get(producer, [])}
        prod_simples.pop("", None)

        def panchor(name: str, fq: str) -> int:
            node = player.get(name)
            if node is None:
                node = player.get(self.types[fq].get("simple", ""))
            return -1 if node is None else node

        for cfq in self.class_types.get(consumer, []):
            rec = self.types[cfq]
            cls_node = clayer.get(rec.get("simple", ""))
            for fname in sorted(rec.get("fields", {})):
                f = rec["fields"][fname]
                pfq = prod_simples.get(f.get("type", ""))
                if pfq is None:
                    continue
                node = clayer.get(fname, cls_node)
                if node is not None:
                    out.append(SymbolLink(pfq, producer, panchor("", pfq),
                                          consumer, node, "FieldUse"))
            for call in rec.get("calls", []):
                pfq = prod_simples.get(call.get("receiver", ""))
                if pfq is None:
                    continue
                m = self.find_method(pfq, call["name"], call["arity"])
                if m is None:
                    continue
                if cls_node is not None:
                    out.append(SymbolLink(
                        m["sig"], producer, panchor(m["name"], pfq),
                        consumer, cls_node, "MethodCall"))
                for ordinal, fname in sorted(call.get("arg_fields",
                                                      {}).items()):
                    i = int(ordinal)
                    if i >= len(m["param_sigs"]):
                        continue
                    node = clayer.get(fname, cls_node)
                    if node is not None:
                        out.append(SymbolLink(
                            m["param_sigs"][i], producer,
                            panchor(m["name"], pfq),
                            consumer, node, "ArgumentOf"))
            for sup_simple in rec.get("supertypes", []):
                pfq = prod_simples.get(sup_simple)
                if pfq is None:
                    continue
                for sm in self.types[pfq].get("methods", []):
                    for tm in rec.get("methods", []):
                        if (tm["name"] != sm["name"]
                                or tm["arity"] != sm["arity"]
                                or tm["param_types"] != sm["param_types"]):
                            continue
                        node = clayer.get(tm["name"], cls_node)
                        if node is not None:
                            out.append(SymbolLink(
                                sm["sig"], producer,
                                panchor(sm["name"], pfq),
                                consumer, node, "Override"))
        return out

    def pair_links(self, a: str, b: str) -> tuple[set, list]:
        """Lexically shared names plus resolved cross-references, both ways."""
        lexical = self.shared_symbols(a, b)
        links = self._consumes(a, b) + self._consumes(b, a)
        return lexical, links

    def resolve_type(self, simple_name: str) -> str | None:
        return self.simple_to_fq.get(simple_name)

    def find_method(self, type_fq: str, name: str,
                    arity: int) -> dict | None:
        """Look up a method by name/arity in a type or its supertypes."""
        seen = set()
        queue = [type_fq]
        while queue:
            fq = queue.pop(0)
            if fq in seen:
                continue
            seen.add(fq)
            rec = self.types.get(fq)
            if rec is None:
                continue
            for m in rec.get("methods", []):
                if m["name"] == name and m["arity"] == arity:
                    return m
            for sup in rec.get("supertypes", []):
                sup_fq = self.resolve_type(sup)
                if sup_fq:
                    queue.append(sup_fq)
        return None

    def overrides(self) -> list[tuple[dict, dict]]:
        """(supertype method, subtype method) pairs matched by name, arity,
        and parameter types."""
        out = []
        for sub_fq in sorted(self.types):
            sub = self.types[sub_fq]
            for sup_simple in sub.get("supertypes", []):
                sup_fq = self.resolve_type(sup_simple)
                sup = self.types.get(sup_fq) if sup_fq else None
                if not sup:
                    continue
                for sm in sup.get("methods", []):
                    if sm["name"] == "<init>":
                        continue
                    for tm in sub.get("methods", []):
                        if (tm["name"] == sm["name"]
                                and tm["arity"] == sm["arity"]
                                and tm["param_types"] == sm["param_types"]):
                            out.append((sm, tm))
        return out


def shared_count(lexical: set, links: list) -> int:
    """How many distinct symbols tie a pair together (ranking key)."""
    return len(lexical) + len({(ln.kind, ln.producer) for ln in links})


# --------------------------------------------------------------------------
# prediction set


@dataclass
class Prediction:
    signature: str
    probability: float
    decided: bool
    provenance: list[tuple[str, float]] = field(default_factory=list)
    rules: list[str] = field(default_factory=list)
    class_id: str = ""
    node_id: int = -1

    def to_json(self) -> dict:
        return {"signature": self.signature,
                "probability": self.probability,
                "decided": self.decided,
                "provenance": [[p, v] for p, v in self.provenance],
                "rules": list(self.rules),
                "class_id": self.class_id,
                "node_id": self.node_id}

    @staticmethod
    def from_json(d: dict) -> "Prediction":
        return Prediction(d["signature"], d["probability"], d["decided"],
                          [(p, v) for p, v in d.get("provenance", [])],
                          list(d.get("rules", [])),
                          d.get("class_id", ""), d.get("node_id", -1))


@dataclass
class PredictionSet:
    entries: dict[str, Prediction]
    threshold: float = DEFAULT_THRESHOLD
    skipped_pairs: list[str] = field(default_factory=list)

    def decided_signatures(self) -> set[str]:
        return {s for s, e in self.entries.items() if e.decided}

    def to_json(self) -> dict:
        return {"format_version": FORMAT_VERSION,
                "threshold": self.threshold,
                "entries": {s: e.to_json()
                            for s, e in sorted(self.entries.items())},
                "skipped_pairs": list(self.skipped_pairs)}

    @staticmethod
    def from_json(d: dict) -> "PredictionSet":
        entries = {s: Prediction.from_json(e)
                   for s, e in d["entries"].items()}
        return PredictionSet(entries, d["threshold"],
                             list(d.get("skipped_pairs", [])))

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_json())

    @staticmethod
    def load(path: str | Path) -> "PredictionSet":
        return PredictionSet.from_json(read_json(path))

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["signature", "probability", "decided", "rules"])
            for sig in sorted(self.entries):
                e = self.entries[sig]
                writer.writerow([sig, f"{e.probability:.6f}",
                                 str(e.decided).lower(), "+".join(e.rules)])


# --------------------------------------------------------------------------
# model routing


@dataclass
class ModelRouter:
    """Maps each graph to the checkpoint that scores it."""
    checkpoints: dict[int, ModelCheckpoint]
    cluster: ClusterModel | None = None

    @staticmethod
    def single(ckpt: ModelCheckpoint) -> "ModelRouter":
        return ModelRouter({0: ckpt}, None)

    def route_id(self, nap: NapAst) -> int:
        if self.cluster is None:
            return 0
        return self.cluster.route(nap)

    def model_for(self, nap: NapAst) -> int:
        cid = self.route_id(nap)
        ckpt = self.checkpoints.get(cid)
        if ckpt is None:
            raise MissingModel(f"no checkpoint for cluster {cid}")
        if ckpt.feature_dim != nap.features.shape[1]:
            raise CheckpointMismatch(
                f"feature_dim {ckpt.feature_dim} != {nap.features.shape[1]}")
        if (ckpt.prune_config_digest and nap.prune_digest
                and ckpt.prune_config_digest != nap.prune_digest):
            raise CheckpointMismatch(
                f"{nap.class_id}: prune digest differs from checkpoint")
        return cid


# --------------------------------------------------------------------------
# conjoined prediction


def _site_rows(nap: NapAst) -> list[tuple[int, str]]:
    return [(node.id, node.anchor.sig) for node in nap.nodes
            if node.anchor.sig
            and nap.label_vector[node.id] != "Unlabeled"]


def _join_pair(a: NapAst, b: NapAst, lexical: set[str],
               links: list[SymbolLink], index: ProjectIndex, cap: int):
    """Union of both graphs with name layers bridged at shared symbols."""
    n = a.node_count() + b.node_count()
    if n > cap:
        raise CapExceeded(f"joined graph {a.class_id}|{b.class_id}: "
                          f"{n} nodes exceeds cap {cap}")
    off = a.node_count()

    def shift(cid: str, node: int) -> int:
        return node if cid == a.class_id else node + off

    features = np.vstack([a.features, b.features])
    edge_sets = {}
    for kind in ("ParentChild", "ChildParent", "NameUse", "UseName"):
        edges = list(a.edge_sets.get(kind, []))
        edges += [(s + off, t + off) for s, t in b.edge_sets.get(kind, [])]
        edge_sets[kind] = edges

    def bridge(src: int, dst: int) -> None:
        edge_sets["NameUse"].append((src, dst))
        edge_sets["UseName"].append((dst, src))

    layer_a = index.name_layer.get(a.class_id, {})
    layer_b = index.name_layer.get(b.class_id, {})
    uses_a = index.name_uses.get(a.class_id, {})
    uses_b = index.name_uses.get(b.class_id, {})
    for name in sorted(lexical):
        na, nb = layer_a.get(name), layer_b.get(name)
        if na is not None:
            for use in uses_b.get(name, []):
                bridge(na, use + off)
        if nb is not None:
            for use in uses_a.get(name, []):
                bridge(nb + off, use)
    seen = set()
    for ln in links:
        if ln.producer_node < 0:
            continue
        edge = (shift(ln.producer_class, ln.producer_node),
                shift(ln.consumer_class, ln.consumer_node))
        if edge not in seen:
            seen.add(edge)
            bridge(*edge)
    return features, edge_sets, n, off


def conjoined_predict(project: list[NapAst], router: ModelRouter,
                      tau: float = DEFAULT_THRESHOLD,
                      pair_cap: int = DEFAULT_PAIR_CAP,
                      cap: int = 8000) -> PredictionSet:
    """Score all annotation sites; class pairs sharing symbols are scored
    jointly and each site's probability is the mean over its pair scores,
    with the solo score as fallback for unpaired sites."""
    index = ProjectIndex.build(project)
    models: dict[int, object] = {}

    def model_of(nap: NapAst):
        cid = router.model_for(nap)
        if cid not in models:
            models[cid] = model_from_checkpoint(router.checkpoints[cid])
        return models[cid]

    by_id = {nap.class_id: nap for nap in project}
    order = sorted(by_id)

    solo: dict[str, np.ndarray] = {}
    for cid in order:
        nap = by_id[cid]
        solo[cid] = np.exp(score_arrays(model_of(nap), nap.features,
                                        nap.edge_sets, nap.node_count())[:, 1])

    pairs = []
    for i, ca in enumerate(order):
        for cb in order[i + 1:]:
            lexical, links = index.pair_links(ca, cb)
            count = shared_count(lexical, links)
            if count:
                pairs.append((count, ca, cb, lexical, links))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    pairs = pairs[:pair_cap]

    pair_scores: dict[str, list[tuple[str, float]]] = {}
    skipped: list[str] = []
    for _, ca, cb, lexical, links in pairs:
        a, b = by_id[ca], by_id[cb]
        label = f"{ca}|{cb}"
        try:
            features, edge_sets, n, off = _join_pair(a, b, lexical, links,
                                                     index, cap)
        except CapExceeded:
            skipped.append(label)
            continue
        probs_by_model: dict[int, np.ndarray] = {}
        for nap, base in ((a, 0), (b, off)):
            mid = router.route_id(nap)
            if mid not in probs_by_model:
                probs_by_model[mid] = np.exp(
                    score_arrays(model_of(nap), features, edge_sets, n)[:, 1])
            probs = probs_by_model[mid]
            for node_id, sig in _site_rows(nap):
                pair_scores.setdefault(sig, []).append(
                    (label, float(probs[node_id + base])))

    entries: dict[str, Prediction] = {}
    for cid in order:
        nap = by_id[cid]
        for node_id, sig in _site_rows(nap):
            if sig in entries:
                continue
            scores = pair_scores.get(sig)
            if scores:
                prov = sorted(scores)
                p = float(np.mean([v for _, v in prov]))
            else:
                p = float(solo[cid][node_id])
                prov = [(f"solo:{cid}", p)]
            entries[sig] = Prediction(sig, p, p >= tau, prov,
                                      [], cid, node_id)
    return PredictionSet(entries, tau, skipped)


def apply_threshold(pset: PredictionSet, tau: float) -> PredictionSet:
    """decided := probability >= tau (inclusive); idempotent."""
    if not 0.0 <= tau <= 1.0:
        raise QuillError(f"tau {tau} outside [0, 1]")
    entries = {}
    for sig, e in pset.entries.items():
        entries[sig] = Prediction(e.signature, e.probability,
                                  e.probability >= tau,
                                  list(e.provenance), list(e.rules),
                                  e.class_id, e.node_id)
    return PredictionSet(entries, tau, list(pset.skipped_pairs))


# --------------------------------------------------------------------------
# post-processing rules


def _is_removed(e: Prediction) -> bool:
    return any(r in e.rules for r in _REMOVAL_RULES)


def _decide(e: Prediction, rule: str) -> bool:
    if e.decided or _is_removed(e):
        return False
    e.decided = True
    if rule not in e.rules:
        e.rules.append(rule)
    return True


def _remove(e: Prediction, rule: str) -> bool:
    if not e.decided:
        return False
    e.decided = False
    if rule not in e.rules:
        e.rules.append(rule)
    return True


def _sweep(pset: PredictionSet, index: ProjectIndex) -> bool:
    entries = pset.entries
    changed = False

    def decided(sig: str) -> bool:
        e = entries.get(sig)
        return e is not None and e.decided

    # additions first: R1 field-return, then R2 argument-to-parameter
    for fq in sorted(index.types):
        rec = index.types[fq]
        fields = rec.get("fields", {})
        for m in rec.get("methods", []):
            if not m.get("return_ref"):
                continue
            returned = [fields[f]["sig"] for f in m.get("returns_fields", [])
                        if f in fields]
            if any(decided(s) for s in returned):
                e = entries.get(m["sig"])
                if e is not None:
                    changed |= _decide(e, RULE_FIELD_RETURN)

    for fq in sorted(index.types):
        rec = index.types[fq]
        fields = rec.get("fields", {})
        for call in rec.get("calls", []):
            target_fq = index.resolve_type(call.get("receiver", ""))
            if target_fq is None:
                continue
            m = index.find_method(target_fq, call["name"], call["arity"])
            if m is None:
                continue
            for ordinal, fname in call.get("arg_fields", {}).items():
                i = int(ordinal)
                if fname not in fields or i >= len(m["param_sigs"]):
                    continue
                if not m["param_refs"][i]:
                    continue
                if decided(fields[fname]["sig"]):
                    e = entries.get(m["param_sigs"][i])
                    if e is not None:
                        changed |= _decide(e, RULE_ARGUMENT)

    # removals second: R3 illegal positions, then R4 inheritance
    for sig in sorted(entries):
        e = entries[sig]
        tags = index.site_tags.get(sig, frozenset())
        if e.decided and (TAG_UNTYPED_LAMBDA in tags
                          or TAG_CATCH_PARAM in tags):
            changed |= _remove(e, RULE_ILLEGAL)

    for sup_m, sub_m in index.overrides():
        if decided(sup_m["sig"]) and not decided(sub_m["sig"]):
            changed |= _remove(entries[sup_m["sig"]], RULE_INHERITANCE)
        for i in range(sup_m["arity"]):
            sup_p = sup_m["param_sigs"][i]
            sub_p = sub_m["param_sigs"][i]
            if decided(sup_p) and not decided(sub_p):
                changed |= _remove(entries[sup_p], RULE_INHERITANCE)
    return changed


def postprocess(pset: PredictionSet, index: ProjectIndex,
                max_sweeps: int = 10) -> PredictionSet:
    """Apply the four consistency rules to a fixpoint.

    Additions run before removals inside each sweep, and removals are
    sticky: a signature removed by R3/R4 is never re-added, which makes
    the decided set monotone and the fixpoint reachable."""
    out = PredictionSet(
        {s: Prediction(e.signature, e.probability, e.decided,
                       list(e.provenance), list(e.rules),
                       e.class_id, e.node_id)
         for s, e in pset.entries.items()},
        pset.threshold, list(pset.skipped_pairs))
    for _ in range(max_sweeps):
        if not _sweep(out, index):
            return out
    raise NonTermination(f"no fixpoint within {max_sweeps} sweeps")
