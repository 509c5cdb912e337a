"""Training protocol: hash-stable splits, balanced batches, Adam.

Nullable nodes are split 60/20/20 by a class-stable hash, so the same
corpus + seed always yields the same membership without storing index
lists. Train and validation sets are balanced by pairing every Nullable
node with one unused NotNullable node from the same class (falling back to
a global pool when a class runs out); the test set keeps every remaining
eligible node. Batches pack whole classes up to the node cap and each
batch is trained for a fixed number of epochs with AdamW-style decoupled
weight decay.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from ..encoding import NapAst
from ..errors import CapExceeded, EmptySplit, ShapeMismatch
from .models import (
    FastGtn, Gcn, ModelCheckpoint, candidate_adjacencies, checkpoint_of,
    gcn_adjacency, model_from_checkpoint,
)
from .tensor import Tensor, nll_loss

NODE_CAP = 8000
CLASS_OF = {"NotNullable": 0, "Nullable": 1}


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def validate(self) -> None:
        if len(self.fractions) != 3 or abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ShapeMismatch("split fractions must sum to 1")


@dataclass
class LabeledNode:
    class_id: str
    node_id: int
    sig: str
    y: int  # 1 Nullable, 0 NotNullable


@dataclass
class Splits:
    train: list[LabeledNode]
    val: list[LabeledNode]
    test: list[LabeledNode]

    def to_json(self) -> dict:
        def rows(part):
            return [{"class_id": n.class_id, "node": n.node_id,
                     "sig": n.sig, "y": n.y} for n in part]
        return {"train": rows(self.train), "val": rows(self.val),
                "test": rows(self.test)}


def _site_nodes(nap: NapAst) -> tuple[list[LabeledNode], list[LabeledNode]]:
    pos, neg = [], []
    for node in nap.nodes:
        lab = nap.label_vector[node.id]
        if lab == "Unlabeled":
            continue
        entry = LabeledNode(nap.class_id, node.id, node.anchor.sig or "",
                            CLASS_OF[lab])
        (pos if entry.y == 1 else neg).append(entry)
    return pos, neg


def _order_key(n: LabeledNode, seed: int) -> str:
    return hashlib.sha256(
        f"{n.class_id}|{n.sig}|{seed}".encode()).hexdigest()


def make_splits(corpus: list[NapAst], spec: SplitSpec) -> Splits:
    """Split Nullable nodes 60/20/20, then balance train/val with
    NotNullable partners; every remaining site node lands in test."""
    spec.validate()
    positives: list[LabeledNode] = []
    negatives_by_class: dict[str, list[LabeledNode]] = {}
    for nap in corpus:
        pos, neg = _site_nodes(nap)
        positives.extend(pos)
        if neg:
            negatives_by_class[nap.class_id] = neg
    if not positives:
        raise EmptySplit("corpus has no Nullable nodes")
    positives.sort(key=lambda n: (_order_key(n, spec.seed), n.class_id, n.sig))
    total = len(positives)
    n_train = int(spec.fractions[0] * total)
    n_val = int(spec.fractions[1] * total)
    train_pos = positives[:n_train]
    val_pos = positives[n_train:n_train + n_val]
    test_pos = positives[n_train + n_val:]
    if not train_pos or not val_pos or not test_pos:
        raise EmptySplit(
            f"{total} Nullable nodes cannot fill a "
            f"{'/'.join(str(f) for f in spec.fractions)} split")

    rng = np.random.default_rng(spec.seed)
    used: set[tuple[str, int]] = set()
    global_pool = sorted(
        (n for lst in negatives_by_class.values() for n in lst),
        key=lambda n: (n.class_id, n.node_id))

    def take_partner(class_id: str) -> LabeledNode | None:
        local = [n for n in negatives_by_class.get(class_id, [])
                 if (n.class_id, n.node_id) not in used]
        pool = local or [n for n in global_pool
                         if (n.class_id, n.node_id) not in used]
        if not pool:
            return None
        pick = pool[int(rng.integers(len(pool)))]
        used.add((pick.class_id, pick.node_id))
        return pick

    def balance(part: list[LabeledNode]) -> list[LabeledNode]:
        out = list(part)
        for p in part:
            partner = take_partner(p.class_id)
            if partner is not None:
                out.append(partner)
        return out

    train = balance(train_pos)
    val = balance(val_pos)
    test = list(test_pos) + [n for n in global_pool
                             if (n.class_id, n.node_id) not in used]
    return Splits(train, val, test)


# --------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    class_ids: list[str]
    features: np.ndarray
    edge_sets: dict[str, list[tuple[int, int]]]
    rows: np.ndarray      # node rows with training labels (offset-adjusted)
    targets: np.ndarray   # 0/1 per row
    node_count: int


def pack_batches(corpus: list[NapAst], members: list[LabeledNode],
                 cap: int = NODE_CAP) -> list[Batch]:
    """Pack whole classes holding split members into ≤cap-node batches."""
    by_class: dict[str, list[LabeledNode]] = {}
    for m in members:
        by_class.setdefault(m.class_id, []).append(m)
    naps = {nap.class_id: nap for nap in corpus}
    batches: list[Batch] = []
    current: list[str] = []
    size = 0
    for class_id in sorted(by_class):
        nap = naps[class_id]
        n = nap.node_count()
        if n > cap:
            raise CapExceeded(f"{class_id}: {n} nodes exceeds cap {cap}")
        if current and size + n > cap:
            batches.append(_build_batch(current, naps, by_class))
            current, size = [], 0
        current.append(class_id)
        size += n
    if current:
        batches.append(_build_batch(current, naps, by_class))
    return batches


def _build_batch(class_ids, naps, by_class) -> Batch:
    feats = []
    edge_sets: dict[str, list[tuple[int, int]]] = {}
    rows, targets = [], []
    offset = 0
    for class_id in class_ids:
        nap = naps[class_id]
        feats.append(nap.features.astype(np.float64))
        for kind, edges in nap.edge_sets.items():
            out = edge_sets.setdefault(kind, [])
            out.extend((s + offset, d + offset) for s, d in edges)
        for m in by_class[class_id]:
            rows.append(m.node_id + offset)
            targets.append(m.y)
        offset += nap.node_count()
    return Batch(list(class_ids), np.vstack(feats), edge_sets,
                 np.array(rows, dtype=np.int64),
                 np.array(targets, dtype=np.int64), offset)


# --------------------------------------------------------------------------
# optimizer


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float = 0.01,
                 weight_decay: float = 0.0, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * (
                m_hat / (np.sqrt(v_hat) + self.eps)
                + self.weight_decay * p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


# --------------------------------------------------------------------------
# scoring and F1


def score_arrays(model, features: np.ndarray,
                 edge_sets: dict[str, list[tuple[int, int]]],
                 n: int) -> np.ndarray:
    """Per-node log-probability pairs, inference mode."""
    x = Tensor(features.astype(np.float64))
    if model.kind == "GCN":
        a = gcn_adjacency(edge_sets.get("ParentChild", []), n)
        return model.forward(x, a, training=False).data
    mats = candidate_adjacencies(edge_sets, n)
    return model.forward(x, mats, training=False).data


def score_nap(model, nap: NapAst) -> np.ndarray:
    return score_arrays(model, nap.features, nap.edge_sets, nap.node_count())


def f1_score(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def evaluate_nodes(model, corpus: list[NapAst],
                   members: list[LabeledNode]) -> dict:
    by_class: dict[str, list[LabeledNode]] = {}
    for m in members:
        by_class.setdefault(m.class_id, []).append(m)
    naps = {nap.class_id: nap for nap in corpus}
    tp = fp = fn = tn = 0
    for class_id in sorted(by_class):
        scores = score_nap(model, naps[class_id])
        for m in by_class[class_id]:
            pred = int(scores[m.node_id].argmax())
            if pred == 1 and m.y == 1:
                tp += 1
            elif pred == 1 and m.y == 0:
                fp += 1
            elif pred == 0 and m.y == 1:
                fn += 1
            else:
                tn += 1
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn,
            "f1": f1_score(tp, fp, fn)}


# --------------------------------------------------------------------------
# train loop


@dataclass
class TrainReport:
    model_kind: str
    losses: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    best_val_f1: float = 0.0
    test_f1: float = 0.0
    test_counts: dict = field(default_factory=dict)
    batches: list[dict] = field(default_factory=list)
    split_sizes: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "losses": self.losses,
            "val_f1": self.val_f1,
            "best_val_f1": self.best_val_f1,
            "test_f1": self.test_f1,
            "test_counts": self.test_counts,
            "batches": self.batches,
            "split_sizes": self.split_sizes,
            "timings": self.timings,
        }


def _batch_forward(model, batch: Batch, training: bool,
                   rng: np.random.Generator) -> Tensor:
    x = Tensor(batch.features)
    if model.kind == "GCN":
        a = gcn_adjacency(batch.edge_sets.get("ParentChild", []),
                          batch.node_count)
        return model.forward(x, a, training=training, rng=rng)
    mats = candidate_adjacencies(batch.edge_sets, batch.node_count)
    return model.forward(x, mats, training=training, rng=rng)


def train(corpus: list[NapAst], split: SplitSpec, cfg,
          cap: int = NODE_CAP, rounds: int = 1
          ) -> tuple[ModelCheckpoint, TrainReport]:
    """Train a GCN (GcnConfig) or FastGTN (GtnConfig) on the corpus."""
    started = time.monotonic()
    if not corpus:
        raise EmptySplit("empty corpus")
    feature_dim = corpus[0].features.shape[1]
    for nap in corpus:
        if nap.node_count() > cap:
            raise CapExceeded(
                f"{nap.class_id}: {nap.node_count()} nodes exceeds cap {cap}")

    from .models import GcnConfig  # local import keeps module load light
    if isinstance(cfg, GcnConfig):
        model = Gcn(cfg, feature_dim)
    else:
        model = FastGtn(cfg, feature_dim)

    splits = make_splits(corpus, split)
    batches = pack_batches(corpus, splits.train, cap)
    lr = getattr(cfg, "learning_rate", 0.01)
    wd = getattr(cfg, "weight_decay", 5e-4)
    epochs = getattr(cfg, "epochs_per_batch", 10)
    opt = Adam(model.parameters(), lr=lr, weight_decay=wd)
    rng = np.random.default_rng(cfg.seed + 1)

    prune_digest = corpus[0].prune_digest
    report = TrainReport(model_kind=model.kind)
    report.split_sizes = {
        "train": len(splits.train), "val": len(splits.val),
        "test": len(splits.test),
        "train_nullable": sum(1 for m in splits.train if m.y == 1),
        "val_nullable": sum(1 for m in splits.val if m.y == 1),
        "test_nullable": sum(1 for m in splits.test if m.y == 1),
    }
    report.batches = [{"classes": b.class_ids, "nodes": b.node_count,
                       "labeled": int(len(b.rows))} for b in batches]

    best = checkpoint_of(model, prune_digest)
    best_f1 = -1.0
    for _ in range(rounds):
        for batch in batches:
            for _ in range(epochs):
                opt.zero_grad()
                scores = _batch_forward(model, batch, True, rng)
                loss = nll_loss(scores, batch.rows, batch.targets)
                loss.backward()
                opt.step()
                report.losses.append(loss.item())
            val = evaluate_nodes(model, corpus, splits.val)
            report.val_f1.append(val["f1"])
            if val["f1"] > best_f1:
                best_f1 = val["f1"]
                best = checkpoint_of(model, prune_digest)
    report.best_val_f1 = max(best_f1, 0.0)

    final_model = model_from_checkpoint(best)
    test = evaluate_nodes(final_model, corpus, splits.test)
    report.test_f1 = test["f1"]
    report.test_counts = test
    report.timings = {"train_seconds": time.monotonic() - started}
    return best, report
