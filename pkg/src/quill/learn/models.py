"""Graph models: 2-layer GCN and FastGTN, plus checkpoint serialization.

GCN
    scores = log_softmax(Â · relu(dropout(Â · X · W1 + b1)) · W2 + b2)
    with Â the symmetrically normalized undirected parent-child adjacency
    plus self-loops: Â = D^(-1/2) (A + I) D^(-1/2).

FastGTN
    Candidate edge types are [identity, ParentChild, ChildParent, NameUse,
    UseName], each row-normalized. A block runs, per channel, gt_layers
    successive propagations H <- A^(c,l) H where A^(c,l) is the softmax-
    weighted sum of candidates (never materializing adjacency products),
    then mean-aggregates channels and applies one dense+relu. After
    fastgtn_layers blocks a dense+log_softmax head scores each node. This
    implicit scheme equals the explicit meta-path product applied to X.

Checkpoints are JSON: parameter tensors as little-endian float64 bytes in
base64 with explicit shapes, plus config, feature_dim, prune digest, and
format_version.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np

from ..common import FORMAT_VERSION, read_json, write_json
from ..errors import CheckpointMismatch, ShapeMismatch
from .tensor import (
    SparseMatrix, Tensor, add, dropout, log_softmax, matmul, mul, parameter,
    relu, select, softmax, spmm,
)

EDGE_CANDIDATES = ("Identity", "ParentChild", "ChildParent", "NameUse",
                   "UseName")


@dataclass(frozen=True)
class GcnConfig:
    layers: int = 2
    hidden_dim: int = 64
    dropout_rate: float = 0.5
    epochs_per_batch: int = 10
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    seed: int = 0

    def validate(self) -> None:
        if self.layers != 2:
            raise ShapeMismatch("GCN is fixed at 2 layers")
        if self.hidden_dim <= 0:
            raise ShapeMismatch("hidden_dim must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ShapeMismatch("dropout_rate must be in [0, 1)")
        if self.epochs_per_batch <= 0:
            raise ShapeMismatch("epochs_per_batch must be positive")
        if self.learning_rate <= 0:
            raise ShapeMismatch("learning_rate must be positive")

    def to_json(self) -> dict:
        return {"layers": self.layers, "hidden_dim": self.hidden_dim,
                "dropout_rate": self.dropout_rate,
                "epochs_per_batch": self.epochs_per_batch,
                "learning_rate": self.learning_rate,
                "weight_decay": self.weight_decay, "seed": self.seed}

    @staticmethod
    def from_json(d: dict) -> "GcnConfig":
        return GcnConfig(**d)


@dataclass(frozen=True)
class GtnConfig:
    gt_layers: int = 5
    fastgtn_layers: int = 2
    channels: int = 2
    channel_agg: str = "mean"
    hidden_dim: int = 64
    epochs_per_batch: int = 10
    learning_rate: float = 0.01
    non_local_weight: float = -2.0   # recorded, not used by the forward pass
    k_hop: int = 9                   # recorded, not used by the forward pass
    weight_decay: float = 5e-4
    seed: int = 0

    def validate(self) -> None:
        for name in ("gt_layers", "fastgtn_layers", "channels", "hidden_dim",
                     "epochs_per_batch"):
            if getattr(self, name) <= 0:
                raise ShapeMismatch(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ShapeMismatch("learning_rate must be positive")
        if self.channel_agg != "mean":
            raise ShapeMismatch("only mean channel aggregation is supported")

    def to_json(self) -> dict:
        return {
            "gt_layers": self.gt_layers,
            "fastgtn_layers": self.fastgtn_layers,
            "channels": self.channels,
            "channel_agg": self.channel_agg,
            "hidden_dim": self.hidden_dim,
            "epochs_per_batch": self.epochs_per_batch,
            "learning_rate": self.learning_rate,
            "non_local_weight": self.non_local_weight,
            "k_hop": self.k_hop,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(d: dict) -> "GtnConfig":
        return GtnConfig(**d)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# --------------------------------------------------------------------------
# adjacency builders


def gcn_adjacency(edges, n: int) -> SparseMatrix:
    """Symmetrically normalized undirected adjacency with self-loops."""
    pairs = {(i, i) for i in range(n)}
    for s, d in edges:
        pairs.add((s, d))
        pairs.add((d, s))
    ordered = sorted(pairs)
    a = SparseMatrix.from_edges(ordered, n, n)
    deg = np.asarray(a.csr.sum(axis=1)).ravel()
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg),
                         where=deg > 0)
    from scipy import sparse as sp
    norm = sp.diags(inv_sqrt) @ a.csr @ sp.diags(inv_sqrt)
    return SparseMatrix(norm)


def candidate_adjacencies(edge_sets: dict, n: int) -> list[SparseMatrix]:
    """Row-normalized [I, ParentChild, ChildParent, NameUse, UseName]."""
    mats = [SparseMatrix.from_edges([(i, i) for i in range(n)], n, n)]
    for kind in EDGE_CANDIDATES[1:]:
        mats.append(SparseMatrix.from_edges(
            edge_sets.get(kind, []), n, n).row_normalized())
    return mats


# --------------------------------------------------------------------------
# GCN


class Gcn:
    kind = "GCN"

    def __init__(self, cfg: GcnConfig, feature_dim: int):
        cfg.validate()
        self.cfg = cfg
        self.feature_dim = feature_dim
        rng = np.random.default_rng(cfg.seed)
        h = cfg.hidden_dim
        self.w1 = parameter(_glorot(rng, feature_dim, h))
        self.b1 = parameter(np.zeros(h))
        self.w2 = parameter(_glorot(rng, h, 2))
        self.b2 = parameter(np.zeros(2))

    def parameters(self) -> dict[str, Tensor]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def forward(self, x: Tensor, a_hat: SparseMatrix, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        if x.data.shape[1] != self.feature_dim:
            raise ShapeMismatch(
                f"feature dim {x.data.shape[1]} != model {self.feature_dim}")
        h1 = add(spmm(a_hat, matmul(x, self.w1)), self.b1)
        if training and self.cfg.dropout_rate > 0.0:
            if rng is None:
                raise ShapeMismatch("training forward needs an rng for dropout")
            h1 = dropout(h1, self.cfg.dropout_rate, rng)
        h = relu(h1)
        return log_softmax(add(spmm(a_hat, matmul(h, self.w2)), self.b2))


# --------------------------------------------------------------------------
# GT layer and FastGTN


def gt_layer_adjacency(mats: list[SparseMatrix], weights: Tensor) -> np.ndarray:
    """Explicit combined adjacency Σ_t softmax(w)_t A_t as a dense array.

    Test/oracle path; the model itself never materializes this.
    """
    if weights.data.ndim != 1 or weights.data.shape[0] != len(mats):
        raise ShapeMismatch("one weight per candidate adjacency required")
    s = softmax(weights).data
    n, m = mats[0].shape
    out = np.zeros((n, m))
    for t, mat in enumerate(mats):
        if mat.shape != (n, m):
            raise ShapeMismatch("candidate adjacency shapes differ")
        out += s[t] * mat.to_dense()
    return out


def _propagate(mats: list[SparseMatrix], weights: Tensor,
               x: Tensor) -> Tensor:
    """One implicit propagation: (Σ_t softmax(w)_t A_t) @ x without forming
    the combined matrix."""
    s = softmax(weights)
    out = None
    for t, mat in enumerate(mats):
        term = mul(select(s, t), spmm(mat, x))
        out = term if out is None else add(out, term)
    return out


class FastGtn:
    kind = "FastGTN"

    def __init__(self, cfg: GtnConfig, feature_dim: int):
        cfg.validate()
        self.cfg = cfg
        self.feature_dim = feature_dim
        rng = np.random.default_rng(cfg.seed)
        h = cfg.hidden_dim
        t = len(EDGE_CANDIDATES)
        self.gt_weights: list[list[list[Tensor]]] = []
        for b in range(cfg.fastgtn_layers):
            per_block = []
            for c in range(cfg.channels):
                per_block.append([
                    parameter(rng.normal(0.0, 0.1, size=t))
                    for _ in range(cfg.gt_layers)])
            self.gt_weights.append(per_block)
        self.dense_w: list[Tensor] = []
        self.dense_b: list[Tensor] = []
        dim = feature_dim
        for b in range(cfg.fastgtn_layers):
            self.dense_w.append(parameter(_glorot(rng, dim, h)))
            self.dense_b.append(parameter(np.zeros(h)))
            dim = h
        self.head_w = parameter(_glorot(rng, dim, 2))
        self.head_b = parameter(np.zeros(2))

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for b, per_block in enumerate(self.gt_weights):
            for c, per_channel in enumerate(per_block):
                for l, w in enumerate(per_channel):
                    out[f"gt.{b}.{c}.{l}"] = w
        for b, (w, bias) in enumerate(zip(self.dense_w, self.dense_b)):
            out[f"dense.{b}.w"] = w
            out[f"dense.{b}.b"] = bias
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    def forward(self, x: Tensor, mats: list[SparseMatrix],
                training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        if x.data.shape[1] != self.feature_dim:
            raise ShapeMismatch(
                f"feature dim {x.data.shape[1]} != model {self.feature_dim}")
        if len(mats) != len(EDGE_CANDIDATES):
            raise ShapeMismatch(
                f"expected {len(EDGE_CANDIDATES)} candidate adjacencies")
        h = x
        inv_channels = 1.0 / self.cfg.channels
        for b in range(self.cfg.fastgtn_layers):
            agg = None
            for c in range(self.cfg.channels):
                hc = h
                for l in range(self.cfg.gt_layers):
                    hc = _propagate(mats, self.gt_weights[b][c][l], hc)
                agg = hc if agg is None else add(agg, hc)
            mean_h = mul(agg, Tensor(inv_channels))
            h = relu(add(matmul(mean_h, self.dense_w[b]), self.dense_b[b]))
        return log_softmax(add(matmul(h, self.head_w), self.head_b))

    def explicit_forward(self, x: Tensor,
                         mats: list[SparseMatrix]) -> Tensor:
        """Reference path: materialize per-channel meta-path products
        Π_l A^(c,l) densely, then apply to x. Must match forward()."""
        h = x
        inv_channels = 1.0 / self.cfg.channels
        for b in range(self.cfg.fastgtn_layers):
            agg = None
            for c in range(self.cfg.channels):
                n = h.data.shape[0]
                product = np.eye(n)
                for l in range(self.cfg.gt_layers):
                    combined = gt_layer_adjacency(
                        mats, self.gt_weights[b][c][l])
                    product = combined @ product
                hc = Tensor(product @ h.data)
                agg = hc if agg is None else add(agg, hc)
            mean_h = mul(agg, Tensor(inv_channels))
            h = relu(add(matmul(mean_h, self.dense_w[b]), self.dense_b[b]))
        return log_softmax(add(matmul(h, self.head_w), self.head_b))


# --------------------------------------------------------------------------
# checkpoints


def _encode_array(a: np.ndarray) -> dict:
    data = np.ascontiguousarray(a, dtype=np.float64)
    return {"shape": list(data.shape), "dtype": "float64",
            "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    a = np.frombuffer(raw, dtype=np.float64).copy()
    return a.reshape(d["shape"])


@dataclass
class ModelCheckpoint:
    kind: str
    config: dict
    tensors: dict[str, np.ndarray]
    feature_dim: int
    prune_config_digest: str = ""
    cluster_id: int | None = None

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config,
            "tensors": {k: _encode_array(v)
                        for k, v in sorted(self.tensors.items())},
            "feature_dim": self.feature_dim,
            "prune_config_digest": self.prune_config_digest,
            "cluster_id": self.cluster_id,
        }

    @staticmethod
    def from_json(d: dict) -> "ModelCheckpoint":
        return ModelCheckpoint(
            kind=d["kind"], config=d["config"],
            tensors={k: _decode_array(v) for k, v in d["tensors"].items()},
            feature_dim=d["feature_dim"],
            prune_config_digest=d.get("prune_config_digest", ""),
            cluster_id=d.get("cluster_id"))

    def save(self, path) -> None:
        write_json(path, self.to_json())

    @staticmethod
    def load(path) -> "ModelCheckpoint":
        return ModelCheckpoint.from_json(read_json(path))


def checkpoint_of(model, prune_digest: str = "",
                  cluster_id: int | None = None) -> ModelCheckpoint:
    tensors = {k: v.data.copy() for k, v in model.parameters().items()}
    return ModelCheckpoint(model.kind, model.cfg.to_json(), tensors,
                           model.feature_dim, prune_digest, cluster_id)


def model_from_checkpoint(ckpt: ModelCheckpoint):
    if ckpt.kind == "GCN":
        model = Gcn(GcnConfig.from_json(ckpt.config), ckpt.feature_dim)
    elif ckpt.kind == "FastGTN":
        model = FastGtn(GtnConfig.from_json(ckpt.config), ckpt.feature_dim)
    else:
        raise CheckpointMismatch(f"unknown checkpoint kind '{ckpt.kind}'")
    params = model.parameters()
    if set(params) != set(ckpt.tensors):
        raise CheckpointMismatch("checkpoint tensor names do not match model")
    for name, tensor in params.items():
        stored = ckpt.tensors[name]
        if stored.shape != tensor.data.shape:
            raise CheckpointMismatch(
                f"tensor '{name}' shape {stored.shape} != "
                f"model {tensor.data.shape}")
        tensor.data = stored.astype(np.float64).copy()
    return model
