"""Numerical core: autodiff tensors, graph models, training protocol."""

from .models import (
    EDGE_CANDIDATES, FastGtn, Gcn, GcnConfig, GtnConfig, ModelCheckpoint,
    candidate_adjacencies, checkpoint_of, gcn_adjacency, gt_layer_adjacency,
    model_from_checkpoint,
)
from .tensor import (
    SparseMatrix, Tensor, add, dropout, gather_pairs, gradcheck, log_softmax,
    matmul, mul, neg, nll_loss, parameter, relu, select, softmax, spmm, sub,
    tmean, tsum,
)
from .training import (
    Adam, SplitSpec, Splits, TrainReport, evaluate_nodes, f1_score,
    make_splits, pack_batches, score_arrays, score_nap, train,
)

__all__ = [
    "EDGE_CANDIDATES", "FastGtn", "Gcn", "GcnConfig", "GtnConfig",
    "ModelCheckpoint", "candidate_adjacencies", "checkpoint_of",
    "gcn_adjacency", "gt_layer_adjacency", "model_from_checkpoint",
    "SparseMatrix", "Tensor", "add", "dropout", "gather_pairs", "gradcheck",
    "log_softmax", "matmul", "mul", "neg", "nll_loss", "parameter", "relu",
    "select", "softmax", "spmm", "sub", "tmean", "tsum",
    "Adam", "SplitSpec", "Splits", "TrainReport", "evaluate_nodes",
    "f1_score", "make_splits", "pack_batches", "score_arrays",
    "score_nap", "train",
]
