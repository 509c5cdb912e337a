"""Minimal reverse-mode autodiff over numpy, plus sparse matrix products.

Tensor wraps a float64 ndarray and records parents + a backward closure;
backward() runs the tape in reverse topological order. Every op validates
output finiteness (NonFiniteValue names the op) and backward validates
gradient finiteness (NonFiniteGradient). Sparse adjacencies are constants
(scipy CSR, sorted and deduplicated); gradients flow through spmm to the
dense operand only.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse as sp

from ..errors import NonFiniteGradient, NonFiniteValue, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward",
                 "_op")

    def __init__(self, data, requires_grad: bool = False, _parents=(),
                 _backward=None, _op: str = "leaf"):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"non-finite values entering op '{_op}'")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad or any(
            p.requires_grad for p in _parents)
        self._parents = tuple(_parents)
        self._backward = _backward
        self._op = _op

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeMismatch("backward() requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in t._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is None or t.grad is None:
                continue
            if not t.requires_grad:
                continue
            t._backward(t.grad)
            for p in t._parents:
                if p.requires_grad and p.grad is not None:
                    if not np.all(np.isfinite(p.grad)):
                        raise NonFiniteGradient(
                            f"non-finite gradient from op '{t._op}'")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, _parents=(a, b), _op="add")

    def back(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    out._backward = back
    return out


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data, _parents=(a,), _op="neg")
    out._backward = lambda g: _accumulate(a, -g)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, _parents=(a, b), _op="mul")

    def back(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    out._backward = back
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(
            f"matmul shapes {a.data.shape} x {b.data.shape}")
    out = Tensor(a.data @ b.data, _parents=(a, b), _op="matmul")

    def back(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    out._backward = back
    return out


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), _parents=(a,), _op="relu")
    out._backward = lambda g: _accumulate(a, g * (a.data > 0.0))
    return out


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0. The mask is drawn once at
    call time, so a re-seeded rng reproduces the same mask."""
    a = as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise ShapeMismatch(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return a
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(a.data * mask, _parents=(a,), _op="dropout")
    out._backward = lambda g: _accumulate(a, g * mask)
    return out


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, _parents=(a,), _op="softmax")

    def back(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        _accumulate(a, s * (g - dot))

    out._backward = back
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    lse = m + np.log(np.exp(a.data - m).sum(axis=axis, keepdims=True))
    y = a.data - lse
    out = Tensor(y, _parents=(a,), _op="log_softmax")

    def back(g):
        soft = np.exp(y)
        _accumulate(a, g - soft * g.sum(axis=axis, keepdims=True))

    out._backward = back
    return out


def tsum(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(), _parents=(a,), _op="sum")
    out._backward = lambda g: _accumulate(a, np.full_like(a.data, float(g)))
    return out


def tmean(a: Tensor) -> Tensor:
    a = as_tensor(a)
    n = a.data.size
    out = Tensor(a.data.mean(), _parents=(a,), _op="mean")
    out._backward = lambda g: _accumulate(
        a, np.full_like(a.data, float(g) / n))
    return out


def select(a: Tensor, index: int) -> Tensor:
    """One element of a 1-D tensor, as a scalar tensor."""
    a = as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeMismatch(f"select expects 1-D, got {a.data.shape}")
    out = Tensor(a.data[index], _parents=(a,), _op="select")

    def back(g):
        buf = np.zeros_like(a.data)
        buf[index] = float(g)
        _accumulate(a, buf)

    out._backward = back
    return out


def gather_pairs(a: Tensor, rows, cols) -> Tensor:
    """a[rows[i], cols[i]] as a 1-D tensor (for per-node NLL terms)."""
    a = as_tensor(a)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if a.data.ndim != 2 or rows.shape != cols.shape:
        raise ShapeMismatch("gather_pairs expects 2-D input, equal index shapes")
    out = Tensor(a.data[rows, cols], _parents=(a,), _op="gather_pairs")

    def back(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, (rows, cols), g)
        _accumulate(a, buf)

    out._backward = back
    return out


class SparseMatrix:
    """Constant n×m sparse matrix (CSR). No gradient flows into it."""

    def __init__(self, csr: sp.csr_matrix):
        csr = csr.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise NonFiniteValue("non-finite values in sparse matrix")
        self.csr = csr

    @property
    def shape(self):
        return self.csr.shape

    @staticmethod
    def from_edges(edges, n_rows: int, n_cols: int,
                   values=None) -> "SparseMatrix":
        """Build from [(src, dst), ...]; entry (src, dst) = value."""
        if len(edges) == 0:
            return SparseMatrix(sp.csr_matrix((n_rows, n_cols)))
        rows = np.array([e[0] for e in edges], dtype=np.int64)
        cols = np.array([e[1] for e in edges], dtype=np.int64)
        vals = (np.ones(len(edges)) if values is None
                else np.asarray(values, dtype=np.float64))
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))
        return SparseMatrix(coo.tocsr())

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def row_normalized(self) -> "SparseMatrix":
        deg = np.asarray(self.csr.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        return SparseMatrix(sp.diags(inv) @ self.csr)


def spmm(a: SparseMatrix, b: Tensor) -> Tensor:
    b = as_tensor(b)
    if b.data.ndim != 2 or a.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"spmm shapes {a.shape} x {b.data.shape}")
    out = Tensor(a.csr @ b.data, _parents=(b,), _op="spmm")
    out._backward = lambda g: _accumulate(b, a.csr.T @ g)
    return out


def nll_loss(log_probs: Tensor, rows, targets) -> Tensor:
    """Mean negative log-likelihood of `targets` at `rows`."""
    picked = gather_pairs(log_probs, rows, targets)
    return neg(tmean(picked))


def gradcheck(f, params: list[Tensor], rtol: float = 1e-4,
              atol: float = 1e-6, eps: float = 1e-6) -> bool:
    """Central finite differences vs autodiff for scalar-valued f(params).

    f must be deterministic across calls (re-seed any rng inside it).
    """
    for p in params:
        p.zero_grad()
    loss = f()
    loss.backward()
    grads = [None if p.grad is None else p.grad.copy() for p in params]
    for p, g in zip(params, grads):
        analytic = np.zeros_like(p.data) if g is None else g
        flat = p.data.ravel()
        num = np.zeros_like(flat)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = f().item()
            flat[i] = keep - eps
            down = f().item()
            flat[i] = keep
            num[i] = (up - down) / (2.0 * eps)
        if not np.allclose(analytic.ravel(), num, rtol=rtol, atol=atol):
            return False
    return True
