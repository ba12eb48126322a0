"""Graph storage and weight-free feature propagation.

The graph is undirected and kept in CSR form (indptr/indices over node
ids).  Self-loops are never stored; they enter only when the normalized
operator is built.  Propagation computes a weighted sum of powers

    X_tilde = sum_{l=0..k} w_l * S^l @ X

without ever materializing S^l, so the cost is k sparse-dense products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, MaskError, ShapeError

UNLABELED = -1

_SCHEMES = ("sgc", "s2gc", "gbp", "custom")


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with features, labels and split masks.

    Attributes:
        n: number of nodes.
        indptr, indices: CSR adjacency (symmetric, sorted, no self-loops,
            no duplicates).  Every stored edge appears in both directions.
        features: (n, f) float64 node features.
        labels: (n,) int64, UNLABELED (-1) marks nodes without a label.
        train_mask, test_mask: (n,) bool, disjoint.
        self_loops_dropped: count of self-loop entries dropped from the
            edge list handed to build_graph.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    self_loops_dropped: int = 0

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.features, self.labels,
                    self.train_mask, self.test_mask):
            arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return int(self.indices.size) // 2

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_classes(self) -> int:
        labeled = self.labels[self.labels != UNLABELED]
        return int(labeled.max()) + 1 if labeled.size else 0

    def degrees(self) -> np.ndarray:
        """Degree of every node, self-loops excluded."""
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        if not 0 <= u < self.n:
            raise IndexError(f"node {u} out of range for graph with n={self.n}")
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        pos = np.searchsorted(row, v)
        return pos < row.size and row[pos] == v

    def undirected_edges(self) -> np.ndarray:
        """All edges as an (m, 2) array with u < v, sorted."""
        src = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def adjacency(self) -> sp.csr_matrix:
        """0/1 adjacency as scipy CSR."""
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def train_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.train_mask)

    def test_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.test_mask)


def _as_mask(n: int, mask, name: str) -> np.ndarray:
    """Accept a bool array or an iterable of node ids; return a bool array."""
    if mask is None:
        return np.zeros(n, dtype=bool)
    arr = np.asarray(mask)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise MaskError(f"{name} boolean mask must have shape ({n},), got {arr.shape}")
        return arr.copy()
    ids = arr.astype(np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise MaskError(f"{name} contains node ids outside [0, {n})")
    out = np.zeros(n, dtype=bool)
    out[ids] = True
    return out


def build_graph(n, edges, features, labels=None, train_mask=None, test_mask=None) -> Graph:
    """Construct a validated Graph from an edge list.

    Duplicate edges are collapsed, (u, v) is mirrored to (v, u), and
    self-loops in the input are dropped (their count is recorded on the
    returned graph).

    Args:
        n: number of nodes.
        edges: iterable of (u, v) pairs, 0-indexed, or an (m, 2) array.
        features: (n, f) array, finite float values.
        labels: optional (n,) int array, -1 for unlabeled.
        train_mask, test_mask: bool arrays of length n or iterables of ids.

    Raises:
        IndexError: edge endpoint outside [0, n).
        ShapeError: feature row count differs from n.
        DataError: non-finite feature values or malformed labels.
        MaskError: train and test masks overlap.
    """
    if n < 0:
        raise ConfigError(f"node count must be nonnegative, got {n}")
    edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise IndexError(f"edge endpoint outside [0, {n})")

    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != n:
        raise ShapeError(f"features must be (n, f) with n={n}, got {features.shape}")
    if not np.isfinite(features).all():
        raise DataError("features contain non-finite values")

    loops = int(np.sum(edges[:, 0] == edges[:, 1]))
    edges = edges[edges[:, 0] != edges[:, 1]]
    # symmetrize then dedupe on an encoded key; unique also sorts rows
    both = np.vstack([edges, edges[:, ::-1]])
    keys = np.unique(both[:, 0] * np.int64(n) + both[:, 1]) if both.size else np.empty(0, np.int64)
    src, dst = keys // n, keys % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    indices = dst

    if labels is None:
        labels = np.full(n, UNLABELED, dtype=np.int64)
    else:
        labels = np.asarray(labels, dtype=np.int64).reshape(-1).copy()
        if labels.shape != (n,):
            raise ShapeError(f"labels must have shape ({n},), got {labels.shape}")
        if labels.size and labels.min() < UNLABELED:
            raise DataError("labels must be class ids or -1 for unlabeled")

    tr = _as_mask(n, train_mask, "train_mask")
    te = _as_mask(n, test_mask, "test_mask")
    if np.any(tr & te):
        raise MaskError("train and test masks overlap")

    return Graph(n=n, indptr=indptr, indices=indices, features=features,
                 labels=labels, train_mask=tr, test_mask=te,
                 self_loops_dropped=loops)


@dataclass(frozen=True)
class SparseOperator:
    """Normalized adjacency S = D^(-r) (A + I) D^(r-1), CSR-backed."""

    matrix: sp.csr_matrix
    r: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other


def normalized_adjacency(graph: Graph, r: float = 0.5) -> SparseOperator:
    """Build the propagation operator with self-loops added on the fly.

    r = 0.5 gives the symmetric normalization D^(-1/2) (A+I) D^(-1/2),
    r = 1 the row-stochastic random-walk operator D^(-1) (A+I).
    """
    if not 0.0 <= r <= 1.0:
        raise ConfigError(f"normalization exponent r must lie in [0, 1], got {r}")
    a_hat = graph.adjacency() + sp.identity(graph.n, format="csr", dtype=np.float64)
    d_hat = np.asarray(a_hat.sum(axis=1)).ravel()
    left = sp.diags(d_hat ** (-r))
    right = sp.diags(d_hat ** (r - 1.0))
    s = (left @ a_hat @ right).tocsr()
    s.sort_indices()
    return SparseOperator(matrix=s, r=float(r))


@dataclass(frozen=True)
class PropagationConfig:
    """Steps k plus the per-power weight vector w (length k + 1)."""

    k: int
    scheme: str
    weights: tuple

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"unknown propagation scheme {self.scheme!r}")
        if self.k < 0:
            raise ConfigError(f"propagation steps must be nonnegative, got {self.k}")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.k + 1,):
            raise ConfigError(f"weight vector must have length k+1={self.k + 1}, got {w.shape}")
        if not np.isfinite(w).all():
            raise ConfigError("propagation weights must be finite")

    @classmethod
    def sgc(cls, k: int) -> "PropagationConfig":
        """Only the k-th power: w_k = 1, all other weights 0."""
        w = [0.0] * k + [1.0]
        return cls(k=k, scheme="sgc", weights=tuple(w))

    @classmethod
    def s2gc(cls, k: int) -> "PropagationConfig":
        """Uniform average over powers 0..k."""
        w = [1.0 / (k + 1)] * (k + 1)
        return cls(k=k, scheme="s2gc", weights=tuple(w))

    @classmethod
    def gbp(cls, k: int, beta: float) -> "PropagationConfig":
        """Geometric decay w_l = beta * (1 - beta)^l."""
        if not 0.0 < beta <= 1.0:
            raise ConfigError(f"gbp decay beta must lie in (0, 1], got {beta}")
        w = [beta * (1.0 - beta) ** l for l in range(k + 1)]
        return cls(k=k, scheme="gbp", weights=tuple(w))

    @classmethod
    def custom(cls, weights) -> "PropagationConfig":
        w = tuple(float(x) for x in weights)
        return cls(k=len(w) - 1, scheme="custom", weights=w)


def propagate(op: SparseOperator, x: np.ndarray, config: PropagationConfig) -> np.ndarray:
    """Apply sum_l w_l S^l to a vector or feature matrix.

    Powers are built iteratively (cur = S @ cur) so only k sparse-dense
    products are performed.  Output row i depends only on the input rows
    and never on other output rows, so rows could be computed in any
    order or split across workers without changing the result.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != op.n:
        raise ShapeError(f"input has {x.shape[0]} rows, operator expects {op.n}")
    w = config.weights
    out = w[0] * x
    cur = x
    for l in range(1, config.k + 1):
        cur = op.matrix @ cur
        out = out + w[l] * cur
    return out


def propagation_column(op: SparseOperator, config: PropagationConfig, u: int) -> np.ndarray:
    """Column u of Pi = sum_l w_l S^l, i.e. Pi[:, u], via a one-hot solve."""
    if not 0 <= u < op.n:
        raise IndexError(f"node {u} out of range for operator with n={op.n}")
    e = np.zeros(op.n, dtype=np.float64)
    e[u] = 1.0
    return propagate(op, e, config)
