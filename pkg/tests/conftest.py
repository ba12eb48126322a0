"""Shared fixtures and independent oracles used across the test suite.

The dense helpers here deliberately re-derive every quantity from first
principles (dense matrices, explicit walk enumeration) so they cannot
share a bug with the sparse implementation under test.
"""

import numpy as np
import pytest

from graphunlearn.graph import Graph, build_graph


def make_graph(n, edges, *, features=None, labels=None,
               train=None, test=None, num_features=3):
    """Small-graph constructor with sensible defaults for tests."""
    if features is None:
        rng = np.random.default_rng(0)
        features = rng.standard_normal((n, num_features))
    if labels is None:
        labels = np.zeros(n, dtype=np.int64)
    if train is None:
        train = np.ones(n, dtype=bool)
    if test is None:
        test = ~np.asarray(train, dtype=bool)
    return build_graph(n, edges, features, labels, train, test)


@pytest.fixture
def path3():
    # 0 - 1 - 2
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def path5():
    # 0 - 1 - 2 - 3 - 4
    return make_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def star5():
    # hub 0, leaves 1..4
    return make_graph(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


def random_connected_graph(rng, n, extra_edges=2):
    """Connected undirected graph: random spanning tree plus a few extras."""
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        a = int(order[i])
        b = int(order[rng.integers(0, i)])
        edges.add((min(a, b), max(a, b)))
    tries = 0
    while extra_edges > 0 and tries < 50 * (extra_edges + 1):
        tries += 1
        a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in edges:
            edges.add(key)
            extra_edges -= 1
    return sorted(edges)


def dense_adjacency_hat(graph: Graph):
    """A + I as a dense float array."""
    n = graph.n
    a = np.zeros((n, n))
    for u, v in graph.undirected_edges():
        a[u, v] = 1.0
        a[v, u] = 1.0
    a += np.eye(n)
    return a

def dense_operator(graph: Graph, r: float):
    """Dense reference for the degree-normalized operator."""
    a_hat = dense_adjacency_hat(graph)
    d_hat = a_hat.sum(axis=1)
    return np.diag(d_hat ** -r) @ a_hat @ np.diag(d_hat ** (r - 1.0))


def dense_pi(graph: Graph, r: float, weights):
    """Dense reference for the weighted propagation series."""
    s = dense_operator(graph, r)
    n = graph.n
    pi = np.zeros((n, n))
    power = np.eye(n)
    for w in weights:
        pi += w * power
        power = power @ s
    return pi


def walk_pi_matrix(graph: Graph, weights):
    """Walk-enumeration oracle for the r=1 propagation matrix.

    For row normalization the (v, u) entry of S^l is the sum over all
    length-l walks v -> u in the self-looped graph of the product of
    1/deg_hat(step source).  Enumerates every walk explicitly via DFS,
    so it is exponential in depth and only usable for tiny graphs.
    """
    n = graph.n
    depth = len(weights) - 1
    nbrs = [list(graph.neighbors(v)) + [v] for v in range(n)]
    d_hat = [float(len(nbrs[v])) for v in range(n)]
    pi = np.zeros((n, n))

    def walk(start, node, level, prod):
        pi[start, node] += weights[level] * prod
        if level == depth:
            return
        for nxt in nbrs[node]:
            walk(start, nxt, level + 1, prod / d_hat[node])

    for v in range(n):
        walk(v, v, 0, 1.0)
    return pi
