"""Influence scoring and high-influenced-entity (HIE) selection.

For a seed node u the topology channel is the absolute u-th column of
Pi = sum_l w_l S^l, i.e. how much mass propagation carries from u to
every other node.  The feature channel additionally weighs that mass by
the soft-label agreement <Z_v, Z_u>.  Per-channel scores are normalized
per node by the total influence received from the whole seed set, then
aggregated by a max over seeds:

    tilde(v, S) = max_{u in S} I(v, u) / sum_{o in S} I(v, o)

The combined score tilde_t + tilde_f lies in [0, 2].  Selection is a
greedy loop that picks the best-scoring candidate above a threshold
until the budget runs out; in expanding mode the pick joins the seed
set before the next round, in static mode the seeds stay the original
unlearned entities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .fileio import _write_text
from .graph import Graph, PropagationConfig, SparseOperator, propagation_column

SELECTION_MODES = ("expanding", "static")


def _check_soft_labels(z: np.ndarray, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != n:
        raise DataError(f"soft labels must be (n, classes) with n={n}, got {z.shape}")
    if np.abs(z.sum(axis=1) - 1.0).max() > 1e-6:
        raise DataError("soft label rows must sum to 1 within 1e-6")
    return z


def topology_influence(op: SparseOperator, config: PropagationConfig, u: int) -> np.ndarray:
    """|Pi[v, u]| for every node v: raw topology influence of seed u."""
    return np.abs(propagation_column(op, config, u))


def feature_influence(op: SparseOperator, config: PropagationConfig,
                      soft_labels: np.ndarray, u: int) -> np.ndarray:
    """Topology influence of u weighted by soft-label agreement <Z_v, Z_u>."""
    z = _check_soft_labels(soft_labels, op.n)
    return topology_influence(op, config, u) * (z @ z[u])


@dataclass(frozen=True)
class InfluenceTable:
    """Per-candidate influence scores against one fixed seed set.

    raw_* hold the max over seeds of the unnormalized channel, kept for
    diagnostics; topology/feature are the normalized per-channel scores
    in [0, 1]; combined = topology + feature in [0, 2].  Nodes inside
    the seed set carry no entry.  seed_version counts the seeds the
    table was computed against.
    """

    nodes: np.ndarray
    raw_topology: np.ndarray
    raw_feature: np.ndarray
    topology: np.ndarray
    feature: np.ndarray
    combined: np.ndarray
    seed_version: int


def _safe_ratio(top: np.ndarray, bottom: np.ndarray) -> np.ndarray:
    out = np.zeros_like(top)
    np.divide(top, bottom, out=out, where=bottom > 0.0)
    return out


def normalize_influence(topology_rows: np.ndarray, feature_rows: np.ndarray,
                        seeds) -> InfluenceTable:
    """Fold per-seed raw influence vectors into a normalized table.

    topology_rows/feature_rows are (num_seeds, n) with one raw influence
    vector per seed.  A node that receives zero total influence scores 0.
    """
    seeds = np.asarray(seeds, dtype=np.int64)
    if seeds.size == 0:
        raise ConfigError("seed set must not be empty")
    topo = np.atleast_2d(np.asarray(topology_rows, dtype=np.float64))
    feat = np.atleast_2d(np.asarray(feature_rows, dtype=np.float64))
    if topo.shape != feat.shape or topo.shape[0] != seeds.size:
        raise ConfigError("per-seed influence rows must align with the seed set")
    n = topo.shape[1]
    keep = np.ones(n, dtype=bool)
    keep[seeds] = False
    nodes = np.flatnonzero(keep)
    raw_t = topo.max(axis=0)[nodes]
    raw_f = feat.max(axis=0)[nodes]
    tilde_t = _safe_ratio(raw_t, topo.sum(axis=0)[nodes])
    tilde_f = _safe_ratio(raw_f, feat.sum(axis=0)[nodes])
    return InfluenceTable(nodes=nodes, raw_topology=raw_t, raw_feature=raw_f,
                          topology=tilde_t, feature=tilde_f,
                          combined=tilde_t + tilde_f, seed_version=int(seeds.size))


@dataclass(frozen=True)
class HieSelection:
    """Greedy selection outcome: nodes in pick order with their scores."""

    nodes: np.ndarray
    scores: np.ndarray
    theta: float
    budget: int
    mode: str

    def __len__(self) -> int:
        return int(self.nodes.size)


def select_hie(op: SparseOperator, config: PropagationConfig, ue,
               soft_labels: np.ndarray, theta: float, budget: int,
               mode: str = "expanding") -> HieSelection:
    """Greedily pick up to `budget` nodes whose combined score clears theta.

    Every round scores all remaining candidates against the current seed
    set and takes the argmax (ties go to the smallest node id).  In
    expanding mode the pick is added to the seed set, which is what makes
    a later, larger budget reproduce the smaller run as a prefix; static
    mode keeps the seed set fixed at the unlearned entities.

    Args:
        op, config: propagation operator and weights used for influence.
        ue: unlearned entity node ids, the initial seed set.
        soft_labels: (n, classes) prediction matrix, rows sum to 1.
        theta: acceptance threshold; combined scores never exceed 2, so
            anything above that selects nothing.
        budget: maximum number of nodes to select.
        mode: "expanding" or "static".
    """
    if mode not in SELECTION_MODES:
        raise ConfigError(f"selection mode must be one of {SELECTION_MODES}, got {mode!r}")
    if theta < 0.0:
        raise ConfigError(f"theta must be nonnegative, got {theta}")
    if budget < 0:
        raise ConfigError(f"budget must be nonnegative, got {budget}")
    n = op.n
    ue = np.unique(np.asarray(ue, dtype=np.int64))
    if ue.size == 0:
        raise ConfigError("unlearned entity set must not be empty")
    if ue.min() < 0 or ue.max() >= n:
        raise IndexError(f"seed node outside [0, {n})")
    z = _check_soft_labels(soft_labels, n)

    # running per-node aggregates over the current seed set
    sum_t = np.zeros(n)
    max_t = np.zeros(n)
    sum_f = np.zeros(n)
    max_f = np.zeros(n)

    def add_seed(u: int) -> None:
        col_t = topology_influence(op, config, u)
        col_f = col_t * (z @ z[u])
        np.maximum(max_t, col_t, out=max_t)
        np.maximum(max_f, col_f, out=max_f)
        np.add(sum_t, col_t, out=sum_t)
        np.add(sum_f, col_f, out=sum_f)

    for u in ue:
        add_seed(int(u))

    candidate = np.ones(n, dtype=bool)
    candidate[ue] = False
    picked, picked_scores = [], []
    for _ in range(budget):
        score = _safe_ratio(max_t, sum_t) + _safe_ratio(max_f, sum_f)
        score[~candidate] = -1.0  # scores are >= 0, so -1 never wins
        best = int(np.argmax(score))  # first max: smallest node id on ties
        if score[best] < theta:
            break
        picked.append(best)
        picked_scores.append(float(score[best]))
        candidate[best] = False
        if mode == "expanding":
            add_seed(best)

    return HieSelection(nodes=np.asarray(picked, dtype=np.int64),
                        scores=np.asarray(picked_scores, dtype=np.float64),
                        theta=float(theta), budget=int(budget), mode=mode)


def bfs_distances(graph: Graph, seeds, max_hops: int | None = None) -> np.ndarray:
    """Hop distance from the seed set to every node, -1 when unreached."""
    seeds = np.unique(np.asarray(seeds, dtype=np.int64))
    dist = np.full(graph.n, -1, dtype=np.int64)
    dist[seeds] = 0
    frontier = seeds
    d = 0
    while frontier.size and (max_hops is None or d < max_hops):
        nbrs = np.concatenate([graph.neighbors(int(u)) for u in frontier]) \
            if frontier.size else np.empty(0, np.int64)
        nxt = np.unique(nbrs[dist[nbrs] < 0]) if nbrs.size else np.empty(0, np.int64)
        d += 1
        dist[nxt] = d
        frontier = nxt
    return dist


def khop_hie(graph: Graph, ue, hops: int) -> np.ndarray:
    """All nodes within 1..hops of the unlearned entities (excluding them)."""
    if hops < 0:
        raise ConfigError(f"hop count must be nonnegative, got {hops}")
    dist = bfs_distances(graph, ue, max_hops=hops)
    return np.flatnonzero((dist > 0) & (dist <= hops))


def khop_hie_capped(graph: Graph, ue, hops: int, budget: int) -> np.ndarray:
    """k-hop neighborhood trimmed to a budget, closest hops first.

    Within one hop level nodes are taken in id order.  This keeps the
    naive neighborhood baseline comparable to a budgeted greedy run.
    """
    dist = bfs_distances(graph, ue, max_hops=hops)
    inside = np.flatnonzero((dist > 0) & (dist <= hops))
    order = np.lexsort((inside, dist[inside]))
    return np.sort(inside[order][:budget])


def write_hie_csv(selection: HieSelection, path) -> None:
    """Export the selection as CSV with header node,score,round."""
    lines = ["node,score,round\n"]
    for i, (node, score) in enumerate(zip(selection.nodes, selection.scores), start=1):
        lines.append(f"{node},{float(score)!r},{i}\n")
    _write_text(path, "".join(lines))
