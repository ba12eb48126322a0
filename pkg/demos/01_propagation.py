"""Weight-free feature propagation on a toy graph.

Builds a five-node path, forms the degree-normalized operator, and
smooths one-hot features under three weighting schemes.  Everything is
closed-form checkable by hand on a path this small.
"""

import numpy as np

from graphunlearn.graph import (PropagationConfig, build_graph,
                                normalized_adjacency, propagate)

n = 5
edges = [(0, 1), (1, 2), (2, 3), (3, 4)]
features = np.eye(n)  # one-hot rows make the mixing visible
labels = np.zeros(n, dtype=int)
train = np.ones(n, dtype=bool)
graph = build_graph(n, edges, features, labels, train, ~train)

print("path graph:", n, "nodes,", graph.num_edges, "edges")

# r = 1 normalizes by the source degree only: rows of S sum to one
op = normalized_adjacency(graph, r=1.0)
smoothed = propagate(op, features, PropagationConfig.sgc(1))
print("\none propagation step (row-stochastic):")
print(np.round(smoothed, 3))
print("row sums:", np.round(smoothed.sum(axis=1), 12))

# averaging over depths 0..k keeps part of every node's own signal
for k in (1, 2, 3):
    config = PropagationConfig.s2gc(k)
    out = propagate(op, features, config)
    print(f"\nmean over 0..{k} steps, center row:", np.round(out[2], 3))

# geometric weights decay the far hops instead of cutting them off
config = PropagationConfig.gbp(3, beta=0.5)
print("\ngeometric weights:", np.round(config.weights, 4))
out = propagate(op, features, config)
print("center row:", np.round(out[2], 4))

# the symmetric normalization (r = 1/2) is the usual GCN-style operator
sym = normalized_adjacency(graph, r=0.5)
out = propagate(sym, features, PropagationConfig.sgc(1))
print("\nsymmetric operator, one step, center row:", np.round(out[2], 4))
