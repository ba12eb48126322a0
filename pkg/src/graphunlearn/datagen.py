"""Synthetic stochastic block model graphs with Gaussian class features.

Node classes are balanced (sizes differ by at most one) and assigned by
a random permutation, every unordered pair is an independent Bernoulli
draw (p_in inside a class, p_out across), and features are unit-variance
Gaussians whose class-c mean sits at separation * e_c.  Everything is
drawn from one generator in a fixed order, so a seed pins the graph
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import Graph, build_graph


@dataclass(frozen=True)
class SbmSpec:
    """Parameters of one synthetic graph draw."""

    n: int
    classes: int
    p_in: float
    p_out: float
    num_features: int
    separation: float
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.n < 1 or self.classes < 1:
            raise ConfigError("n and classes must be positive")
        if self.num_features < self.classes:
            raise ConfigError("need at least one feature axis per class")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")


def generate_sbm(spec: SbmSpec, seed: int) -> Graph:
    """Draw one graph.  Same spec and seed give an identical Graph."""
    rng = np.random.default_rng(seed)
    n, c = spec.n, spec.classes
    labels = rng.permutation(np.arange(n, dtype=np.int64) % c)
    members = [np.flatnonzero(labels == ci) for ci in range(c)]

    chunks = []
    for ci in range(c):
        for cj in range(ci, c):
            p = spec.p_in if ci == cj else spec.p_out
            if ci == cj:
                iu, ju = np.triu_indices(members[ci].size, k=1)
                us, vs = members[ci][iu], members[ci][ju]
            else:
                us = np.repeat(members[ci], members[cj].size)
                vs = np.tile(members[cj], members[ci].size)
            hit = rng.random(us.size) < p
            if np.any(hit):
                chunks.append(np.column_stack([us[hit], vs[hit]]))
    edges = np.vstack(chunks) if chunks else np.empty((0, 2), dtype=np.int64)

    features = rng.standard_normal((n, spec.num_features))
    features[np.arange(n), labels] += spec.separation

    perm = rng.permutation(n)
    cut = int(round(spec.train_fraction * n))
    train = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    train[perm[:cut]] = True
    test[perm[cut:]] = True

    return build_graph(n, edges, features, labels, train, test)
