"""Unlearning requests, graph surgery, and entity-specific fine-tuning.

A request names training entities (feature rows, nodes, or edges) to
revoke.  Removal never renumbers nodes: edges disappear, feature rows
are zeroed, removed nodes drop out of the training mask.

Fine-tuning mixes two objectives over a small working set:

  forgetting (on the unlearned entities UE and the selected HIE)
    * cross-entropy of UE predictions against per-run shuffled labels
    * distance of each UE embedding to a random foreign-class prototype
    * a contrastive term that pulls every HIE anchor toward same-label
      nodes outside the working set and away from UE/HIE

  reasoning (keeps the rest of the model intact)
    * an L2 penalty on all parameters
    * KL between the original model's soft labels on HIE and the
      current ones

The UE rows that the forgetting terms read are the propagated rows the
entities contributed while training, cached in the partition before
removal; everything else reads the post-removal propagated features.
The per-step work therefore touches only UE, HIE and the sampled
positives/negatives, never the whole graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ConfigError, DataError, IoError, PrototypeError,
                     RequestError, StateError)
from .graph import Graph, PropagationConfig, build_graph, normalized_adjacency, propagate
from .model import (Adam, ModelParams, TrainConfig, backprop_from_logits,
                    forward_embed, init_model, logits, predict, softmax,
                    train, zeros_like_params)

REQUEST_KINDS = ("feature", "node", "edge")


@dataclass(frozen=True)
class UnlearnRequest:
    """A revocation request: one kind plus exactly its matching field."""

    kind: str
    nodes: tuple = ()
    edges: tuple = ()

    def __post_init__(self):
        if self.kind not in REQUEST_KINDS:
            raise ConfigError(f"request kind must be one of {REQUEST_KINDS}, got {self.kind!r}")
        if self.kind == "edge":
            if not self.edges or self.nodes:
                raise ConfigError("edge requests carry edges and nothing else")
            norm = []
            for e in self.edges:
                u, v = int(e[0]), int(e[1])
                if u == v:
                    raise ConfigError(f"self edge ({u}, {v}) is not a valid request entity")
                norm.append((min(u, v), max(u, v)))
            object.__setattr__(self, "edges", tuple(sorted(set(norm))))
        else:
            if not self.nodes or self.edges:
                raise ConfigError(f"{self.kind} requests carry nodes and nothing else")
            object.__setattr__(self, "nodes", tuple(sorted({int(v) for v in self.nodes})))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nodes": list(self.nodes),
                "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, doc: dict) -> "UnlearnRequest":
        if "kind" not in doc:
            raise ConfigError("request document is missing 'kind'")
        return cls(kind=doc["kind"], nodes=tuple(doc.get("nodes", ())),
                   edges=tuple(tuple(e) for e in doc.get("edges", ())))


def read_request(path) -> UnlearnRequest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid request JSON: {exc}") from exc
    return UnlearnRequest.from_dict(doc)


def write_request(request: UnlearnRequest, path) -> None:
    try:
        Path(path).write_text(json.dumps(request.to_dict(), sort_keys=True) + "\n",
                              encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def transform_request(request: UnlearnRequest) -> np.ndarray:
    """Unlearned-entity node set: the nodes themselves, or edge endpoints."""
    if request.kind == "edge":
        nodes = sorted({v for e in request.edges for v in e})
    else:
        nodes = list(request.nodes)
    return np.asarray(nodes, dtype=np.int64)


def apply_removal(graph: Graph, request: UnlearnRequest) -> Graph:
    """Carry out the requested removal; node count never changes.

    edge     listed edges vanish in both directions
    feature  feature rows of the listed nodes are zeroed
    node     incident edges vanish, the feature row is zeroed, and the
             node leaves the training mask

    Raises RequestError when an entity does not exist or when a
    referenced node is not part of the training set.
    """
    ue = transform_request(request)
    if ue.size and (ue.min() < 0 or ue.max() >= graph.n):
        raise IndexError(f"request references node outside [0, {graph.n})")
    outside = ue[~graph.train_mask[ue]]
    if outside.size:
        raise RequestError(f"node {int(outside[0])} is not in the training set")

    edges = graph.undirected_edges()
    features = graph.features.copy()
    train_mask = graph.train_mask.copy()

    if request.kind == "edge":
        keys = edges[:, 0] * np.int64(graph.n) + edges[:, 1]
        for u, v in request.edges:
            if not graph.has_edge(u, v):
                raise RequestError(f"edge ({u}, {v}) does not exist")
        drop = np.asarray([u * graph.n + v for u, v in request.edges], dtype=np.int64)
        edges = edges[~np.isin(keys, drop)]
    elif request.kind == "feature":
        features[ue] = 0.0
    else:  # node
        gone = np.isin(edges[:, 0], ue) | np.isin(edges[:, 1], ue)
        edges = edges[~gone]
        features[ue] = 0.0
        train_mask[ue] = False

    return build_graph(graph.n, edges, features, graph.labels,
                       train_mask, graph.test_mask)


def shuffle_labels(ue, labels, num_classes: int, seed: int) -> np.ndarray:
    """Uniform random wrong class for every unlearned node, fixed per run."""
    if num_classes < 2:
        raise ConfigError("label shuffling needs at least 2 classes")
    ue = np.asarray(ue, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)[ue]
    if np.any(true < 0):
        raise DataError("every unlearned node must carry a label")
    rng = np.random.default_rng(seed)
    drawn = rng.integers(0, num_classes - 1, size=ue.size)
    return drawn + (drawn >= true)


def build_prototypes(embeddings: np.ndarray, labels, num_classes: int,
                     required_classes=()) -> tuple[np.ndarray, np.ndarray]:
    """Mean embedding per class over the given exemplars.

    Returns (prototypes, present): a (classes, d) table and a bool mask
    of classes that had at least one exemplar.  Unlabeled rows (-1) are
    skipped.  Raises PrototypeError when a required class is empty.
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != emb.shape[0]:
        raise DataError("one label per embedding row is required")
    protos = np.zeros((num_classes, emb.shape[1]))
    present = np.zeros(num_classes, dtype=bool)
    for c in range(num_classes):
        rows = np.flatnonzero(labels == c)
        if rows.size:
            protos[c] = emb[rows].mean(axis=0)
            present[c] = True
    for c in required_classes:
        if not present[c]:
            raise PrototypeError(f"class {int(c)} has no non-unlearned exemplars")
    return protos, present


@dataclass
class EntityPartition:
    """Frozen per-run working set for fine-tuning.

    Everything random (shuffled labels, foreign prototypes, contrastive
    samples) is drawn once here, so the fine-tune loop itself is fully
    deterministic.  ue_train_rows caches the pre-removal propagated rows
    of the unlearned entities: that is the data whose imprint is being
    erased, and for node removals the post-removal rows would be zero.
    """

    n: int
    ue: np.ndarray
    hie: np.ndarray
    rest: np.ndarray
    shuffled_labels: np.ndarray     # aligned with ue
    ue_train_rows: np.ndarray       # (|ue|, f) pre-removal propagated rows
    ue_prototype: np.ndarray        # (|ue|, d) assigned foreign prototypes
    prototypes: np.ndarray          # (classes, d)
    prototype_present: np.ndarray
    anchor_labels: np.ndarray       # predicted label per HIE anchor
    positives: list                 # per anchor: node ids in rest
    negatives: list                 # per anchor: node ids in ue or hie
    memory: np.ndarray              # (|hie|, classes) original soft labels

    def __post_init__(self):
        pieces = np.concatenate([self.ue, self.hie, self.rest])
        if np.unique(pieces).size != pieces.size or pieces.size != self.n:
            raise ConfigError("ue, hie and rest must partition the node set")


def _sample_pool(rng, pool: np.ndarray, pool_labels: np.ndarray,
                 want_label: int, count: int) -> np.ndarray:
    """Up to `count` draws without replacement, preferring the wanted label."""
    matching = pool[pool_labels == want_label]
    take = matching[rng.permutation(matching.size)[:count]]
    if take.size < count:
        others = pool[pool_labels != want_label]
        extra = others[rng.permutation(others.size)[:count - take.size]]
        take = np.concatenate([take, extra])
    return np.sort(take)


def prepare_partition(graph_after: Graph, x_after: np.ndarray, ue, hie,
                      original_soft: np.ndarray, original_params: ModelParams,
                      x_before: np.ndarray, num_classes: int,
                      positives_per_anchor: int = 5, negatives_per_anchor: int = 5,
                      seed: int = 0) -> EntityPartition:
    """Assemble the working set for fine-tuning.

    Label assignments for the contrastive pools come from the original
    model's predictions (argmax of original_soft) so that no test labels
    leak in; prototypes are built from the labeled training remainder.
    """
    n = graph_after.n
    ue = np.unique(np.asarray(ue, dtype=np.int64))
    hie = np.unique(np.asarray(hie, dtype=np.int64))
    if np.intersect1d(ue, hie).size:
        raise ConfigError("unlearned entities cannot be selected as influenced nodes")
    keep = np.ones(n, dtype=bool)
    keep[ue] = False
    keep[hie] = False
    rest = np.flatnonzero(keep)

    rng = np.random.default_rng(seed)
    shuffled = shuffle_labels(ue, graph_after.labels, num_classes, seed=int(rng.integers(2 ** 63)))

    # prototypes from the labeled training remainder, in the embedding
    # space the fine-tuned model starts from
    exemplars = rest[graph_after.train_mask[rest] & (graph_after.labels[rest] >= 0)]
    ue_classes = np.unique(graph_after.labels[ue])
    protos, present = build_prototypes(
        forward_embed(original_params, x_after[exemplars]) if exemplars.size
        else np.zeros((0, 1)),
        graph_after.labels[exemplars], num_classes, required_classes=ue_classes)

    ue_proto = np.zeros((ue.size, protos.shape[1]))
    for i, u in enumerate(ue):
        own = int(graph_after.labels[u])
        choices = np.flatnonzero(present & (np.arange(num_classes) != own))
        if choices.size == 0:
            raise PrototypeError(f"no foreign-class prototype available for class {own}")
        ue_proto[i] = protos[rng.choice(choices)]

    predicted = np.argmax(original_soft, axis=1)
    pool_neg = np.concatenate([ue, hie])
    anchor_labels = predicted[hie]
    positives, negatives = [], []
    for a, lab in zip(hie, anchor_labels):
        positives.append(_sample_pool(rng, rest, predicted[rest], int(lab),
                                      positives_per_anchor))
        others = pool_neg[pool_neg != a]
        negatives.append(_sample_pool(rng, others, predicted[others], int(lab),
                                      negatives_per_anchor))

    # the KL memory is the original model's view of the post-removal
    # rows, so the reasoning term starts at exactly zero
    memory = predict(original_params, np.asarray(x_after, dtype=np.float64)[hie]) \
        if hie.size else np.zeros((0, num_classes))

    return EntityPartition(n=n, ue=ue, hie=hie, rest=rest,
                           shuffled_labels=shuffled,
                           ue_train_rows=np.asarray(x_before, dtype=np.float64)[ue],
                           ue_prototype=ue_proto, prototypes=protos,
                           prototype_present=present,
                           anchor_labels=anchor_labels,
                           positives=positives, negatives=negatives,
                           memory=memory)


class _RowReader:
    """Row gatherer that remembers which feature rows were touched."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = matrix
        self.rows_read: set = set()

    def take(self, ids: np.ndarray) -> np.ndarray:
        self.rows_read.update(int(i) for i in ids)
        return self.matrix[ids]


def _merge(target: dict, source: dict, scale: float) -> None:
    for name, arr in source.items():
        target[name] += scale * arr


def _cosine_rows(a: np.ndarray, b: np.ndarray):
    """Row-wise cosine of a (d,) anchor against (m, d) rows, with norms."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b, axis=1)
    denom = np.maximum(na * nb, 1e-300)
    return (b @ a) / denom, na, nb


def _require_cache(partition: EntityPartition, *names) -> None:
    for name in names:
        if getattr(partition, name) is None:
            raise StateError(f"partition cache {name!r} was never prepared")


def label_shuffle_loss(params: ModelParams, partition: EntityPartition):
    """Summed CE of UE predictions against the per-run shuffled labels.

    The predictions are taken on the cached pre-removal rows: that is
    the imprint being erased.
    """
    _require_cache(partition, "ue_train_rows", "shuffled_labels")
    x_ue = partition.ue_train_rows
    rows = np.arange(partition.ue.size)
    p = softmax(logits(params, x_ue))
    picked = p[rows, partition.shuffled_labels]
    value = float(-np.log(np.maximum(picked, 1e-300)).sum())
    dz = p.copy()
    dz[rows, partition.shuffled_labels] -= 1.0
    return value, backprop_from_logits(params, x_ue, dz)


def prototype_loss(params: ModelParams, partition: EntityPartition):
    """Summed distance of each UE embedding to its assigned foreign prototype."""
    _require_cache(partition, "ue_train_rows", "ue_prototype")
    x_ue = partition.ue_train_rows
    emb = forward_embed(params, x_ue)
    diff = emb - partition.ue_prototype
    norms = np.linalg.norm(diff, axis=1)
    demb = np.zeros_like(diff)
    nonzero = norms > 1e-12
    demb[nonzero] = diff[nonzero] / norms[nonzero, None]
    grads = backprop_from_logits(params, x_ue,
                                 np.zeros((x_ue.shape[0], params.num_classes)), demb)
    return float(norms.sum()), grads


def contrastive_loss(params: ModelParams, partition: EntityPartition,
                     x_after, tau: float = 0.5):
    """Per-anchor log-ratio pulling HIE toward same-label survivors.

    Each HIE anchor is scored against its sampled positives (rest) and
    negatives (UE/HIE) by cosine similarity at temperature tau; anchors
    without positives are skipped.  UE rows come from the partition
    cache, everything else from the post-removal features.
    """
    _require_cache(partition, "ue_train_rows")
    reader = x_after if isinstance(x_after, _RowReader) else _RowReader(np.asarray(x_after))
    grads = zeros_like_params(params)
    if partition.hie.size == 0:
        return 0.0, grads

    cl_nodes = np.unique(np.concatenate(
        [partition.hie] + list(partition.positives) + list(partition.negatives)))
    slot = {int(v): i for i, v in enumerate(cl_nodes)}
    in_ue = np.isin(cl_nodes, partition.ue)
    x_cl = np.empty((cl_nodes.size, partition.ue_train_rows.shape[1]))
    if np.any(~in_ue):
        x_cl[~in_ue] = reader.take(cl_nodes[~in_ue])
    if np.any(in_ue):
        ue_slot = {int(v): i for i, v in enumerate(partition.ue)}
        x_cl[in_ue] = partition.ue_train_rows[[ue_slot[int(v)] for v in cl_nodes[in_ue]]]

    emb = forward_embed(params, x_cl)
    demb = np.zeros_like(emb)
    value = 0.0
    for idx, anchor in enumerate(partition.hie):
        pos = partition.positives[idx]
        neg = partition.negatives[idx]
        if pos.size == 0:
            continue  # nothing to pull toward; the anchor is skipped
        ai = slot[int(anchor)]
        others = np.asarray([slot[int(v)] for v in np.concatenate([pos, neg])])
        a_vec = emb[ai]
        cos, na, nb = _cosine_rows(a_vec, emb[others])
        w = np.exp(cos / tau)
        pos_mass = w[:pos.size].sum()
        total = w.sum()
        value += np.log(total) - np.log(pos_mass)
        dw = w / total
        dw[:pos.size] -= w[:pos.size] / pos_mass
        ds = dw / tau
        if na > 1e-12:
            safe_nb = np.maximum(nb, 1e-300)
            # rows with zero norm contribute nothing to either side
            ok = nb > 1e-12
            b_rows = emb[others]
            da = (b_rows / safe_nb[:, None] - cos[:, None] * (a_vec / na)) / na
            db = (a_vec[None, :] / na - cos[:, None] * (b_rows / safe_nb[:, None])) \
                / safe_nb[:, None]
            demb[ai] += (ds[:, None] * da * ok[:, None]).sum(axis=0)
            np.add.at(demb, others, ds[:, None] * db * ok[:, None])
    _merge(grads, backprop_from_logits(
        params, x_cl, np.zeros((cl_nodes.size, params.num_classes)), demb), 1.0)
    return float(value), grads


def forgetting_loss(params: ModelParams, partition: EntityPartition,
                    x_after: np.ndarray, tau: float = 0.5):
    """Sum of the three forgetting terms with parameter gradients.

    Returns (value, grads, parts) where parts holds the label-shuffle,
    prototype and contrastive components separately.
    """
    v_label, g_label = label_shuffle_loss(params, partition)
    v_proto, g_proto = prototype_loss(params, partition)
    v_cl, g_cl = contrastive_loss(params, partition, x_after, tau=tau)
    grads = g_label
    _merge(grads, g_proto, 1.0)
    _merge(grads, g_cl, 1.0)
    parts = {"label": v_label, "prototype": v_proto, "contrastive": v_cl}
    return v_label + v_proto + v_cl, grads, parts


def reasoning_loss(params: ModelParams, partition: EntityPartition,
                   x_after: np.ndarray, l2_coef: float = 5e-4):
    """L2 weight penalty plus KL(original soft labels || current) on HIE."""
    _require_cache(partition, "memory")
    reader = x_after if isinstance(x_after, _RowReader) else _RowReader(np.asarray(x_after))
    grads = zeros_like_params(params)
    l2 = 0.0
    for name, arr in params.items():
        l2 += float(np.sum(arr * arr))
        grads[name] += 2.0 * l2_coef * arr
    parts = {"l2": l2_coef * l2, "kl": 0.0}

    if partition.hie.size:
        x_hie = reader.take(partition.hie)
        p = predict(params, x_hie)
        clamped = np.maximum(p, 1e-12)
        mem = partition.memory
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mem > 0.0, mem * (np.log(np.maximum(mem, 1e-300)) - np.log(clamped)), 0.0)
        parts["kl"] = float(ratio.sum())
        # exact gradient of -sum mem*log(max(p, eps)): rows where the
        # clamp is active drop out of the log derivative
        active = p > 1e-12
        s_act = (mem * active).sum(axis=1, keepdims=True)
        dz = p * s_act - mem * active
        _merge(grads, backprop_from_logits(params, x_hie, dz), 1.0)

    return parts["l2"] + parts["kl"], grads, parts


def mixed_loss(params: ModelParams, partition: EntityPartition, x_after,
               lam: float, tau: float = 0.5, l2_coef: float = 5e-4):
    """lam * forgetting + (1 - lam) * reasoning, with exact endpoints."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"loss mix lambda must lie in [0, 1], got {lam}")
    if lam == 1.0:
        value, grads, parts = forgetting_loss(params, partition, x_after, tau=tau)
        parts.update({"l2": 0.0, "kl": 0.0})
        return value, grads, parts
    if lam == 0.0:
        value, grads, parts = reasoning_loss(params, partition, x_after, l2_coef=l2_coef)
        parts.update({"label": 0.0, "prototype": 0.0, "contrastive": 0.0})
        return value, grads, parts
    f_val, f_grads, f_parts = forgetting_loss(params, partition, x_after, tau=tau)
    r_val, r_grads, r_parts = reasoning_loss(params, partition, x_after, l2_coef=l2_coef)
    grads = {name: lam * f_grads[name] + (1.0 - lam) * r_grads[name]
             for name in f_grads}
    parts = dict(f_parts)
    parts.update(r_parts)
    return lam * f_val + (1.0 - lam) * r_val, grads, parts


@dataclass
class FinetuneConfig:
    """Entity-specific fine-tuning knobs."""

    lr: float = 0.01
    epochs: int = 50
    lam: float = 0.5
    tau: float = 0.5
    l2_coef: float = 5e-4

    def __post_init__(self):
        if self.lr < 0 or self.epochs < 0:
            raise ConfigError("lr and epochs must be nonnegative")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")


@dataclass
class FinetuneLog:
    """Per-epoch loss components plus the feature rows that were read."""

    epochs: list = field(default_factory=list)
    rows_read: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def finetune(params: ModelParams, partition: EntityPartition, x_after: np.ndarray,
             cfg: FinetuneConfig):
    """Adam fine-tuning of the mixed objective over the working set.

    Returns (new params, FinetuneLog).  The log records every loss
    component per epoch and the set of post-removal feature rows read,
    which stays inside HIE plus the sampled positives/negatives (UE rows
    come from the partition cache).
    """
    params = params.copy()
    reader = _RowReader(np.asarray(x_after, dtype=np.float64))
    opt = Adam(params, lr=cfg.lr, weight_decay=0.0)
    log = FinetuneLog()
    for epoch in range(cfg.epochs):
        value, grads, parts = mixed_loss(params, partition, reader,
                                         lam=cfg.lam, tau=cfg.tau, l2_coef=cfg.l2_coef)
        opt.step(params, grads)
        entry = {"epoch": epoch, "total": float(value)}
        entry.update({k: float(v) for k, v in parts.items()})
        log.epochs.append(entry)
    log.rows_read = np.asarray(sorted(reader.rows_read), dtype=np.int64)
    return params, log


def retrain(graph_after: Graph, prop_config: PropagationConfig, r: float,
            mode: str, hidden: int, train_cfg: TrainConfig,
            num_classes: int | None = None):
    """Train a fresh model on the post-removal graph (the slow oracle).

    Returns (params, per-epoch losses, propagated features).
    """
    op = normalized_adjacency(graph_after, r)
    x_tilde = propagate(op, graph_after.features, prop_config)
    classes = num_classes if num_classes is not None else graph_after.num_classes
    fresh = init_model(graph_after.num_features, hidden, classes,
                       mode=mode, seed=train_cfg.seed)
    params, history = train(fresh, x_tilde, graph_after.labels,
                            graph_after.train_mask, train_cfg)
    return params, history, x_tilde
