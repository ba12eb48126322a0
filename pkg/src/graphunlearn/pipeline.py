"""End-to-end stages shared by the command line and the test harnesses.

A PipelineState bundles a graph with its propagation operator, the
propagated features, and trained parameters.  Unlearning consumes a
trained state and a request and produces a new state on the post-removal
graph, together with the selection and fine-tune artifacts.  Influence
is always scored on the state's own (pre-removal) operator and
predictions, because that is the propagation the model was trained
with; the removal only changes what fine-tuning and later inference see.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from typing import Optional

import numpy as np

from .errors import ConfigError
from .graph import (Graph, PropagationConfig, SparseOperator,
                    normalized_adjacency, propagate)
from .influence import HieSelection, khop_hie_capped, select_hie
from .evaluate import f1_score
from .model import ModelParams, TrainConfig, init_model, predict, train
from .unlearn import (EntityPartition, FinetuneConfig, FinetuneLog,
                      UnlearnRequest, apply_removal, finetune,
                      prepare_partition, transform_request)


@dataclass
class RunConfig:
    """Flat run configuration; JSON files use dotted keys per field.

    A JSON config is one object whose keys are "<section>.<name>", e.g.
    {"propagation.k": 4, "model.mode": "linear", "nim.theta": 0.6}.
    """

    # paths
    edges: str = ""
    features: str = ""
    labels: str = ""
    train_mask: str = ""
    test_mask: str = ""
    request: str = ""
    # datagen
    gen_n: int = 400
    gen_classes: int = 4
    gen_p_in: float = 0.05
    gen_p_out: float = 0.005
    gen_features: int = 16
    gen_separation: float = 2.0
    gen_train_fraction: float = 0.8
    gen_ue_fraction: float = 0.1
    # propagation
    scheme: str = "s2gc"
    k: int = 3
    r: float = 0.5
    beta: float = 0.5
    weights: tuple = ()
    # model / training
    mode: str = "mlp"
    hidden: int = 64
    lr: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 200
    # hie selection
    theta: float = 0.5
    budget: Optional[int] = None
    budget_multiplier: float = 3.0
    selection_mode: str = "expanding"
    method: str = "influence"
    khop: int = 2
    # fine-tuning
    lam: float = 0.5
    finetune_lr: float = 0.01
    finetune_epochs: int = 50
    tau: float = 0.5
    positives: int = 5
    negatives: int = 5
    l2_coef: float = 5e-4
    # evaluation
    attack: str = "mia"
    rho: tuple = (0.2,)
    # global
    seed: int = 0

    _KEYMAP = {
        "paths.edges": "edges", "paths.features": "features",
        "paths.labels": "labels", "paths.train_mask": "train_mask",
        "paths.test_mask": "test_mask", "paths.request": "request",
        "datagen.n": "gen_n", "datagen.classes": "gen_classes",
        "datagen.p_in": "gen_p_in", "datagen.p_out": "gen_p_out",
        "datagen.features": "gen_features", "datagen.separation": "gen_separation",
        "datagen.train_fraction": "gen_train_fraction",
        "datagen.ue_fraction": "gen_ue_fraction",
        "propagation.scheme": "scheme", "propagation.k": "k",
        "propagation.r": "r", "propagation.beta": "beta",
        "propagation.weights": "weights",
        "model.mode": "mode", "model.hidden": "hidden",
        "train.lr": "lr", "train.weight_decay": "weight_decay",
        "train.epochs": "epochs",
        "nim.theta": "theta", "nim.budget": "budget",
        "nim.budget_multiplier": "budget_multiplier",
        "nim.mode": "selection_mode", "nim.method": "method",
        "nim.khop": "khop",
        "unlearn.lambda": "lam", "unlearn.lr": "finetune_lr",
        "unlearn.epochs": "finetune_epochs", "unlearn.tau": "tau",
        "unlearn.positives": "positives", "unlearn.negatives": "negatives",
        "unlearn.l2_coef": "l2_coef",
        "eval.attack": "attack", "eval.rho": "rho",
        "seed": "seed",
    }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        kwargs = {}
        for key, value in doc.items():
            if key not in cls._KEYMAP:
                raise ConfigError(f"unknown config key {key!r}")
            name = cls._KEYMAP[key]
            if name in ("weights",):
                value = tuple(float(v) for v in value)
            if name == "rho":
                value = tuple(float(v) for v in (value if isinstance(value, (list, tuple)) else [value]))
            kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        reverse = {v: k for k, v in self._KEYMAP.items()}
        out = {}
        for f in dc_fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = list(val)
            out[reverse[f.name]] = val
        return out

    def validate(self) -> None:
        if self.method not in ("influence", "khop"):
            raise ConfigError(f"nim.method must be 'influence' or 'khop', got {self.method!r}")
        if self.budget is not None and self.budget < 0:
            raise ConfigError("nim.budget must be nonnegative")
        if self.budget_multiplier < 0:
            raise ConfigError("nim.budget_multiplier must be nonnegative")
        if self.attack not in ("mia", "edge"):
            raise ConfigError(f"eval.attack must be 'mia' or 'edge', got {self.attack!r}")
        for rho in self.rho:
            if not 0.0 < rho <= 1.0:
                raise ConfigError(f"eval.rho entries must lie in (0, 1], got {rho}")

    def propagation_config(self) -> PropagationConfig:
        if self.scheme == "sgc":
            return PropagationConfig.sgc(self.k)
        if self.scheme == "s2gc":
            return PropagationConfig.s2gc(self.k)
        if self.scheme == "gbp":
            return PropagationConfig.gbp(self.k, self.beta)
        if self.scheme == "custom":
            return PropagationConfig.custom(self.weights)
        raise ConfigError(f"unknown propagation scheme {self.scheme!r}")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(lr=self.lr, weight_decay=self.weight_decay,
                           epochs=self.epochs, seed=seed)

    def finetune_config(self) -> FinetuneConfig:
        return FinetuneConfig(lr=self.finetune_lr, epochs=self.finetune_epochs,
                              lam=self.lam, tau=self.tau, l2_coef=self.l2_coef)

    def budget_for(self, num_ue: int) -> int:
        if self.budget is not None:
            return int(self.budget)
        return int(round(self.budget_multiplier * num_ue))


@dataclass
class PipelineState:
    """A graph with its operator, propagated features, and trained head."""

    graph: Graph
    op: SparseOperator
    x_tilde: np.ndarray
    params: ModelParams
    soft: np.ndarray
    history: list = field(default_factory=list)
    num_classes: int = 0


@dataclass
class UnlearnOutcome:
    """Everything one unlearning run produces."""

    state: PipelineState
    ue: np.ndarray
    hie: np.ndarray
    selection: Optional[HieSelection]
    partition: EntityPartition
    log: FinetuneLog


def propagate_graph(graph: Graph, cfg: RunConfig):
    """Operator plus propagated features for a graph under this config."""
    op = normalized_adjacency(graph, cfg.r)
    return op, propagate(op, graph.features, cfg.propagation_config())


def loaded_state(graph: Graph, cfg: RunConfig, params: ModelParams) -> PipelineState:
    """State around an existing checkpoint; no training happens."""
    op, x_tilde = propagate_graph(graph, cfg)
    return PipelineState(graph=graph, op=op, x_tilde=x_tilde, params=params,
                         soft=predict(params, x_tilde), history=[],
                         num_classes=params.num_classes)


def train_state(graph: Graph, cfg: RunConfig, seed: int) -> PipelineState:
    """Propagate once, then fit the head on the training nodes."""
    prop = cfg.propagation_config()
    op = normalized_adjacency(graph, cfg.r)
    x_tilde = propagate(op, graph.features, prop)
    classes = graph.num_classes
    fresh = init_model(graph.num_features, cfg.hidden, classes, mode=cfg.mode, seed=seed)
    params, history = train(fresh, x_tilde, graph.labels, graph.train_mask,
                            cfg.train_config(seed))
    return PipelineState(graph=graph, op=op, x_tilde=x_tilde, params=params,
                         soft=predict(params, x_tilde), history=history,
                         num_classes=classes)


def select_influenced(state: PipelineState, ue: np.ndarray, cfg: RunConfig):
    """Pick the HIE set with the configured method on the trained state."""
    budget = cfg.budget_for(ue.size)
    if cfg.method == "khop":
        hie = khop_hie_capped(state.graph, ue, cfg.khop, budget)
        return hie, None
    selection = select_hie(state.op, cfg.propagation_config(), ue, state.soft,
                           theta=cfg.theta, budget=budget, mode=cfg.selection_mode)
    return np.sort(selection.nodes), selection


def unlearn_state(state: PipelineState, request: UnlearnRequest,
                  cfg: RunConfig, seed: int) -> UnlearnOutcome:
    """Run removal, selection and fine-tuning on a trained state."""
    ue = transform_request(request)
    hie, selection = select_influenced(state, ue, cfg)

    graph_after = apply_removal(state.graph, request)
    op_after = normalized_adjacency(graph_after, cfg.r)
    x_after = propagate(op_after, graph_after.features, cfg.propagation_config())

    partition = prepare_partition(
        graph_after, x_after, ue, hie, state.soft, state.params,
        x_before=state.x_tilde, num_classes=state.num_classes,
        positives_per_anchor=cfg.positives, negatives_per_anchor=cfg.negatives,
        seed=seed)
    params, log = finetune(state.params, partition, x_after, cfg.finetune_config())

    new_state = PipelineState(graph=graph_after, op=op_after, x_tilde=x_after,
                              params=params, soft=predict(params, x_after),
                              history=[e["total"] for e in log.epochs],
                              num_classes=state.num_classes)
    return UnlearnOutcome(state=new_state, ue=ue, hie=hie, selection=selection,
                          partition=partition, log=log)


def retrain_state(graph: Graph, request: UnlearnRequest, cfg: RunConfig,
                  seed: int) -> PipelineState:
    """The from-scratch oracle: remove, then train a fresh model."""
    graph_after = apply_removal(graph, request)
    return train_state(graph_after, cfg, seed)


def test_f1(state: PipelineState) -> float:
    pred = np.argmax(state.soft, axis=1)
    return f1_score(pred, state.graph.labels, state.graph.test_mask)


class Pipeline:
    """Callable bundle handed to edge_attack_run."""

    def __init__(self, cfg: RunConfig, seed: int):
        self.cfg = cfg
        self.seed = seed

    def train(self, graph: Graph) -> PipelineState:
        return train_state(graph, self.cfg, self.seed)

    def unlearn(self, state: PipelineState, request: UnlearnRequest) -> PipelineState:
        return unlearn_state(state, request, self.cfg, self.seed).state

    def test_f1(self, state: PipelineState) -> float:
        return test_f1(state)
