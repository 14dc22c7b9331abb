"""In-process federated averaging over a small dense network.

The net is three rectified hidden layers with per-layer dropout and a
softmax head, trained with mini-batch adaptive-moment updates on
categorical cross-entropy. Federation shards the data across clients,
trains locally, and aggregates with a sample-count-weighted parameter
mean each round. Everything runs double precision so the gradient can be
checked against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import (
    DEFAULT_HIERARCHY,
    Dataset,
    LabelHierarchy,
    _stratified_assign,
    coarsen_labels,
)
from .learners import DivergenceError, encode_labels
from .metrics import MetricTable, confusion, metric_table
from .seeds import substream


@dataclass(eq=False)
class MLPModel:
    """Dense network parameters: weights[i] maps layer i to layer i+1."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout: float
    classes: tuple[str, ...]

    def copy(self) -> "MLPModel":
        return MLPModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.dropout,
            self.classes,
        )

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        probs, _ = mlp_forward(self, np.asarray(X, dtype=np.float64))
        return probs


@dataclass(frozen=True)
class FedConfig:
    n_clients: int = 10
    rounds: int = 5
    local_epochs: int = 50
    batch_size: int = 25
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: tuple[int, int, int] = (64, 32, 16)
    dropout: float = 0.2
    shard_strategy: str = "stratified-iid"
    test_fraction: float = 0.2
    early_stop_patience: int | None = None  # rounds without loss improvement
    early_stop_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        for name in ("n_clients", "rounds", "local_epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.shard_strategy != "stratified-iid":
            raise ValueError(f"unknown shard strategy {self.shard_strategy!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1 when set")


def init_mlp(n_features: int, classes, hidden=(64, 32, 16), dropout: float = 0.2,
             seed: int = 0) -> MLPModel:
    """He-initialised network with the given hidden widths."""
    classes = tuple(classes)
    rng = substream(seed, "mlp-init")
    sizes = [int(n_features), *[int(h) for h in hidden], len(classes)]
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(weights, biases, float(dropout), classes)


def mlp_forward(model: MLPModel, X: np.ndarray, dropout_rng=None):
    """Forward pass. Dropout masks are drawn only when a generator is given
    (training); inference scales nothing because masks are inverted."""
    acts = [np.asarray(X, dtype=np.float64)]
    masks = []
    h = acts[0]
    n_hidden = len(model.weights) - 1
    for i in range(n_hidden):
        z = h @ model.weights[i] + model.biases[i]
        h = np.maximum(z, 0.0)
        if dropout_rng is not None and model.dropout > 0.0:
            keep = dropout_rng.random(h.shape) >= model.dropout
            h = h * keep / (1.0 - model.dropout)
            masks.append(keep)
        else:
            masks.append(None)
        acts.append(h)
    z = h @ model.weights[-1] + model.biases[-1]
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    probs = np.exp(z - log_norm)
    return probs, (acts, masks, z - log_norm)


def mlp_loss_grads(model: MLPModel, X: np.ndarray, codes: np.ndarray, dropout_rng=None):
    """Mean cross-entropy and its gradients for one batch."""
    probs, (acts, masks, log_probs) = mlp_forward(model, X, dropout_rng)
    n = X.shape[0]
    loss = float(-log_probs[np.arange(n), codes].mean())
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), codes] = 1.0
    delta = (probs - onehot) / n
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
            if masks[i - 1] is not None:
                delta = delta * masks[i - 1] / (1.0 - model.dropout)
            delta = delta * (acts[i] > 0.0)
    return loss, grads_w, grads_b


def local_train(model: MLPModel, X, y, config: FedConfig, *, round_idx: int = 0,
                client_id: int = 0, classes=None) -> MLPModel:
    """Mini-batch training on one client's shard; deterministic given
    (seed, client id, round). Optimiser state starts fresh each call."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("shard is empty")
    codes, _ = encode_labels(y, classes if classes is not None else model.classes)
    rng = substream(config.seed, "local-train", round_idx, client_id)
    out = model.copy()
    m_w = [np.zeros_like(w) for w in out.weights]
    v_w = [np.zeros_like(w) for w in out.weights]
    m_b = [np.zeros_like(b) for b in out.biases]
    v_b = [np.zeros_like(b) for b in out.biases]
    step = 0
    n = X.shape[0]
    for _ in range(config.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, gw, gb = mlp_loss_grads(out, X[batch], codes[batch], dropout_rng=rng)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"loss diverged with learning rate {config.learning_rate}"
                )
            step += 1
            c1 = 1.0 - config.beta1**step
            c2 = 1.0 - config.beta2**step
            for i in range(len(out.weights)):
                m_w[i] = config.beta1 * m_w[i] + (1 - config.beta1) * gw[i]
                v_w[i] = config.beta2 * v_w[i] + (1 - config.beta2) * gw[i] ** 2
                out.weights[i] -= config.learning_rate * (m_w[i] / c1) / (
                    np.sqrt(v_w[i] / c2) + config.adam_eps
                )
                m_b[i] = config.beta1 * m_b[i] + (1 - config.beta1) * gb[i]
                v_b[i] = config.beta2 * v_b[i] + (1 - config.beta2) * gb[i] ** 2
                out.biases[i] -= config.learning_rate * (m_b[i] / c1) / (
                    np.sqrt(v_b[i] / c2) + config.adam_eps
                )
    return out


def fedavg(models: list[MLPModel], weights) -> MLPModel:
    """Sample-count-weighted mean of every parameter."""
    if not models:
        raise ValueError("need at least one model")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape[0] != len(models) or np.any(weights <= 0):
        raise ValueError("weights must be positive and pair with the models")
    ref = models[0]
    for m in models[1:]:
        if len(m.weights) != len(ref.weights) or m.classes != ref.classes or any(
            a.shape != b.shape for a, b in zip(m.weights, ref.weights)
        ):
            raise ValueError("models must share one architecture")
    # normalised weights keep the one-model case bit-exact (1.0 * theta)
    shares = weights / weights.sum()
    out = ref.copy()
    for i in range(len(ref.weights)):
        out.weights[i] = sum(s * m.weights[i] for s, m in zip(shares, models))
        out.biases[i] = sum(s * m.biases[i] for s, m in zip(shares, models))
    return out


def shard(ds: Dataset, n_clients: int, strategy: str = "stratified-iid",
          seed: int = 0) -> list[np.ndarray]:
    """Disjoint per-client index sets covering the dataset; stratified-iid
    keeps every client's class mix within one record of proportional."""
    if strategy != "stratified-iid":
        raise ValueError(f"unknown shard strategy {strategy!r}")
    if n_clients > ds.n_records:
        raise ValueError(f"{n_clients} clients but only {ds.n_records} records")
    if n_clients == 1:
        return [np.arange(ds.n_records)]
    rng = substream(seed, "shard", n_clients)
    assign, _ = _stratified_assign(ds.labels, n_clients, rng)
    return [np.flatnonzero(assign == c) for c in range(n_clients)]


@dataclass(frozen=True, eq=False)
class RoundRecord:
    round_idx: int
    table: MetricTable

    @property
    def accuracy(self) -> float:
        return self.table.accuracy


@dataclass(eq=False)
class FedRun:
    config: FedConfig
    level: int
    feature_names: tuple[str, ...]
    client_sizes: tuple[int, ...]
    rounds: list[RoundRecord]
    round_params: list[MLPModel]
    final_model: MLPModel

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].accuracy

    def to_jsonable(self) -> dict:
        return {
            "level": int(self.level),
            "features": list(self.feature_names),
            "client_sizes": [int(v) for v in self.client_sizes],
            "rounds": [
                {"round": r.round_idx, "metrics": r.table.to_jsonable()}
                for r in self.rounds
            ],
            "config": {
                "n_clients": self.config.n_clients,
                "rounds": self.config.rounds,
                "local_epochs": self.config.local_epochs,
                "batch_size": self.config.batch_size,
                "learning_rate": self.config.learning_rate,
                "hidden": list(self.config.hidden),
                "dropout": self.config.dropout,
                "shard_strategy": self.config.shard_strategy,
                "test_fraction": self.config.test_fraction,
                "seed": self.config.seed,
            },
        }


def run_federation(ds: Dataset, level: int, features, config: FedConfig = FedConfig(),
                   hierarchy: LabelHierarchy = DEFAULT_HIERARCHY) -> FedRun:
    """Broadcast / local-train / aggregate for the configured round count,
    scoring the global model on a held-out stratified split each round."""
    features = tuple(features)
    feat_idx = np.asarray([ds.feature_index(n) for n in features])
    labels = coarsen_labels(ds.labels, hierarchy, level)
    classes = hierarchy.classes_at(level)
    X = ds.records[:, feat_idx]

    # Held-out stratified test split.
    holdout_k = max(2, round(1.0 / config.test_fraction))
    rng = substream(config.seed, "fed-holdout")
    assign, _ = _stratified_assign(labels, holdout_k, rng)
    test_mask = assign == 0
    train_idx = np.flatnonzero(~test_mask)
    test_idx = np.flatnonzero(test_mask)

    shard_rng = substream(config.seed, "fed-shard")
    assign_clients, _ = (
        (np.zeros(train_idx.size, dtype=np.int64), [])
        if config.n_clients == 1
        else _stratified_assign(labels[train_idx], config.n_clients, shard_rng)
    )
    client_indices = [train_idx[assign_clients == c] for c in range(config.n_clients)]
    sizes = tuple(int(ci.size) for ci in client_indices)
    if any(s == 0 for s in sizes):
        raise ValueError("a client shard came out empty; fewer clients needed")

    global_model = init_mlp(len(features), classes, hidden=config.hidden,
                            dropout=config.dropout, seed=config.seed)
    rounds: list[RoundRecord] = []
    params_log: list[MLPModel] = []
    test_codes, _ = encode_labels(labels[test_idx], classes)
    best_loss = np.inf
    stall = 0
    for r in range(1, config.rounds + 1):
        locals_ = [
            local_train(global_model, X[ci], labels[ci], config,
                        round_idx=r, client_id=c, classes=classes)
            for c, ci in enumerate(client_indices)
        ]
        global_model = fedavg(locals_, sizes)
        params_log.append(global_model.copy())
        probs = global_model.predict_proba(X[test_idx])
        preds = np.array([classes[i] for i in probs.argmax(axis=1)], dtype=object)
        table = metric_table(confusion(labels[test_idx], preds, classes))
        rounds.append(RoundRecord(r, table))
        if config.early_stop_patience is not None:
            loss = float(-np.log(
                np.clip(probs[np.arange(test_idx.size), test_codes], 1e-12, None)
            ).mean())
            if loss < best_loss - config.early_stop_tol:
                best_loss = loss
                stall = 0
            else:
                stall += 1
                if stall >= config.early_stop_patience:
                    break
    return FedRun(
        config=config,
        level=level,
        feature_names=features,
        client_sizes=sizes,
        rounds=rounds,
        round_params=params_log,
        final_model=global_model,
    )
