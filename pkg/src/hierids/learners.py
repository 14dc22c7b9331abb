"""Base learners built directly on numpy: a Gini decision tree, a bootstrap
random forest with out-of-bag permutation importance, and multinomial
logistic regression, all behind one predict_proba surface.

Trees are stored as flat node arrays (feature / threshold / child pointers /
per-node class distribution) so prediction and serialization stay cheap.
Determinism contract: identical (data, params, seed) gives bit-identical
models; every tree draws from its own substream so serial and parallel
fits agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeds import substream

_GAIN_EPS = 1e-9  # minimum cost improvement for a split to count as gain


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class NoOutOfBagError(RuntimeError):
    """No tree retained any out-of-bag rows, importance is undefined."""


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | str | None = None  # None/"all" -> every feature
    random_thresholds: bool = False
    seed: int = 0


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | str | None = None  # None -> ceil(sqrt(M)), "all" -> M
    bootstrap: bool = True
    random_thresholds: bool = False
    seed: int = 0


def single_tree_params(**kw) -> ForestParams:
    """Plain decision tree preset: one tree, no bootstrap, all features."""
    return ForestParams(n_trees=1, bootstrap=False, features_per_split="all", **kw)


def extra_trees_params(**kw) -> ForestParams:
    """Extra-trees preset: no bootstrap, one random threshold per candidate."""
    return ForestParams(bootstrap=False, random_thresholds=True, **kw)


@dataclass(eq=False)
class Tree:
    """Flat-array decision tree. feature[i] == -1 marks a leaf; probs holds
    the class distribution at every node (internal ones included)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    probs: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature >= 0])

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max(initial=0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index per row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            internal = np.flatnonzero(self.feature[node] >= 0)
            if internal.size == 0:
                return node
            cur = node[internal]
            go_left = X[internal, self.feature[cur]] < self.threshold[cur]
            node[internal] = np.where(go_left, self.left[cur], self.right[cur])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.probs[self.apply(X)]


@dataclass(eq=False)
class ForestModel:
    trees: list[Tree]
    bootstrap_indices: np.ndarray  # (T, N)
    classes: tuple[str, ...]
    n_features: int
    n_samples: int
    params: ForestParams

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        acc = np.zeros((np.asarray(X).shape[0], len(self.classes)))
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / len(self.trees)


@dataclass(eq=False)
class LogisticModel:
    weights: np.ndarray  # (C, M)
    bias: np.ndarray  # (C,)
    classes: tuple[str, ...]
    loss_history: np.ndarray

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z = np.asarray(X, dtype=np.float64) @ self.weights.T + self.bias
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    """Mean out-of-bag accuracy drop per feature plus its spread over trees."""

    importance: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        imp = np.asarray(self.importance, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if imp.shape != std.shape or imp.ndim != 1:
            raise ValueError("importance and std must be matching vectors")
        if np.any(std < 0):
            raise ValueError("std must be non-negative")
        object.__setattr__(self, "importance", imp)
        object.__setattr__(self, "std", std)


def encode_labels(y, classes=None) -> tuple[np.ndarray, tuple[str, ...]]:
    y = np.asarray(y, dtype=object)
    if classes is None:
        classes = tuple(sorted(set(y.tolist())))
    else:
        classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    try:
        codes = np.array([index[v] for v in y], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in class list") from None
    return codes, classes


def _resolve_k(spec, m: int, default_all: bool) -> int:
    if spec is None:
        return m if default_all else max(1, math.ceil(math.sqrt(m)))
    if spec == "all":
        return m
    k = int(spec)
    if k < 1:
        raise ValueError("features_per_split must be >= 1")
    return min(k, m)


def _best_split(X, y, idx, feats, n_classes, min_leaf, rng, random_thresholds):
    """Best (cost, feature, threshold) among candidate features, or None.

    Cost is n_L*gini_L + n_R*gini_R computed from integer class counts, so
    equal-gain candidates compare exactly and the (lowest feature, lowest
    threshold) tie-break is stable. Binary {0,1} columns go through a single
    matmul; anything else falls back to a sorted scan over value midpoints.
    """
    n = idx.size
    sub = X[idx][:, feats]
    y_node = y[idx]
    counts = np.bincount(y_node, minlength=n_classes).astype(np.int64)
    parent_cost = (n * n - float((counts**2).sum())) / n

    best = None  # (cost, global feature, threshold)

    def consider(cost, f, thr):
        nonlocal best
        cand = (float(cost), int(f), float(thr))
        if best is None or cand < best:
            best = cand

    if random_thresholds:
        for j, f in enumerate(feats):
            col = sub[:, j]
            lo = col.min()
            hi = col.max()
            if lo == hi:
                continue
            thr = rng.uniform(lo, hi)
            left = col < thr
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            lc = np.bincount(y_node[left], minlength=n_classes).astype(np.int64)
            rc = counts - lc
            cost = (nl * nl - float((lc**2).sum())) / nl + (
                (n - nl) ** 2 - float((rc**2).sum())
            ) / (n - nl)
            consider(cost, f, thr)
    else:
        is_binary = np.all((sub == 0.0) | (sub == 1.0), axis=0)
        bin_j = np.flatnonzero(is_binary)
        if bin_j.size:
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), y_node] = 1.0
            ones = onehot.T @ sub[:, bin_j]  # (C, b) rows where x == 1
            n1 = sub[:, bin_j].sum(axis=0)
            n0 = n - n1
            zeros = counts[:, None] - ones
            valid = (n0 >= min_leaf) & (n1 >= min_leaf) & (n0 > 0) & (n1 > 0)
            if valid.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    cost = (n0 * n0 - (zeros**2).sum(axis=0)) / n0 + (
                        n1 * n1 - (ones**2).sum(axis=0)
                    ) / n1
                cost = np.where(valid, cost, np.inf)
                j = int(np.argmin(cost))  # first minimum -> lowest feature index
                if np.isfinite(cost[j]):
                    consider(float(cost[j]), feats[bin_j[j]], 0.5)
        for j in np.flatnonzero(~is_binary):
            col = sub[:, j]
            order = np.argsort(col, kind="stable")
            sc = col[order]
            if sc[0] == sc[-1]:
                continue
            sy = y_node[order]
            onehot = np.zeros((n, n_classes), dtype=np.int64)
            onehot[np.arange(n), sy] = 1
            cum = onehot.cumsum(axis=0)
            bounds = np.flatnonzero(sc[:-1] != sc[1:])
            for b in bounds:
                nl = b + 1
                nr = n - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                lc = cum[b]
                rc = counts - lc
                cost = (nl * nl - float((lc**2).sum())) / nl + (
                    nr * nr - float((rc**2).sum())
                ) / nr
                consider(cost, feats[j], (sc[b] + sc[b + 1]) / 2.0)

    if best is None or best[0] >= parent_cost - _GAIN_EPS:
        return None
    return best


def _grow_tree(X, y, n_classes, max_depth, min_leaf, k_features, random_thresholds, rng):
    n_total, m = X.shape
    feature, threshold, left, right, probs = [], [], [], [], []
    # stack entries: (row indices, depth, parent node id, is-left-child)
    stack = [(np.arange(n_total), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = node_id
            else:
                right[parent] = node_id
        counts = np.bincount(y[idx], minlength=n_classes)
        probs.append(counts / idx.size)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)

        if counts.max() == idx.size:  # pure
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if idx.size < 2 * min_leaf:
            continue
        if k_features < m:
            feats = np.sort(rng.choice(m, size=k_features, replace=False))
        else:
            feats = np.arange(m)
        split = _best_split(X, y, idx, feats, n_classes, min_leaf, rng, random_thresholds)
        if split is None:
            continue
        _, f, thr = split
        feature[node_id] = f
        threshold[node_id] = thr
        go_left = X[idx, f] < thr
        # right pushed first so the left child is grown (and numbered) first
        stack.append((idx[~go_left], depth + 1, node_id, False))
        stack.append((idx[go_left], depth + 1, node_id, True))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        probs=np.asarray(probs, dtype=np.float64),
        n_features=m,
    )


def fit_tree(X, y, params: TreeParams = TreeParams(), classes=None) -> tuple[Tree, tuple[str, ...]]:
    """Greedy Gini tree. Returns (tree, class list)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D array")
    codes, classes = encode_labels(y, classes)
    if codes.shape[0] != X.shape[0]:
        raise ValueError("X and y lengths differ")
    k = _resolve_k(params.features_per_split, X.shape[1], default_all=True)
    rng = substream(params.seed, "tree", 0)
    tree = _grow_tree(X, codes, len(classes), params.max_depth, params.min_leaf,
                      k, params.random_thresholds, rng)
    return tree, classes


def fit_forest(X, y, params: ForestParams = ForestParams(), classes=None) -> ForestModel:
    """Bootstrap forest; per-tree sample indices are retained for OOB work."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D array")
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    codes, classes = encode_labels(y, classes)
    n, m = X.shape
    k = _resolve_k(params.features_per_split, m, default_all=False)
    trees = []
    boots = np.empty((params.n_trees, n), dtype=np.int64)
    for t in range(params.n_trees):
        rng = substream(params.seed, "tree", t)
        if params.bootstrap:
            boot = rng.integers(0, n, size=n)
        else:
            boot = np.arange(n)
        boots[t] = boot
        trees.append(
            _grow_tree(X[boot], codes[boot], len(classes), params.max_depth,
                       params.min_leaf, k, params.random_thresholds, rng)
        )
    return ForestModel(trees, boots, classes, m, n, params)


def predict_proba(model, X) -> np.ndarray:
    """Class-probability rows for any trained model kind."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if isinstance(model, (ForestModel, LogisticModel)):
        want = model.weights.shape[1] if isinstance(model, LogisticModel) else model.n_features
    elif isinstance(model, Tree):
        want = model.n_features
    else:
        raise TypeError(f"cannot predict with {type(model).__name__}")
    if X.shape[1] != want:
        raise ValueError(f"model expects {want} features, got {X.shape[1]}")
    return model.predict_proba(X)


def predict_labels(model, X, classes=None) -> np.ndarray:
    cls = classes if classes is not None else model.classes
    probs = predict_proba(model, X)
    picks = probs.argmax(axis=1)
    return np.array([cls[i] for i in picks], dtype=object)


def permutation_importance(model: ForestModel, X, y) -> ImportanceVector:
    """Per-feature out-of-bag error increase after permuting that feature.

    Each tree scores only its own out-of-bag rows; features a tree never
    splits on contribute exactly zero for that tree. Trees without any
    out-of-bag rows are skipped; if none remain this raises.
    """
    X = np.asarray(X, dtype=np.float64)
    codes, _ = encode_labels(y, model.classes)
    n, m = X.shape
    if m != model.n_features:
        raise ValueError("feature dimension does not match the model")
    contrib = np.zeros((model.n_trees, m))
    usable = np.zeros(model.n_trees, dtype=bool)
    for t, tree in enumerate(model.trees):
        in_bag = np.zeros(n, dtype=bool)
        in_bag[model.bootstrap_indices[t]] = True
        oob = np.flatnonzero(~in_bag)
        if oob.size == 0:
            continue
        usable[t] = True
        Xo = X[oob].copy()
        yo = codes[oob]
        base_err = float(np.mean(tree.predict_proba(Xo).argmax(axis=1) != yo))
        rng = substream(model.params.seed, "oob-perm", t)
        for f in tree.used_features():
            saved = Xo[:, f].copy()
            Xo[:, f] = saved[rng.permutation(oob.size)]
            err = float(np.mean(tree.predict_proba(Xo).argmax(axis=1) != yo))
            Xo[:, f] = saved
            contrib[t, f] = err - base_err
    if not usable.any():
        raise NoOutOfBagError(
            f"no out-of-bag rows across {model.n_trees} trees on {n} samples"
        )
    rows = contrib[usable]
    importance = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.zeros(m)
    return ImportanceVector(importance, std)


@dataclass(frozen=True)
class LogisticParams:
    learning_rate: float = 0.5
    epochs: int = 300
    seed: int = 0  # interface parity; full-batch descent is deterministic


def fit_logistic(X, y, params: LogisticParams = LogisticParams(), classes=None) -> LogisticModel:
    """Multinomial cross-entropy minimised by full-batch gradient descent.

    Weights start at zero, so epoch count 0 (or zero learning rate) leaves a
    uniform-probability model. Raises on non-finite loss.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D array")
    codes, classes = encode_labels(y, classes)
    n, m = X.shape
    c = len(classes)
    W = np.zeros((c, m))
    b = np.zeros(c)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), codes] = 1.0
    history = []

    def epoch_loss():
        z = X @ W.T + b
        z = z - z.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(z).sum(axis=1))
        loss = float(np.mean(logsum - z[np.arange(n), codes]))
        if not np.isfinite(loss):
            raise DivergenceError(
                f"loss diverged with learning rate {params.learning_rate}"
            )
        return loss, np.exp(z - logsum[:, None])

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(params.epochs):
            loss, p = epoch_loss()
            history.append(loss)
            grad = (p - onehot) / n
            W -= params.learning_rate * (grad.T @ X)
            b -= params.learning_rate * grad.sum(axis=0)
        final, _ = epoch_loss()
    history.append(final)
    return LogisticModel(W, b, classes, np.asarray(history))


def complexity_estimate(tree_count, feature_count, sample_count, depth=None) -> dict:
    """Operation-count estimates for training and per-record prediction.

    Scalars describe one classifier; sequences describe a cascade, with one
    (trees, samples) pair per level sharing the feature count. Depth defaults
    to the balanced-tree ceil(log2 N).
    """
    ts = list(tree_count) if np.iterable(tree_count) else [tree_count]
    ns = list(sample_count) if np.iterable(sample_count) else [sample_count]
    if len(ts) != len(ns):
        raise ValueError("tree and sample counts must pair up per level")
    m = int(feature_count)
    if m < 1 or any(int(t) < 1 for t in ts) or any(int(n) < 1 for n in ns):
        raise ValueError("all counts must be positive")
    train_ops = 0
    predict_ops = 0
    for t, n in zip(ts, ns):
        t, n = int(t), int(n)
        d = int(depth) if depth is not None else math.ceil(math.log2(n)) if n > 1 else 1
        train_ops += t * m * n * d
        predict_ops += t * d * m
    return {"train_ops": train_ops, "predict_ops_per_record": predict_ops}


# ---------------------------------------------------------------------------
# Serialization: versioned JSON documents that round-trip bit-exactly.

_FORMAT = "hierids-model"
_VERSION = 1


def model_to_document(model) -> dict:
    if isinstance(model, ForestModel):
        return {
            "format": _FORMAT,
            "version": _VERSION,
            "kind": "forest",
            "classes": list(model.classes),
            "n_features": int(model.n_features),
            "n_samples": int(model.n_samples),
            "params": {
                "n_trees": model.params.n_trees,
                "max_depth": model.params.max_depth,
                "min_leaf": model.params.min_leaf,
                "features_per_split": model.params.features_per_split,
                "bootstrap": model.params.bootstrap,
                "random_thresholds": model.params.random_thresholds,
                "seed": model.params.seed,
            },
            "bootstrap_indices": [[int(i) for i in row] for row in model.bootstrap_indices],
            "trees": [_tree_to_doc(t) for t in model.trees],
        }
    if isinstance(model, LogisticModel):
        return {
            "format": _FORMAT,
            "version": _VERSION,
            "kind": "logistic",
            "classes": list(model.classes),
            "weights": [[float(v) for v in row] for row in model.weights],
            "bias": [float(v) for v in model.bias],
            "loss_history": [float(v) for v in model.loss_history],
        }
    if isinstance(model, Tree):
        doc = _tree_to_doc(model)
        doc.update({"format": _FORMAT, "version": _VERSION, "kind": "tree"})
        return doc
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _tree_to_doc(tree: Tree) -> dict:
    return {
        "feature": [int(v) for v in tree.feature],
        "threshold": [None if np.isnan(v) else float(v) for v in tree.threshold],
        "left": [int(v) for v in tree.left],
        "right": [int(v) for v in tree.right],
        "probs": [[float(v) for v in row] for row in tree.probs],
        "n_features": int(tree.n_features),
    }


def _tree_from_doc(doc: dict) -> Tree:
    return Tree(
        feature=np.asarray(doc["feature"], dtype=np.int64),
        threshold=np.asarray(
            [np.nan if v is None else v for v in doc["threshold"]], dtype=np.float64
        ),
        left=np.asarray(doc["left"], dtype=np.int64),
        right=np.asarray(doc["right"], dtype=np.int64),
        probs=np.asarray(doc["probs"], dtype=np.float64),
        n_features=int(doc["n_features"]),
    )


def model_from_document(doc: dict):
    if doc.get("format") != _FORMAT:
        raise ValueError("not a model document")
    if doc.get("version") != _VERSION:
        raise ValueError(f"unsupported model document version {doc.get('version')!r}")
    kind = doc.get("kind")
    if kind == "forest":
        p = doc["params"]
        params = ForestParams(
            n_trees=p["n_trees"],
            max_depth=p["max_depth"],
            min_leaf=p["min_leaf"],
            features_per_split=p["features_per_split"],
            bootstrap=p["bootstrap"],
            random_thresholds=p["random_thresholds"],
            seed=p["seed"],
        )
        return ForestModel(
            trees=[_tree_from_doc(t) for t in doc["trees"]],
            bootstrap_indices=np.asarray(doc["bootstrap_indices"], dtype=np.int64),
            classes=tuple(doc["classes"]),
            n_features=int(doc["n_features"]),
            n_samples=int(doc["n_samples"]),
            params=params,
        )
    if kind == "logistic":
        return LogisticModel(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=np.asarray(doc["bias"], dtype=np.float64),
            classes=tuple(doc["classes"]),
            loss_history=np.asarray(doc["loss_history"], dtype=np.float64),
        )
    if kind == "tree":
        return _tree_from_doc(doc)
    raise ValueError(f"unknown model kind {kind!r}")
