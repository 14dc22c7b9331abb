"""Shared builders and independent oracles used across the suite."""
from __future__ import annotations

import numpy as np

from hierids.dataset import FINE_CLASSES, SynthSpec, synth_generate


def make_separable(n_records=600, n_noise=2, seed=7, bias=1.0, mix=None):
    """Six-class set with one planted indicator feature per class."""
    if mix is None:
        mix = tuple((c, 1.0 / 6.0) for c in FINE_CLASSES)
    spec = SynthSpec(
        n_records=n_records,
        n_features=6 + n_noise,
        informative=tuple((i, FINE_CLASSES[i], bias) for i in range(6)),
        class_mix=mix,
    )
    return synth_generate(spec, seed=seed)


def brute_force_metrics(y_true, y_pred, classes):
    """Pair-counting metrics oracle, pure Python, fraction scale (not %)."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    n = len(y_true)
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / n
    per_class = {}
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = {"precision": precision, "recall": recall, "f1": f1,
                        "support": tp + fn}
    k = len(classes)
    total = sum(per_class[c]["support"] for c in classes)
    macro = {m: sum(per_class[c][m] for c in classes) / k
             for m in ("precision", "recall", "f1")}
    weighted = {m: sum(per_class[c][m] * per_class[c]["support"] for c in classes) / total
                for m in ("precision", "recall", "f1")}
    return {"accuracy": accuracy, "per_class": per_class,
            "macro": macro, "weighted": weighted}


def gini_fraction(labels) -> float:
    labels = list(labels)
    n = len(labels)
    out = 1.0
    for c in set(labels):
        out -= (labels.count(c) / n) ** 2
    return out


def exhaustive_min_weighted_gini(X, y):
    """Enumerate every (feature, midpoint threshold); return the minimum
    weighted child Gini and the set of minimising (feature, threshold)."""
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    y = list(y)
    best = None
    argbest = []
    for f in range(m):
        values = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2.0
            left = [y[i] for i in range(n) if X[i, f] < thr]
            right = [y[i] for i in range(n) if X[i, f] >= thr]
            cost = (len(left) * gini_fraction(left) + len(right) * gini_fraction(right)) / n
            if best is None or cost < best - 1e-15:
                best = cost
                argbest = [(f, thr)]
            elif abs(cost - best) <= 1e-15:
                argbest.append((f, thr))
    return best, argbest


def weighted_gini_of_split(X, y, feature, threshold) -> float:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    y = list(y)
    left = [y[i] for i in range(n) if X[i, feature] < threshold]
    right = [y[i] for i in range(n) if X[i, feature] >= threshold]
    return (len(left) * gini_fraction(left) + len(right) * gini_fraction(right)) / n
