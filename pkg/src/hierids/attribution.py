"""Decision-path attributions on trained forests and the ranked-subset
search that combines them with the selection ranking.

Walking a record from root to leaf, the change in the node class
distribution at every split is credited to the split feature; summed over
the path and averaged over trees this is additive by construction:
root distribution + contributions = predicted probabilities, exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, LabelHierarchy, DEFAULT_HIERARCHY, coarsen_labels, _stratified_assign
from .learners import ForestParams, ForestModel, Tree, fit_forest, predict_labels
from .metrics import confusion, cv_aggregate, metric_table
from .seeds import derive_seed, substream


def _tree_path_contributions(tree: Tree, record: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bias = tree.probs[0].copy()
    contrib = np.zeros((tree.n_features, tree.probs.shape[1]))
    node = 0
    while tree.feature[node] >= 0:
        f = int(tree.feature[node])
        nxt = int(tree.left[node]) if record[f] < tree.threshold[node] else int(tree.right[node])
        contrib[f] += tree.probs[nxt] - tree.probs[node]
        node = nxt
    return bias, contrib


def path_contributions(model, record) -> tuple[np.ndarray, np.ndarray]:
    """(bias, contributions) for one record: bias is the class distribution
    at the root (averaged over trees for a forest), contributions is an
    (n_features, n_classes) matrix of signed per-split credits."""
    record = np.asarray(record, dtype=np.float64).ravel()
    if isinstance(model, ForestModel):
        if record.shape[0] != model.n_features:
            raise ValueError(f"model expects {model.n_features} features, got {record.shape[0]}")
        bias = np.zeros(len(model.classes))
        contrib = np.zeros((model.n_features, len(model.classes)))
        for tree in model.trees:
            b, c = _tree_path_contributions(tree, record)
            bias += b
            contrib += c
        t = len(model.trees)
        return bias / t, contrib / t
    if isinstance(model, Tree):
        if record.shape[0] != model.n_features:
            raise ValueError(f"tree expects {model.n_features} features, got {record.shape[0]}")
        return _tree_path_contributions(model, record)
    raise TypeError(f"path attribution needs a tree model, got {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class AttributionReport:
    """Aggregate path attributions over an evaluation set.

    mean_signed / mean_abs are (feature, class) means over all evaluated
    records. The negative-impact screen uses active_mean_signed instead: the
    mean contribution over records where the feature is expressed (value at
    or above 0.5), since over a full evaluation set the signed mean of a
    split-preserving attribution telescopes to nearly zero for every feature.
    """

    feature_names: tuple[str, ...]
    classes: tuple[str, ...]
    mean_signed: np.ndarray
    mean_abs: np.ndarray
    active_mean_signed: np.ndarray
    target_class: str
    flagged: tuple[str, ...]

    def global_score(self) -> np.ndarray:
        """Per-feature score: mean |contribution| over classes."""
        return self.mean_abs.mean(axis=1)

    def to_jsonable(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "classes": list(self.classes),
            "mean_signed": [[float(v) for v in row] for row in self.mean_signed],
            "mean_abs": [[float(v) for v in row] for row in self.mean_abs],
            "active_mean_signed": [
                [float(v) for v in row] for row in self.active_mean_signed
            ],
            "global_score": [float(v) for v in self.global_score()],
            "target_class": self.target_class,
            "flagged": list(self.flagged),
        }


def attribution_report(model: ForestModel, eval_records, target_class: str,
                       feature_names=None) -> AttributionReport:
    """Aggregate per-feature contributions and flag negative-impact features
    (expressed-value mean pushing away from the target class)."""
    X = np.asarray(eval_records, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("evaluation set must be a non-empty 2-D array")
    if target_class not in model.classes:
        raise ValueError(f"target class {target_class!r} not among {model.classes}")
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"feature_{i}" for i in range(model.n_features)
    )
    if len(names) != model.n_features:
        raise ValueError("feature names must match the model dimension")

    m, c = model.n_features, len(model.classes)
    signed = np.zeros((m, c))
    absolute = np.zeros((m, c))
    active_sum = np.zeros((m, c))
    active_n = np.zeros(m)
    for row in X:
        _, contrib = path_contributions(model, row)
        signed += contrib
        absolute += np.abs(contrib)
        active = row >= 0.5
        active_sum[active] += contrib[active]
        active_n += active
    n = X.shape[0]
    signed /= n
    absolute /= n
    active_mean = np.zeros((m, c))
    has_active = active_n > 0
    active_mean[has_active] = active_sum[has_active] / active_n[has_active, None]

    target_idx = model.classes.index(target_class)
    flagged = tuple(
        names[i] for i in range(m) if has_active[i] and active_mean[i, target_idx] < 0.0
    )
    return AttributionReport(
        feature_names=names,
        classes=model.classes,
        mean_signed=signed,
        mean_abs=absolute,
        active_mean_signed=active_mean,
        target_class=target_class,
        flagged=flagged,
    )


@dataclass(frozen=True)
class SearchStep:
    features: tuple[str, ...]
    weighted_f1: float
    macro_f1: float
    accepted: bool
    phase: str  # "prefix" or "probe"


@dataclass(frozen=True, eq=False)
class SubsetSearchResult:
    selected: tuple[str, ...]
    trace: tuple[SearchStep, ...]
    skipped: tuple[str, ...]
    reached_target: bool
    best_weighted_f1: float

    def to_jsonable(self) -> dict:
        return {
            "selected": list(self.selected),
            "skipped": list(self.skipped),
            "reached_target": self.reached_target,
            "best_weighted_f1": float(self.best_weighted_f1),
            "trace": [
                {
                    "set_size": len(s.features),
                    "features": list(s.features),
                    "weighted_f1": float(s.weighted_f1),
                    "macro_f1": float(s.macro_f1),
                    "accepted": s.accepted,
                    "phase": s.phase,
                }
                for s in self.trace
            ],
        }

    def trace_csv_rows(self) -> list[list[str]]:
        rows = [["set_size", "features", "weighted_f1", "macro_f1", "accepted", "phase"]]
        for s in self.trace:
            rows.append([
                str(len(s.features)),
                ";".join(s.features),
                f"{s.weighted_f1:.4f}",
                f"{s.macro_f1:.4f}",
                str(s.accepted).lower(),
                s.phase,
            ])
        return rows


@dataclass(frozen=True)
class SearchConfig:
    cv_k: int = 5
    eps: float = 0.05  # minimum F1-point gain that counts as improvement
    patience: int = 3
    target_f1: float = 100.0
    slack: float = 0.0
    forest: ForestParams = field(default_factory=lambda: ForestParams(n_trees=25))
    seed: int = 0


def _cv_weighted_f1(records, labels, classes, feature_idx, config: SearchConfig):
    """Stratified-CV weighted and macro F1 (percent) for one candidate set."""
    rng = substream(config.seed, "subset-search-folds")
    fold_of, _ = _stratified_assign(labels, config.cv_k, rng)
    X = records[:, feature_idx]
    tables = []
    for fold in range(config.cv_k):
        train = fold_of != fold
        test = ~train
        if not test.any() or not train.any():
            continue
        params = ForestParams(
            n_trees=config.forest.n_trees,
            max_depth=config.forest.max_depth,
            min_leaf=config.forest.min_leaf,
            features_per_split=config.forest.features_per_split,
            bootstrap=config.forest.bootstrap,
            random_thresholds=config.forest.random_thresholds,
            seed=derive_seed(config.seed, "subset-search", fold),
        )
        model = fit_forest(X[train], labels[train], params, classes=classes)
        preds = predict_labels(model, X[test])
        tables.append(metric_table(confusion(labels[test], preds, classes)))
    agg = cv_aggregate(tables)
    return agg.weighted_f1, agg.macro_f1


def guided_subset_search(ranking, ds: Dataset, level: int, budget: int,
                         cv_k: int | None = None,
                         hierarchy: LabelHierarchy = DEFAULT_HIERARCHY,
                         flagged=(), config: SearchConfig = SearchConfig()) -> SubsetSearchResult:
    """Grow a feature set along the ranking, skip stretches that stop paying,
    then probe deeper ranks one at a time (negative-flagged features last).

    The prefix walk keeps extending while any of the last `patience` ranks
    improved weighted F1 by at least `eps`; once a full patience window
    stalls, those ranks are recorded as skipped and removed, and remaining
    ranks are probed individually on top of the kept base. The search stops
    at the first set reaching the target F1 (minus slack) or at the budget.
    """
    ranking = tuple(ranking)
    if not ranking:
        raise ValueError("ranking must not be empty")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > len(ranking):
        raise ValueError("budget cannot exceed the ranking length")
    if cv_k is not None:
        config = replace(config, cv_k=cv_k)
    labels = coarsen_labels(ds.labels, hierarchy, level)
    classes = tuple(sorted(set(labels.tolist())))
    name_to_idx = {n: i for i, n in enumerate(ds.schema.feature_names)}
    try:
        rank_idx = {n: name_to_idx[n] for n in ranking}
    except KeyError as exc:
        raise ValueError(f"ranked feature {exc.args[0]!r} not in the dataset") from None
    target = config.target_f1 - config.slack
    flagged = set(flagged)

    trace: list[SearchStep] = []
    skipped: list[str] = []
    selected: list[str] = []
    best = -np.inf

    def evaluate(cand: list[str]):
        idx = [rank_idx[n] for n in cand]
        return _cv_weighted_f1(ds.records, labels, classes, idx, config)

    def finish(reached: bool) -> SubsetSearchResult:
        return SubsetSearchResult(
            selected=tuple(selected),
            trace=tuple(trace),
            skipped=tuple(skipped),
            reached_target=reached,
            best_weighted_f1=float(best if np.isfinite(best) else 0.0),
        )

    # Prefix walk along the ranking.
    stall: list[str] = []
    probe_start = len(ranking)
    for pos, feat in enumerate(ranking):
        cand = selected + [feat]
        wf1, mf1 = evaluate(cand)
        improved = wf1 >= best + config.eps
        reached = wf1 >= target
        trace.append(SearchStep(tuple(cand), wf1, mf1, improved or reached, "prefix"))
        selected = cand
        best = max(best, wf1)
        if reached:
            return finish(True)
        if improved:
            stall = []
        else:
            stall.append(feat)
            if len(stall) >= config.patience:
                for name in stall:
                    selected.remove(name)
                    skipped.append(name)
                stall = []
                probe_start = pos + 1
                break
        if len(selected) >= budget:
            return finish(False)

    # Probe deeper ranks one at a time on top of the kept base.
    remaining = list(ranking[probe_start:])
    remaining.sort(key=lambda n: n in flagged)  # stable: flagged go last
    for feat in remaining:
        if len(selected) >= budget:
            break
        cand = selected + [feat]
        wf1, mf1 = evaluate(cand)
        improved = wf1 >= best + config.eps
        reached = wf1 >= target
        trace.append(SearchStep(tuple(cand), wf1, mf1, improved or reached, "probe"))
        if reached:
            selected = cand
            best = max(best, wf1)
            return finish(True)
        if improved:
            selected = cand
            best = wf1
        else:
            skipped.append(feat)
    return finish(False)
