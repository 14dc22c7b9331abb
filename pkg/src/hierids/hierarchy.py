"""The three-level cascade: benign/attack at the root, benign/DoS/spoofing
at level 2, six fine classes at level 3.

Levels are trained independently on coarsened labels over the same training
slice; routing only happens at prediction time. A record stops at the
vehicle when level 1 says benign, reaches the RSU when it says attack, and
goes on to the near-edge node only when level 2 calls spoofing.
"""
from __future__ import annotations

import time
import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    ATTACK,
    DEFAULT_HIERARCHY,
    SPOOFING,
    Dataset,
    FoldAssignment,
    LabelHierarchy,
    ScalerParams,
    coarsen_labels,
)
from .learners import (
    ForestParams,
    LogisticParams,
    extra_trees_params,
    fit_forest,
    fit_logistic,
    model_from_document,
    model_to_document,
    predict_labels,
    single_tree_params,
)
from .metrics import MetricTable, confusion, cv_aggregate, metric_table
from .seeds import derive_seed

LEARNER_KINDS = ("forest", "logistic", "tree", "extra")
TIER_VEHICLE = "vehicle"
TIER_RSU = "rsu"
TIER_NEAR_EDGE = "near_edge"

ROUTED = "routed"
FULL_CASCADE = "full-cascade"


@dataclass(frozen=True)
class LevelSpec:
    """One level's learner: kind, its parameters, and the feature subset."""

    kind: str
    features: tuple[str, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if len(self.features) == 0:
            raise ValueError("feature subset must not be empty")
        object.__setattr__(self, "features", tuple(self.features))


@dataclass(frozen=True)
class HierConfig:
    levels: tuple[LevelSpec, LevelSpec, LevelSpec]
    routing: str = ROUTED
    seed: int = 0

    def __post_init__(self):
        if len(self.levels) != 3:
            raise ValueError("a cascade needs exactly three level specs")
        if self.routing not in (ROUTED, FULL_CASCADE):
            raise ValueError(f"unknown routing mode {self.routing!r}")


@dataclass(eq=False)
class HierModel:
    models: tuple
    feature_indices: tuple[tuple[int, ...], ...]
    feature_names: tuple[tuple[str, ...], ...]
    classes: tuple[tuple[str, ...], ...]
    hierarchy: LabelHierarchy
    routing: str = ROUTED
    scaler: ScalerParams | None = None
    warnings: tuple[str, ...] = ()
    fit_seconds: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def n_features(self) -> int:
        return 1 + max(max(idx) for idx in self.feature_indices)


@dataclass(frozen=True)
class RoutedDecision:
    level1: str
    level2: str | None
    level3: str | None
    final: str
    consistent: bool
    tier_trace: tuple[str, ...]


def _fit_level(spec: LevelSpec, X, y, classes, seed):
    params = dict(spec.params)
    params.setdefault("seed", seed)
    if spec.kind == "forest":
        return fit_forest(X, y, ForestParams(**params), classes=classes)
    if spec.kind == "tree":
        return fit_forest(X, y, single_tree_params(**params), classes=classes)
    if spec.kind == "extra":
        return fit_forest(X, y, extra_trees_params(**params), classes=classes)
    return fit_logistic(X, y, LogisticParams(**params), classes=classes)


def train_hierarchy(ds: Dataset, config: HierConfig, train_indices,
                    hierarchy: LabelHierarchy = DEFAULT_HIERARCHY,
                    scaler: ScalerParams | None = None) -> HierModel:
    """Fit the three level classifiers on one training slice.

    Each level sees the full slice with its own feature subset and its own
    label granularity. Missing classes in the slice produce warnings and
    degenerate (single-leaf) behaviour rather than errors.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    if train_indices.size == 0:
        raise ValueError("training slice is empty")
    notes = []
    models = []
    indices = []
    names = []
    vocabs = []
    seconds = []
    for level in (1, 2, 3):
        spec = config.levels[level - 1]
        idx = tuple(ds.feature_index(n) for n in spec.features)
        vocab = hierarchy.classes_at(level)
        y = coarsen_labels(ds.labels[train_indices], hierarchy, level)
        present = set(y.tolist())
        missing = [c for c in vocab if c not in present]
        if missing:
            notes.append(f"level {level}: classes {missing} absent from the training slice")
        X = ds.records[np.ix_(train_indices, np.asarray(idx))]
        t0 = time.perf_counter()
        model = _fit_level(spec, X, y, vocab, derive_seed(config.seed, "level", level))
        seconds.append(time.perf_counter() - t0)
        models.append(model)
        indices.append(idx)
        names.append(spec.features)
        vocabs.append(vocab)
    if notes:
        _warnings.warn("; ".join(notes), stacklevel=2)
    return HierModel(
        models=tuple(models),
        feature_indices=tuple(indices),
        feature_names=tuple(names),
        classes=tuple(vocabs),
        hierarchy=hierarchy,
        routing=config.routing,
        scaler=scaler,
        warnings=tuple(notes),
        fit_seconds=tuple(seconds),
    )


def _level_predictions(model: HierModel, X: np.ndarray) -> list[np.ndarray]:
    preds = []
    for level in range(3):
        cols = np.asarray(model.feature_indices[level])
        preds.append(
            predict_labels(model.models[level], X[:, cols], classes=model.classes[level])
        )
    return preds


def route_batch(model: HierModel, X: np.ndarray, mode: str | None = None) -> dict:
    """Vectorised routing over many records.

    Returns arrays: level1/level2/level3 predictions (None entries where a
    level was not consulted in routed mode), the final label, the depth
    reached, the consistency flag, and the per-record tier trace length.
    """
    X = np.asarray(X, dtype=np.float64)
    mode = mode or model.routing
    p1, p2, p3 = _level_predictions(model, X)
    n = X.shape[0]
    level2 = np.full(n, None, dtype=object)
    level3 = np.full(n, None, dtype=object)
    final = np.empty(n, dtype=object)
    reached = np.ones(n, dtype=np.int64)
    consistent = np.ones(n, dtype=bool)

    if mode == ROUTED:
        at_l2 = p1 == ATTACK
        level2[at_l2] = p2[at_l2]
        at_l3 = at_l2 & (p2 == SPOOFING)
        level3[at_l3] = p3[at_l3]
        reached[at_l2] = 2
        reached[at_l3] = 3
        final[:] = p1
        final[at_l2] = p2[at_l2]
        final[at_l3] = p3[at_l3]
        coars2 = coarsen_labels(p3, model.hierarchy, 2)
        consistent[at_l3] = coars2[at_l3] == SPOOFING
    else:
        level2[:] = p2
        level3[:] = p3
        reached[:] = 3
        final[:] = p3
        coars2 = coarsen_labels(p3, model.hierarchy, 2)
        consistent = coars2 == p2
    return {
        "level1": p1,
        "level2": level2,
        "level3": level3,
        "final": final,
        "reached": reached,
        "consistent": consistent,
    }


def predict_routed(model: HierModel, record) -> RoutedDecision:
    """Route one record through the cascade (vehicle -> RSU -> near edge)."""
    record = np.asarray(record, dtype=np.float64).ravel()
    if record.shape[0] < model.n_features:
        raise ValueError(
            f"record has {record.shape[0]} features, model needs at least {model.n_features}"
        )
    out = route_batch(model, record[None, :])
    reached = int(out["reached"][0])
    trace = (TIER_VEHICLE, TIER_RSU, TIER_NEAR_EDGE)[:reached]
    return RoutedDecision(
        level1=str(out["level1"][0]),
        level2=None if out["level2"][0] is None else str(out["level2"][0]),
        level3=None if out["level3"][0] is None else str(out["level3"][0]),
        final=str(out["final"][0]),
        consistent=bool(out["consistent"][0]),
        tier_trace=trace,
    )


@dataclass(frozen=True, eq=False)
class RoutedStats:
    n_records: int
    accuracy: float  # final label vs truth coarsened to the depth reached, percent
    tier_counts: dict[str, int]
    routed_to_l3: int
    disagreements: int

    @property
    def disagreement_rate(self) -> float:
        return self.disagreements / self.routed_to_l3 if self.routed_to_l3 else 0.0

    def to_jsonable(self) -> dict:
        return {
            "n_records": int(self.n_records),
            "accuracy": float(self.accuracy),
            "tier_counts": {k: int(v) for k, v in self.tier_counts.items()},
            "routed_to_l3": int(self.routed_to_l3),
            "disagreements": int(self.disagreements),
            "disagreement_rate": float(self.disagreement_rate),
        }


@dataclass(frozen=True, eq=False)
class TimingBreakdown:
    train_per_level: tuple[float, ...]
    train_total: float
    test_total: float
    test_instances: int

    @property
    def test_per_instance(self) -> float:
        return self.test_total / self.test_instances if self.test_instances else 0.0

    def to_jsonable(self) -> dict:
        return {
            "train_per_level": [float(v) for v in self.train_per_level],
            "train_total": float(self.train_total),
            "test_total": float(self.test_total),
            "test_instances": int(self.test_instances),
            "test_per_instance": float(self.test_per_instance),
        }


@dataclass(frozen=True, eq=False)
class HierEvalResult:
    level_tables: dict[int, MetricTable]
    per_fold: dict[int, list[MetricTable]]
    routed: RoutedStats
    timing: TimingBreakdown


def _routed_truth(labels, hierarchy, reached) -> np.ndarray:
    truth = np.empty(labels.shape[0], dtype=object)
    for level in (1, 2, 3):
        mask = reached == level
        if mask.any():
            truth[mask] = coarsen_labels(labels[mask], hierarchy, level)
    return truth


def evaluate_hierarchy(ds: Dataset, config: HierConfig, folds: FoldAssignment,
                       hierarchy: LabelHierarchy = DEFAULT_HIERARCHY) -> HierEvalResult:
    """Cross-validated evaluation: each level scored flat on its own label
    granularity, plus the routed pipeline end to end."""
    if folds.k < 2:
        raise ValueError("need at least two folds")
    per_fold: dict[int, list[MetricTable]] = {1: [], 2: [], 3: []}
    tier_counts = {TIER_VEHICLE: 0, TIER_RSU: 0, TIER_NEAR_EDGE: 0}
    routed_correct = 0
    routed_total = 0
    routed_to_l3 = 0
    disagreements = 0
    train_secs = np.zeros(3)
    test_secs = 0.0
    test_count = 0

    for fold in range(folds.k):
        train_idx = folds.train_indices(fold)
        test_idx = folds.test_indices(fold)
        model = train_hierarchy(ds, config, train_idx, hierarchy)
        train_secs += np.asarray(model.fit_seconds)
        X_test = ds.records[test_idx]
        y_fine = ds.labels[test_idx]

        t0 = time.perf_counter()
        routed = route_batch(model, X_test, mode=config.routing)
        preds = _level_predictions(model, X_test)
        test_secs += time.perf_counter() - t0
        test_count += test_idx.size

        for level in (1, 2, 3):
            truth = coarsen_labels(y_fine, hierarchy, level)
            cm = confusion(truth, preds[level - 1], hierarchy.classes_at(level))
            per_fold[level].append(metric_table(cm))

        reached = routed["reached"]
        truth = _routed_truth(y_fine, hierarchy, reached)
        routed_correct += int((routed["final"] == truth).sum())
        routed_total += test_idx.size
        tier_counts[TIER_VEHICLE] += test_idx.size
        tier_counts[TIER_RSU] += int((reached >= 2).sum())
        tier_counts[TIER_NEAR_EDGE] += int((reached >= 3).sum())
        at_l3 = reached >= 3 if config.routing == ROUTED else np.ones(test_idx.size, bool)
        routed_to_l3 += int(at_l3.sum())
        disagreements += int((~routed["consistent"][at_l3]).sum())

    routed_stats = RoutedStats(
        n_records=routed_total,
        accuracy=100.0 * routed_correct / routed_total,
        tier_counts=tier_counts,
        routed_to_l3=routed_to_l3,
        disagreements=disagreements,
    )
    timing = TimingBreakdown(
        train_per_level=tuple(float(v) for v in train_secs),
        train_total=float(train_secs.sum()),
        test_total=float(test_secs),
        test_instances=test_count,
    )
    return HierEvalResult(
        level_tables={lvl: cv_aggregate(per_fold[lvl]) for lvl in (1, 2, 3)},
        per_fold=per_fold,
        routed=routed_stats,
        timing=timing,
    )


@dataclass(frozen=True, eq=False)
class FlatEvalResult:
    table: MetricTable
    per_fold: list[MetricTable]
    timing: TimingBreakdown


def flat_baseline(ds: Dataset, learner: LevelSpec, folds: FoldAssignment,
                  hierarchy: LabelHierarchy = DEFAULT_HIERARCHY,
                  seed: int = 0) -> FlatEvalResult:
    """Single six-class classifier evaluated under the same folds, the
    comparison point for the cascade."""
    if folds.k < 2:
        raise ValueError("need at least two folds")
    idx = np.asarray([ds.feature_index(n) for n in learner.features])
    vocab = hierarchy.fine_classes
    tables = []
    train_sec = 0.0
    test_sec = 0.0
    test_count = 0
    for fold in range(folds.k):
        train_idx = folds.train_indices(fold)
        test_idx = folds.test_indices(fold)
        X_train = ds.records[np.ix_(train_idx, idx)]
        X_test = ds.records[np.ix_(test_idx, idx)]
        t0 = time.perf_counter()
        model = _fit_level(learner, X_train, ds.labels[train_idx], vocab,
                           derive_seed(seed, "flat", fold))
        train_sec += time.perf_counter() - t0
        t0 = time.perf_counter()
        preds = predict_labels(model, X_test, classes=vocab)
        test_sec += time.perf_counter() - t0
        test_count += test_idx.size
        tables.append(metric_table(confusion(ds.labels[test_idx], preds, vocab)))
    timing = TimingBreakdown(
        train_per_level=(train_sec,),
        train_total=train_sec,
        test_total=test_sec,
        test_instances=test_count,
    )
    return FlatEvalResult(table=cv_aggregate(tables), per_fold=tables, timing=timing)


def hier_model_to_document(model: HierModel) -> dict:
    return {
        "format": "hierids-cascade",
        "version": 1,
        "routing": model.routing,
        "levels": [
            {
                "model": model_to_document(model.models[i]),
                "features": list(model.feature_names[i]),
                "feature_indices": [int(v) for v in model.feature_indices[i]],
                "classes": list(model.classes[i]),
            }
            for i in range(3)
        ],
        "hierarchy": {
            "fine_classes": list(model.hierarchy.fine_classes),
            "level2_of": dict(model.hierarchy.level2_of),
            "level1_of": dict(model.hierarchy.level1_of),
        },
        "scaler": None if model.scaler is None else model.scaler.to_jsonable(),
    }


def hier_model_from_document(doc: dict) -> HierModel:
    if doc.get("format") != "hierids-cascade" or doc.get("version") != 1:
        raise ValueError("not a cascade model document")
    hierarchy = LabelHierarchy(
        tuple(doc["hierarchy"]["fine_classes"]),
        dict(doc["hierarchy"]["level2_of"]),
        dict(doc["hierarchy"]["level1_of"]),
    )
    levels = doc["levels"]
    scaler = doc.get("scaler")
    return HierModel(
        models=tuple(model_from_document(l["model"]) for l in levels),
        feature_indices=tuple(tuple(l["feature_indices"]) for l in levels),
        feature_names=tuple(tuple(l["features"]) for l in levels),
        classes=tuple(tuple(l["classes"]) for l in levels),
        hierarchy=hierarchy,
        routing=doc.get("routing", ROUTED),
        scaler=None if scaler is None else ScalerParams.from_jsonable(scaler),
    )
