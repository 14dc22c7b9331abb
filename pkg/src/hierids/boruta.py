"""All-relevant feature selection with shadow features around the forest.

Each run shuffles every surviving column into a shadow twin, fits a forest
on the widened matrix, converts out-of-bag permutation importances into
Z-scores, and marks a feature as a hit when its Z beats the best shadow's
(MZSA). Accumulated hit counts feed a two-sided binomial test that promotes
features to Confirmed or drops them as Unimportant; whatever is still
Tentative at the iteration cap is settled by comparing median Z-scores
against the shadow median.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binomtest

from .dataset import Dataset
from .learners import ForestParams, ImportanceVector, fit_forest, permutation_importance
from .seeds import derive_seed, substream

CONFIRMED = "Confirmed"
UNIMPORTANT = "Unimportant"
TENTATIVE = "Tentative"


@dataclass(frozen=True)
class BorutaConfig:
    max_runs: int = 100
    alpha: float = 0.05
    forest: ForestParams = field(default_factory=ForestParams)
    seed: int = 0

    def __post_init__(self):
        if self.max_runs < 1:
            raise ValueError("max_runs must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")


@dataclass(frozen=True, eq=False)
class BorutaResult:
    feature_names: tuple[str, ...]
    statuses: dict[str, str]
    z_history: np.ndarray  # (runs, M); NaN once a feature has been dropped
    mzsa_history: np.ndarray  # (runs,)
    hit_counts: dict[str, int]
    runs_completed: int
    fallback_resolved: frozenset[str]
    ranking: tuple[str, ...]

    def median_z(self, name: str) -> float:
        col = self.z_history[:, self.feature_names.index(name)]
        col = col[~np.isnan(col)]
        return float(np.median(col)) if col.size else 0.0

    def confirmed(self) -> tuple[str, ...]:
        return tuple(f for f in self.ranking if self.statuses[f] == CONFIRMED)

    def to_jsonable(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "statuses": dict(self.statuses),
            "z_history": [
                [None if np.isnan(v) else float(v) for v in row]
                for row in self.z_history
            ],
            "mzsa_history": [float(v) for v in self.mzsa_history],
            "hit_counts": {k: int(v) for k, v in self.hit_counts.items()},
            "runs_completed": int(self.runs_completed),
            "fallback_resolved": sorted(self.fallback_resolved),
            "ranking": list(self.ranking),
        }

    def ranking_text(self) -> str:
        return "\n".join(self.ranking) + "\n"


def make_shadow(X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Widen X with one independently row-permuted copy of every column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("X must be 2-D with at least one column")
    n, m = X.shape
    shadow = np.empty_like(X)
    for j in range(m):
        shadow[:, j] = X[rng.permutation(n), j]
    return np.hstack([X, shadow])


def zscores(importance: ImportanceVector) -> np.ndarray:
    """Z = importance / std; a zero std maps to 0 (zero importance) or to the
    largest finite float with the importance's sign."""
    imp = importance.importance
    std = importance.std
    z = np.zeros_like(imp)
    nz = std > 0
    z[nz] = imp[nz] / std[nz]
    stuck = (~nz) & (imp != 0)
    z[stuck] = np.copysign(sys.float_info.max, imp[stuck])
    return z


def classify_run(z_real: np.ndarray, z_shadow: np.ndarray) -> np.ndarray:
    """Per-feature hit verdicts: Z must strictly beat the best shadow Z."""
    z_real = np.asarray(z_real, dtype=np.float64)
    z_shadow = np.asarray(z_shadow, dtype=np.float64)
    if z_real.size == 0 or z_shadow.size == 0:
        raise ValueError("need at least one real and one shadow Z-score")
    return z_real > z_shadow.max()


def _binomial_p(hits: int, runs: int) -> float:
    return float(binomtest(hits, runs, 0.5, alternative="two-sided").pvalue)


def boruta_run(ds: Dataset, labels, config: BorutaConfig = BorutaConfig()) -> BorutaResult:
    """Iterate shadow runs until every feature is Confirmed or Unimportant,
    or the run cap is reached; leftovers fall back to the median-Z rule.

    Dropped features are excluded from later forests; Confirmed features
    stay in so the surviving ranking keeps maturing.
    """
    labels = np.asarray(labels, dtype=object)
    if labels.shape[0] != ds.n_records:
        raise ValueError("labels must align with the dataset")
    if len(set(labels.tolist())) < 2:
        raise ValueError("need at least two classes to select features")

    names = ds.schema.feature_names
    m = len(names)
    statuses = {f: TENTATIVE for f in names}
    hit_counts = {f: 0 for f in names}
    z_rows = []
    mzsa_values = []
    alive = list(range(m))

    run = 0
    while run < config.max_runs and any(s == TENTATIVE for s in statuses.values()):
        run += 1
        X_alive = ds.records[:, alive]
        rng = substream(config.seed, "boruta-shadow", run)
        augmented = make_shadow(X_alive, rng)
        forest_params = ForestParams(
            n_trees=config.forest.n_trees,
            max_depth=config.forest.max_depth,
            min_leaf=config.forest.min_leaf,
            features_per_split=config.forest.features_per_split,
            bootstrap=config.forest.bootstrap,
            random_thresholds=config.forest.random_thresholds,
            seed=derive_seed(config.seed, "boruta-forest", run),
        )
        forest = fit_forest(augmented, labels, forest_params)
        imp = permutation_importance(forest, augmented, labels)
        z = zscores(imp)
        k = len(alive)
        z_real, z_shadow = z[:k], z[k:]
        hits = classify_run(z_real, z_shadow)

        row = np.full(m, np.nan)
        row[alive] = z_real
        z_rows.append(row)
        mzsa_values.append(float(z_shadow.max()))

        for pos, feat_idx in enumerate(alive):
            name = names[feat_idx]
            if hits[pos]:
                hit_counts[name] += 1
            if statuses[name] != TENTATIVE:
                continue
            p = _binomial_p(hit_counts[name], run)
            if p < config.alpha:
                if hit_counts[name] * 2 > run:
                    statuses[name] = CONFIRMED
                else:
                    statuses[name] = UNIMPORTANT
        alive = [i for i in alive if statuses[names[i]] != UNIMPORTANT]

    z_history = np.asarray(z_rows, dtype=np.float64).reshape(run, m)
    mzsa_history = np.asarray(mzsa_values, dtype=np.float64)

    fallback = set()
    shadow_median = float(np.median(mzsa_history)) if run else 0.0
    for i, name in enumerate(names):
        if statuses[name] != TENTATIVE:
            continue
        col = z_history[:, i]
        col = col[~np.isnan(col)]
        med = float(np.median(col)) if col.size else 0.0
        statuses[name] = CONFIRMED if med > shadow_median else UNIMPORTANT
        fallback.add(name)

    result = BorutaResult(
        feature_names=names,
        statuses=statuses,
        z_history=z_history,
        mzsa_history=mzsa_history,
        hit_counts=hit_counts,
        runs_completed=run,
        fallback_resolved=frozenset(fallback),
        ranking=(),
    )
    return replace(result, ranking=rank_features(result))


def rank_features(result: BorutaResult) -> tuple[str, ...]:
    """Total order: Confirmed, then Tentative, then Unimportant; within each
    group by descending median Z, ties by ascending feature index."""
    if result.runs_completed < 1:
        raise ValueError("result holds no completed runs")
    group_rank = {CONFIRMED: 0, TENTATIVE: 1, UNIMPORTANT: 2}
    order = sorted(
        range(len(result.feature_names)),
        key=lambda i: (
            group_rank[result.statuses[result.feature_names[i]]],
            -result.median_z(result.feature_names[i]),
            i,
        ),
    )
    return tuple(result.feature_names[i] for i in order)
