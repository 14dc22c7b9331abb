"""Hierarchical intrusion detection for IoV CAN traffic: feature selection,
a three-level classifier cascade, a federated-averaging baseline, and a
tiered-deployment overhead simulator."""

from .dataset import (
    ATTACK,
    BENIGN,
    DEFAULT_HIERARCHY,
    DOS,
    FINE_CLASSES,
    Dataset,
    FeatureSchema,
    FoldAssignment,
    LabelHierarchy,
    ScalerParams,
    SPOOFING,
    SynthSpec,
    apply_scaler,
    coarsen_labels,
    load_csv,
    minmax_scale,
    stratified_folds,
    synth_generate,
)
from .learners import (
    ForestModel,
    ForestParams,
    ImportanceVector,
    LogisticParams,
    Tree,
    TreeParams,
    complexity_estimate,
    fit_forest,
    fit_logistic,
    fit_tree,
    permutation_importance,
    predict_proba,
)
from .boruta import BorutaConfig, BorutaResult, boruta_run, make_shadow, rank_features
from .attribution import (
    AttributionReport,
    SubsetSearchResult,
    attribution_report,
    guided_subset_search,
    path_contributions,
)
from .hierarchy import (
    HierConfig,
    HierModel,
    LevelSpec,
    RoutedDecision,
    evaluate_hierarchy,
    flat_baseline,
    predict_routed,
    train_hierarchy,
)
from .metrics import ConfusionMatrix, MetricTable, confusion, cv_aggregate, metric_table
from .fedsim import FedConfig, FedRun, MLPModel, fedavg, local_train, run_federation, shard
from .deploysim import OverheadReport, SimConfig, TierTopology, build_topology, run_sim, sweep

__version__ = "0.1.0"
