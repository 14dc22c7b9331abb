"""Binary CAN-traffic datasets: loading, scaling, label hierarchy, folds.

Handles the CIC-IoV2024 binary CSV layout (one bit per feature column plus a
label column) as well as synthetic desk-scale data built with the same shape.
Labels are normalised to a canonical vocabulary; the three-level hierarchy
(benign/attack, benign/DoS/spoofing, six fine classes) lives here too.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .seeds import substream

# Canonical label vocabulary. The raw files spell these several ways
# (DoS, Gas, Steering Wheel (SW), ...); aliases below absorb that.
BENIGN = "BENIGN"
ATTACK = "ATTACK"
DOS = "DOS"
SPOOFING = "SPOOFING"
SPOOFING_GAS = "SPOOFING_GAS"
SPOOFING_RPM = "SPOOFING_RPM"
SPOOFING_SPEED = "SPOOFING_SPEED"
SPOOFING_STEERING_WHEEL = "SPOOFING_STEERING_WHEEL"

FINE_CLASSES = (
    BENIGN,
    DOS,
    SPOOFING_GAS,
    SPOOFING_RPM,
    SPOOFING_SPEED,
    SPOOFING_STEERING_WHEEL,
)
LEVEL2_CLASSES = (BENIGN, DOS, SPOOFING)
LEVEL1_CLASSES = (BENIGN, ATTACK)

_LABEL_ALIASES = {
    "BENIGN": BENIGN,
    "DOS": DOS,
    "GAS": SPOOFING_GAS,
    "SPOOFING_GAS": SPOOFING_GAS,
    "GAS_SPOOFING": SPOOFING_GAS,
    "RPM": SPOOFING_RPM,
    "SPOOFING_RPM": SPOOFING_RPM,
    "RPM_SPOOFING": SPOOFING_RPM,
    "SPEED": SPOOFING_SPEED,
    "SPOOFING_SPEED": SPOOFING_SPEED,
    "SPEED_SPOOFING": SPOOFING_SPEED,
    "SW": SPOOFING_STEERING_WHEEL,
    "STEERING_WHEEL": SPOOFING_STEERING_WHEEL,
    "STEERING_WHEEL_SW": SPOOFING_STEERING_WHEEL,
    "SPOOFING_STEERING_WHEEL": SPOOFING_STEERING_WHEEL,
    "STEERING_WHEEL_SPOOFING": SPOOFING_STEERING_WHEEL,
}


class SchemaError(ValueError):
    """CSV header does not provide the columns the schema requires."""


class ParseError(ValueError):
    """A cell could not be parsed under the schema (error names the row)."""


class EmptyInputError(ValueError):
    """The input contains no data rows."""


class UnknownLabelError(KeyError):
    """A label is not part of the hierarchy in use."""


def canonical_label(raw: str) -> str:
    """Map a raw label spelling onto the canonical vocabulary.

    Unknown spellings are kept verbatim so arbitrary synthetic vocabularies
    survive a round trip; only recognised aliases are rewritten.
    """
    norm = re.sub(r"[^0-9A-Z]+", "_", str(raw).strip().upper()).strip("_")
    return _LABEL_ALIASES.get(norm, str(raw))


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout of a traffic CSV: ordered features plus one label column."""

    feature_names: tuple[str, ...]
    label_column: str = "specific_class"
    feature_kind: str = "binary"  # "binary" ({0,1}) or "real" (unit interval)

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if len(names) == 0:
            raise SchemaError("schema needs at least one feature column")
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} is also a feature")
        if self.feature_kind not in ("binary", "real"):
            raise SchemaError(f"unknown feature kind {self.feature_kind!r}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def schema_from_csv(
    path: str | Path,
    label_column: str = "specific_class",
    drop_columns: tuple[str, ...] = (),
    feature_kind: str = "binary",
) -> FeatureSchema:
    """Build a schema from a file header: every column that is neither the
    label nor explicitly dropped becomes a feature."""
    header = pd.read_csv(path, nrows=0)
    cols = [str(c).strip() for c in header.columns]
    if label_column not in cols:
        raise SchemaError(f"label column {label_column!r} missing from {path}")
    dropped = set(drop_columns) | {label_column}
    features = tuple(c for c in cols if c not in dropped)
    return FeatureSchema(features, label_column=label_column, feature_kind=feature_kind)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable record table: N rows x M features plus fine-grained labels."""

    records: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        records = np.ascontiguousarray(self.records, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=object)
        if records.ndim != 2:
            raise ValueError("records must be a 2-D array")
        if records.shape[0] < 1:
            raise EmptyInputError("dataset needs at least one record")
        if records.shape[1] != self.schema.n_features:
            raise SchemaError(
                f"records have {records.shape[1]} columns, schema expects "
                f"{self.schema.n_features}"
            )
        if labels.shape != (records.shape[0],):
            raise ValueError("labels must align with records")
        records.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "labels", labels)

    @property
    def n_records(self) -> int:
        return self.records.shape[0]

    @property
    def n_features(self) -> int:
        return self.records.shape[1]

    def class_counts(self) -> dict[str, int]:
        values, counts = np.unique(self.labels.astype(str), return_counts=True)
        return {str(v): int(c) for v, c in zip(values, counts)}

    def feature_index(self, name: str) -> int:
        try:
            return self.schema.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def select(self, indices: np.ndarray) -> "Dataset":
        """Row subset as a new Dataset."""
        return Dataset(self.records[indices], self.labels[indices], self.schema)


@dataclass(frozen=True, eq=False)
class LabelHierarchy:
    """Total maps from fine classes to the coarse vocabularies of levels 1-2."""

    fine_classes: tuple[str, ...]
    level2_of: dict[str, str]
    level1_of: dict[str, str]

    def __post_init__(self):
        for c in self.fine_classes:
            if c not in self.level2_of or c not in self.level1_of:
                raise UnknownLabelError(f"fine class {c!r} unmapped in hierarchy")
            benign2 = self.level2_of[c] == BENIGN
            benign1 = self.level1_of[c] == BENIGN
            if benign1 != benign2:
                raise ValueError(f"levels disagree on benign status of {c!r}")

    @staticmethod
    def default() -> "LabelHierarchy":
        level2 = {
            BENIGN: BENIGN,
            DOS: DOS,
            SPOOFING_GAS: SPOOFING,
            SPOOFING_RPM: SPOOFING,
            SPOOFING_SPEED: SPOOFING,
            SPOOFING_STEERING_WHEEL: SPOOFING,
        }
        level1 = {c: (BENIGN if c == BENIGN else ATTACK) for c in FINE_CLASSES}
        return LabelHierarchy(FINE_CLASSES, level2, level1)

    @staticmethod
    def from_level2(fine_classes: tuple[str, ...], level2_of: dict[str, str]) -> "LabelHierarchy":
        level1 = {
            c: (BENIGN if level2_of.get(c) == BENIGN else ATTACK) for c in fine_classes
        }
        return LabelHierarchy(tuple(fine_classes), dict(level2_of), level1)

    def classes_at(self, level: int) -> tuple[str, ...]:
        if level == 1:
            return LEVEL1_CLASSES
        if level == 2:
            seen = []
            for c in self.fine_classes:
                v = self.level2_of[c]
                if v not in seen:
                    seen.append(v)
            return tuple(seen)
        if level == 3:
            return self.fine_classes
        raise ValueError(f"level must be 1, 2 or 3, got {level}")


DEFAULT_HIERARCHY = LabelHierarchy.default()


def coarsen_labels(labels, hierarchy: LabelHierarchy, level: int) -> np.ndarray:
    """Project fine labels to the requested level (3 = identity)."""
    labels = np.asarray(labels, dtype=object)
    if level == 3:
        return labels.copy()
    if level == 2:
        table = hierarchy.level2_of
    elif level == 1:
        table = hierarchy.level1_of
    else:
        raise ValueError(f"level must be 1, 2 or 3, got {level}")
    out = np.empty(labels.shape, dtype=object)
    for i, lab in enumerate(labels):
        try:
            out[i] = table[lab]
        except KeyError:
            raise UnknownLabelError(f"label {lab!r} not in hierarchy") from None
    return out


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Per-feature min/max recorded from training data, reused on held-out data."""

    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        x_min = np.asarray(self.x_min, dtype=np.float64)
        x_max = np.asarray(self.x_max, dtype=np.float64)
        if x_min.shape != x_max.shape or x_min.ndim != 1:
            raise ValueError("x_min/x_max must be matching 1-D vectors")
        if np.any(x_min > x_max):
            raise ValueError("x_min must not exceed x_max")
        x_min.flags.writeable = False
        x_max.flags.writeable = False
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)

    def to_jsonable(self) -> dict:
        return {"x_min": [float(v) for v in self.x_min],
                "x_max": [float(v) for v in self.x_max]}

    @staticmethod
    def from_jsonable(doc: dict) -> "ScalerParams":
        return ScalerParams(np.asarray(doc["x_min"]), np.asarray(doc["x_max"]))


def minmax_scale(ds: Dataset) -> tuple[Dataset, ScalerParams]:
    """Rescale every feature to [0, 1] by its observed min/max.

    A constant column maps to 0.0 everywhere; the returned params let the
    same transform be replayed on held-out data via apply_scaler.
    """
    x_min = ds.records.min(axis=0)
    x_max = ds.records.max(axis=0)
    params = ScalerParams(x_min, x_max)
    return apply_scaler(ds, params), params


def apply_scaler(ds: Dataset, params: ScalerParams) -> Dataset:
    """Replay a recorded min/max transform; out-of-range values clamp to [0, 1]."""
    if params.x_min.shape[0] != ds.n_features:
        raise SchemaError(
            f"scaler covers {params.x_min.shape[0]} features, dataset has {ds.n_features}"
        )
    span = params.x_max - params.x_min
    scaled = np.zeros_like(ds.records)
    nz = span > 0
    scaled[:, nz] = (ds.records[:, nz] - params.x_min[nz]) / span[nz]
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return Dataset(scaled, ds.labels, ds.schema)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Stratified fold map: record index -> fold id in [0, k)."""

    k: int
    fold_of: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=np.int64)
        if self.k < 1:
            raise ValueError("fold count must be >= 1")
        if fold_of.min(initial=0) < 0 or fold_of.max(initial=0) >= self.k:
            raise ValueError("fold ids out of range")
        fold_of.flags.writeable = False
        object.__setattr__(self, "fold_of", fold_of)

    @property
    def n_records(self) -> int:
        return self.fold_of.shape[0]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def to_jsonable(self) -> dict:
        return {
            "k": int(self.k),
            "fold_of": [int(f) for f in self.fold_of],
            "warnings": list(self.warnings),
        }


def _stratified_assign(labels: np.ndarray, k: int, rng: np.random.Generator,
                       min_members: int | None = None) -> tuple[np.ndarray, list[str]]:
    """Per class: shuffle indices, deal round-robin into k bins.

    Keeps every bin's per-class count within one of the proportional share.
    """
    labels = np.asarray(labels, dtype=object)
    fold_of = np.full(labels.shape[0], -1, dtype=np.int64)
    warnings = []
    threshold = k if min_members is None else min_members
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        if idx.size < threshold:
            warnings.append(
                f"class {cls!r} has {idx.size} records, fewer than {threshold}"
            )
        idx = idx.copy()
        rng.shuffle(idx)
        fold_of[idx] = np.arange(idx.size) % k
    return fold_of, warnings


def stratified_folds(ds: Dataset, k: int, seed: int) -> FoldAssignment:
    """Deterministic stratified k-fold assignment over the dataset."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = substream(seed, "stratified-folds", k)
    fold_of, warnings = _stratified_assign(ds.labels, k, rng)
    return FoldAssignment(k, fold_of, tuple(warnings))


def load_csv(path: str | Path, schema: FeatureSchema) -> Dataset:
    """Load a traffic CSV under the given schema.

    Columns may appear in any order; extra columns are ignored. Binary
    feature columns must contain only 0/1; anything else is a parse error
    naming the first offending row (0-based data row index).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path} is empty") from None
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in (*schema.feature_names, schema.label_column)
               if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path} is missing columns: {missing}")
    if len(frame) == 0:
        raise EmptyInputError(f"{path} has a header but no data rows")

    numeric = frame[list(schema.feature_names)].apply(pd.to_numeric, errors="coerce")
    values = numeric.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if schema.feature_kind == "binary":
        bad |= (values != 0.0) & (values != 1.0)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ParseError(
            f"row {int(row)}: column {schema.feature_names[int(col)]!r} has "
            f"non-{schema.feature_kind} value {frame.iloc[int(row)][schema.feature_names[int(col)]]!r}"
        )
    labels = np.array(
        [canonical_label(v) for v in frame[schema.label_column].tolist()], dtype=object
    )
    return Dataset(values, labels, schema)


def write_csv(ds: Dataset, path: str | Path) -> Path:
    """Emit the dataset back to CSV (features then label, full precision)."""
    path = Path(path)
    frame = pd.DataFrame(np.asarray(ds.records), columns=list(ds.schema.feature_names))
    frame[ds.schema.label_column] = [str(v) for v in ds.labels]
    frame.to_csv(path, index=False)
    return path


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic binary dataset with planted informative features.

    An informative (feature, class, bias) entry makes the feature 1 with
    probability ``bias`` on records of that class and ``1 - bias`` elsewhere,
    so bias 1.0 is an exact class indicator and bias below 0.5 plants an
    anti-correlated feature. All other features are fair coin flips.
    """

    n_records: int
    n_features: int
    informative: tuple[tuple[str | int, str, float], ...] = ()
    class_mix: tuple[tuple[str, float], ...] = ()

    def feature_names(self) -> tuple[str, ...]:
        width = len(str(max(self.n_features - 1, 0)))
        return tuple(f"F{i:0{width}d}" for i in range(self.n_features))


def synth_generate(spec: SynthSpec, seed: int) -> Dataset:
    """Deterministic synthetic dataset following a SynthSpec."""
    if spec.n_records < 1 or spec.n_features < 1:
        raise ValueError("need at least one record and one feature")
    mix = list(spec.class_mix)
    if not mix:
        raise ValueError("class_mix must name at least one class")
    probs = np.array([p for _, p in mix], dtype=np.float64)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("class_mix probabilities must be non-negative and sum to 1")
    names = spec.feature_names()

    def feat_index(f) -> int:
        if isinstance(f, (int, np.integer)):
            idx = int(f)
        else:
            try:
                idx = names.index(str(f))
            except ValueError:
                raise SchemaError(f"informative feature {f!r} not in feature set") from None
        if not 0 <= idx < spec.n_features:
            raise SchemaError(f"informative feature index {idx} out of range")
        return idx

    informative = {}
    for f, cls, bias in spec.informative:
        idx = feat_index(f)
        if idx in informative:
            raise ValueError(f"feature {names[idx]} planted twice")
        if not 0.0 <= bias <= 1.0:
            raise ValueError("bias must lie in [0, 1]")
        informative[idx] = (str(cls), float(bias))

    rng = substream(seed, "synth")
    class_names = [c for c, _ in mix]
    labels = rng.choice(np.array(class_names, dtype=object), size=spec.n_records, p=probs)
    records = (rng.random((spec.n_records, spec.n_features)) < 0.5).astype(np.float64)
    for idx, (cls, bias) in informative.items():
        hit = rng.random(spec.n_records)
        of_class = labels == cls
        records[:, idx] = np.where(
            of_class, (hit < bias), (hit < 1.0 - bias)
        ).astype(np.float64)
    schema = FeatureSchema(names, label_column="label", feature_kind="binary")
    return Dataset(records, labels, schema)
