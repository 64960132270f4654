"""Tabular ingestion and preparation: CSV tables, concept activations,
target discretization, class balancing, stratified splitting.

All loaders produce immutable tables; downstream code never mutates rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTargetError,
    IngestionError,
    InvalidDataError,
)

RANDOM_UNDERSAMPLE = "random-undersample"
NEARMISS1 = "nearmiss1"

QUANTILE = "quantile"
FIXED_EDGES = "fixed-edges"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabeledTable:
    """Feature rows with integer class labels.

    Invariants enforced at construction: rectangular float rows, all finite,
    labels are non-negative integers, one feature name per column.
    """

    feature_names: tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise InvalidDataError(f"rows must be 2-d, got ndim={rows.ndim}")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != rows.shape[0]:
            raise InvalidDataError(
                f"labels length {labels.shape} does not match {rows.shape[0]} rows"
            )
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == labels.astype(np.int64)):
                raise InvalidDataError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.size and labels.min() < 0:
            raise InvalidDataError("labels must be non-negative class ids")
        if len(self.feature_names) != rows.shape[1]:
            raise InvalidDataError(
                f"{len(self.feature_names)} feature names for {rows.shape[1]} columns"
            )
        if not np.all(np.isfinite(rows)):
            raise InvalidDataError("rows contain non-finite values")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "rows", _readonly(rows))
        object.__setattr__(self, "labels", _readonly(labels))

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def take(self, indices: np.ndarray, provenance: str | None = None) -> "LabeledTable":
        return LabeledTable(
            feature_names=self.feature_names,
            rows=self.rows[indices],
            labels=self.labels[indices],
            provenance=self.provenance if provenance is None else provenance,
        )


@dataclass(frozen=True)
class ConceptActivationTable(LabeledTable):
    """Concept-activation rows: columns are concepts, labels are class ids.

    Activations are accepted as-is; scaling is owned by whatever produced
    them. Instance ids from the source file are kept for traceability.
    """

    instance_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.n_features < 1:
            raise InvalidDataError("concept table needs at least one concept column")
        if self.instance_ids and len(self.instance_ids) != self.n_rows:
            raise InvalidDataError("instance_ids length does not match rows")
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))

    @property
    def concept_names(self) -> tuple[str, ...]:
        return self.feature_names


@dataclass(frozen=True)
class CsvSchema:
    """Names the label column; feature columns default to every other column."""

    label_column: str
    feature_columns: tuple[str, ...] | None = None


@dataclass(frozen=True)
class DiscretizationSpec:
    n_bins: int = 3
    strategy: str = QUANTILE
    edges: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_bins < 2:
            raise InvalidDataError(f"n_bins must be >= 2, got {self.n_bins}")
        if self.strategy not in (QUANTILE, FIXED_EDGES):
            raise InvalidDataError(f"unknown strategy {self.strategy!r}")
        if self.strategy == FIXED_EDGES:
            if not self.edges:
                raise InvalidDataError("fixed-edges strategy requires edges")
            e = np.asarray(self.edges, dtype=np.float64)
            if not np.all(np.isfinite(e)):
                raise InvalidDataError("edges must be finite")
            if np.any(np.diff(e) <= 0):
                raise InvalidDataError("edges must be strictly increasing")
            object.__setattr__(self, "edges", tuple(float(x) for x in e))


def load_csv(path: str, schema: CsvSchema) -> LabeledTable:
    """Load a UTF-8, comma-separated, header-first CSV into a table.

    The label column must hold integer class ids. Any ragged row or
    unparseable cell aborts the load with the 1-based file line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file, header row required") from None
        if schema.label_column not in header:
            raise IngestionError(f"{path}: label column {schema.label_column!r} not in header")
        if schema.feature_columns is None:
            feature_cols = [c for c in header if c != schema.label_column]
        else:
            missing = [c for c in schema.feature_columns if c not in header]
            if missing:
                raise IngestionError(f"{path}: feature columns {missing} not in header")
            feature_cols = list(schema.feature_columns)
        col_index = {c: header.index(c) for c in header}
        label_idx = col_index[schema.label_column]
        feat_idx = [col_index[c] for c in feature_cols]

        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise IngestionError(
                    f"{path}: line {lineno}: ragged row "
                    f"({len(record)} fields, expected {len(header)})"
                )
            try:
                values = [float(record[i]) for i in feat_idx]
            except ValueError as exc:
                raise IngestionError(f"{path}: line {lineno}: {exc}") from None
            if not all(np.isfinite(values)):
                raise IngestionError(f"{path}: line {lineno}: non-finite feature value")
            try:
                label = int(record[label_idx])
            except ValueError:
                raise IngestionError(
                    f"{path}: line {lineno}: label {record[label_idx]!r} is not an integer"
                ) from None
            rows.append(values)
            labels.append(label)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return LabeledTable(
        feature_names=tuple(feature_cols),
        rows=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        provenance=path,
    )


def write_csv(table: LabeledTable, path: str, label_column: str = "label") -> None:
    """Write a table back to CSV with full-precision (repr) floats."""
    if label_column in table.feature_names:
        raise InvalidDataError(f"label column {label_column!r} collides with a feature name")
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(table.feature_names) + [label_column])
        for row, label in zip(table.rows, table.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def discretize_target(values, spec: DiscretizationSpec) -> np.ndarray:
    """Map a numeric target to integer bins.

    Quantile strategy: interior edges at the k/n_bins quantiles; a value
    exactly equal to an edge goes to the lower bin. Fixed-edges strategy:
    bins are left-closed, so a value equal to an edge starts the upper bin.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidDataError("target values must be 1-d")
    if not np.all(np.isfinite(v)):
        raise InvalidDataError("target values contain non-finite entries")
    if spec.strategy == QUANTILE:
        if v.size < spec.n_bins:
            raise InvalidDataError(
                f"need at least n_bins={spec.n_bins} values, got {v.size}"
            )
        if v.min() == v.max():
            raise DegenerateTargetError("constant target cannot be quantile-binned")
        qs = np.arange(1, spec.n_bins) / spec.n_bins
        edges = np.quantile(v, qs)
        return np.searchsorted(edges, v, side="left").astype(np.int64)
    edges = np.asarray(spec.edges, dtype=np.float64)
    return np.searchsorted(edges, v, side="right").astype(np.int64)


def _nearmiss1_keep(
    majority: np.ndarray, minority: np.ndarray, n_keep: int, k: int = 3
) -> np.ndarray:
    """Indices (into majority) of the n_keep samples with the smallest mean
    distance to their k nearest minority samples. Ties keep the lower index."""
    k = min(k, minority.shape[0])
    diffs = majority[:, None, :] - minority[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    nearest = np.sort(dists, axis=1)[:, :k]
    score = nearest.mean(axis=1)
    order = np.argsort(score, kind="stable")
    return np.sort(order[:n_keep])


def balance(table: LabeledTable, strategy: str = RANDOM_UNDERSAMPLE, seed: int = 0) -> LabeledTable:
    """Downsample every class to the minority-class count.

    ``random-undersample`` draws without replacement using ``seed``; a class
    already at the minority count is kept untouched. ``nearmiss1`` keeps the
    majority samples closest (mean distance to their 3 nearest minority
    samples) to the minority class and is fully deterministic.
    """
    if strategy not in (RANDOM_UNDERSAMPLE, NEARMISS1):
        raise InvalidDataError(f"unknown balancing strategy {strategy!r}")
    counts = table.class_counts()
    if table.n_classes < 2:
        raise InvalidDataError("balancing needs at least two classes")
    if np.any(counts == 0):
        empty = int(np.argmin(counts))
        raise InvalidDataError(f"class {empty} has no samples")
    n_min = int(counts.min())
    minority_class = int(np.argmin(counts))
    rng = np.random.default_rng(seed)

    kept: list[np.ndarray] = []
    for c in range(table.n_classes):
        idx = np.flatnonzero(table.labels == c)
        if idx.size == n_min:
            kept.append(idx)
            continue
        if strategy == RANDOM_UNDERSAMPLE:
            chosen = rng.choice(idx, size=n_min, replace=False)
            kept.append(np.sort(chosen))
        else:
            minority_rows = table.rows[table.labels == minority_class]
            local = _nearmiss1_keep(table.rows[idx], minority_rows, n_min)
            kept.append(idx[local])
    order = np.sort(np.concatenate(kept))
    return table.take(order)


def split(table: LabeledTable, fraction: float, seed: int = 0) -> tuple[LabeledTable, LabeledTable]:
    """Stratified train/test split: ``fraction`` of each class goes to train.

    Every class contributes at least one test row; classes with fewer than
    two rows cannot be split. Deterministic under ``seed``; the two outputs
    partition the input.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidDataError(f"fraction must be in (0, 1), got {fraction}")
    counts = table.class_counts()
    if np.any(counts == 0):
        raise InvalidDataError(f"class {int(np.argmin(counts))} has no samples")
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for c in range(table.n_classes):
        idx = np.flatnonzero(table.labels == c)
        if idx.size < 2:
            raise InvalidDataError(f"class {c} has {idx.size} row(s); need >= 2 to split")
        n_test = max(1, int(round(idx.size * (1.0 - fraction))))
        if idx.size - n_test < 1:
            n_test = idx.size - 1
        perm = rng.permutation(idx)
        test_parts.append(perm[:n_test])
        train_parts.append(perm[n_test:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return table.take(train_idx), table.take(test_idx)


CONCEPT_HEADER_PREFIX = "#concepts:"


def load_concepts(path: str) -> ConceptActivationTable:
    """Load a concept-activation file.

    Format: a header line ``#concepts: name1,name2,...``; data lines
    ``instance_id,label_id,a1,...,a_Nc``; other ``#`` lines are comments.
    """
    concept_names: tuple[str, ...] | None = None
    ids: list[str] = []
    labels: list[int] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(CONCEPT_HEADER_PREFIX):
                names = [s.strip() for s in line[len(CONCEPT_HEADER_PREFIX):].split(",")]
                if any(not n for n in names):
                    raise IngestionError(f"{path}: line {lineno}: empty concept name")
                concept_names = tuple(names)
                continue
            if line.startswith("#"):
                continue
            if concept_names is None:
                raise IngestionError(
                    f"{path}: line {lineno}: data before '{CONCEPT_HEADER_PREFIX}' header"
                )
            parts = line.split(",")
            if len(parts) != 2 + len(concept_names):
                raise IngestionError(
                    f"{path}: line {lineno}: expected {2 + len(concept_names)} fields, "
                    f"got {len(parts)}"
                )
            try:
                label = int(parts[1])
            except ValueError:
                raise IngestionError(
                    f"{path}: line {lineno}: label {parts[1]!r} is not an integer"
                ) from None
            try:
                acts = [float(p) for p in parts[2:]]
            except ValueError as exc:
                raise IngestionError(f"{path}: line {lineno}: {exc}") from None
            if not all(np.isfinite(acts)):
                raise IngestionError(f"{path}: line {lineno}: non-finite activation")
            ids.append(parts[0])
            labels.append(label)
            rows.append(acts)
    if concept_names is None:
        raise IngestionError(f"{path}: missing '{CONCEPT_HEADER_PREFIX}' header line")
    if not rows:
        raise IngestionError(f"{path}: no activation rows")
    return ConceptActivationTable(
        feature_names=concept_names,
        rows=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        provenance=path,
        instance_ids=tuple(ids),
    )


def write_concepts(table: ConceptActivationTable, path: str) -> None:
    """Write a concept-activation file that load_concepts reads back exactly."""
    ids = table.instance_ids or tuple(f"i{n}" for n in range(table.n_rows))
    with open(path, "w", encoding="utf-8") as f:
        f.write(CONCEPT_HEADER_PREFIX + " " + ",".join(table.concept_names) + "\n")
        for inst, label, row in zip(ids, table.labels, table.rows):
            f.write(",".join([inst, str(int(label))] + [repr(float(v)) for v in row]) + "\n")
