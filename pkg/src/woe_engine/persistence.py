"""Versioned JSON documents for models, evidence reports, and task pools.

Numbers are written with Python's shortest round-trip decimal encoding, so
``load(save(model))`` reproduces every density computation bitwise. All
fields are mandatory except gamma defaults; key order never matters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DocumentError, EngineError, IntegrityError, VersionMismatchError
from .evidence import ConditionView, EvidenceItem, HypothesisReport, SignificanceScale
from .model import ClassStats, GaussianEvidenceModel, Label

FORMAT_VERSION = 1

MODEL_KIND = "gaussian-evidence-model"
TASK_POOL_KIND = "task-pool"


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise DocumentError(f"{where}: missing required field {key!r}")
    return doc[key]


def _check_envelope(doc: dict, kind: str, where: str) -> None:
    version = _require(doc, "format_version", where)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{where}: format_version {version} not supported (expected {FORMAT_VERSION})"
        )
    found = _require(doc, "kind", where)
    if found != kind:
        raise DocumentError(f"{where}: kind {found!r}, expected {kind!r}")


def model_to_doc(
    model: GaussianEvidenceModel,
    scale: SignificanceScale,
    gamma_defaults: Sequence[float] | None = None,
) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": MODEL_KIND,
        "labels": [{"id": lab.id, "name": lab.name} for lab in model.labels],
        "feature_names": list(model.feature_names),
        "assumption": model.assumption.value,
        "ridge": model.ridge,
        "classes": [
            {
                "mean": [float(v) for v in s.mean],
                "covariance": [float(v) for v in s.covariance.reshape(-1)],
                "prior": s.prior,
            }
            for s in model.per_class
        ],
        "significance_thresholds": list(scale.thresholds),
    }
    if gamma_defaults is not None:
        doc["gamma_defaults"] = [float(g) for g in gamma_defaults]
    return doc


def model_from_doc(doc: dict, where: str = "model document") -> tuple[GaussianEvidenceModel, SignificanceScale]:
    _check_envelope(doc, MODEL_KIND, where)
    labels = tuple(
        Label(id=int(_require(lab, "id", where)), name=str(_require(lab, "name", where)))
        for lab in _require(doc, "labels", where)
    )
    feature_names = tuple(str(n) for n in _require(doc, "feature_names", where))
    d = len(feature_names)
    raw: list[tuple[np.ndarray, np.ndarray, float]] = []
    for c, entry in enumerate(_require(doc, "classes", where)):
        mean = np.asarray(_require(entry, "mean", where), dtype=np.float64)
        flat = np.asarray(_require(entry, "covariance", where), dtype=np.float64)
        if flat.size != d * d:
            raise IntegrityError(
                f"{where}: class {c} covariance has {flat.size} entries, expected {d * d}"
            )
        cov = flat.reshape(d, d)
        if not np.allclose(cov, cov.T, atol=1e-9, rtol=0.0):
            raise IntegrityError(f"{where}: class {c} covariance is asymmetric")
        raw.append((mean, cov, float(_require(entry, "prior", where))))
    total = sum(prior for _, _, prior in raw)
    if abs(total - 1.0) > 1e-9:
        raise IntegrityError(f"{where}: priors sum to {total}, expected 1")
    try:
        classes = [
            ClassStats(mean=mean, covariance=cov, prior=prior)
            for mean, cov, prior in raw
        ]
        model = GaussianEvidenceModel(
            labels=labels,
            feature_names=feature_names,
            per_class=tuple(classes),
            assumption=str(_require(doc, "assumption", where)),
            ridge=float(_require(doc, "ridge", where)),
        )
        scale = SignificanceScale(
            thresholds=tuple(_require(doc, "significance_thresholds", where))
        )
    except EngineError as exc:
        raise IntegrityError(f"{where}: {exc}") from None
    return model, scale


def save_model(
    model: GaussianEvidenceModel,
    scale: SignificanceScale,
    path: str,
    gamma_defaults: Sequence[float] | None = None,
) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps(model_to_doc(model, scale, gamma_defaults)) + "\n")
    except OSError as exc:
        raise DocumentError(f"cannot write model to {path}: {exc}") from None


def load_model(path: str) -> tuple[GaussianEvidenceModel, SignificanceScale]:
    doc = read_document(path)
    return model_from_doc(doc, where=path)


def read_document(path: str) -> dict:
    """Parse a JSON document; truncated or invalid input never yields a
    partial object."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid document: {exc}") from None
    if not isinstance(doc, dict):
        raise DocumentError(f"{path}: expected a JSON object")
    return doc


# ---------------------------------------------------------------------------
# Evidence documents
# ---------------------------------------------------------------------------

def item_to_doc(item: EvidenceItem) -> dict:
    return {
        "feature_id": item.feature_id,
        "feature_name": item.feature_name,
        "woe": item.woe,
        "category": item.category,
        "direction": item.direction,
    }


def report_to_doc(rep: HypothesisReport) -> dict:
    doc = {
        "items": [item_to_doc(it) for it in rep.items],
        "total_woe": rep.total_woe,
        "weighted_total_woe": rep.weighted_total_woe,
        "gamma": list(rep.gamma_used),
    }
    if rep.hypothesis is not None:
        doc["hypothesis"] = {"id": rep.hypothesis.id, "name": rep.hypothesis.name}
    return doc


def view_to_doc(view: ConditionView) -> dict:
    doc = {
        "condition": view.condition,
        "reports": [report_to_doc(r) for r in view.reports],
    }
    if view.prediction is not None:
        doc["prediction"] = {"id": view.prediction.id, "name": view.prediction.name}
    return doc


# ---------------------------------------------------------------------------
# Task pools (instances served to study participants)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    id: str
    values: tuple[float, ...]
    true_label: int


@dataclass(frozen=True)
class TaskPool:
    feature_names: tuple[str, ...]
    tasks: tuple[Task, ...]

    def __post_init__(self) -> None:
        for t in self.tasks:
            if len(t.values) != len(self.feature_names):
                raise DocumentError(
                    f"task {t.id!r} has {len(t.values)} values, "
                    f"expected {len(self.feature_names)}"
                )
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise DocumentError("task ids must be unique")


def task_pool_to_doc(pool: TaskPool) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": TASK_POOL_KIND,
        "feature_names": list(pool.feature_names),
        "tasks": [
            {"id": t.id, "values": list(t.values), "true_label": t.true_label}
            for t in pool.tasks
        ],
    }


def task_pool_from_doc(doc: dict, where: str = "task pool") -> TaskPool:
    _check_envelope(doc, TASK_POOL_KIND, where)
    names = tuple(str(n) for n in _require(doc, "feature_names", where))
    tasks = tuple(
        Task(
            id=str(_require(t, "id", where)),
            values=tuple(float(v) for v in _require(t, "values", where)),
            true_label=int(_require(t, "true_label", where)),
        )
        for t in _require(doc, "tasks", where)
    )
    return TaskPool(feature_names=names, tasks=tasks)


def save_task_pool(pool: TaskPool, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(task_pool_to_doc(pool)) + "\n")


def load_task_pool(path: str) -> TaskPool:
    return task_pool_from_doc(read_document(path), where=path)
