"""Study measures: Brier score, over-/under-reliance, precision/recall/F1,
entropy-based instance selection, and small aggregation helpers.

Metrics whose denominator can be empty (reliance, precision, recall) return
``None`` rather than 0 or NaN, so downstream aggregation can tell "absent"
from "zero".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import LabeledTable
from .errors import InvalidDataError
from .evidence import uncertainty
from .model import GaussianEvidenceModel, classify, posterior

CORRECT_HIGH = "correct-high-uncertainty"
CORRECT_LOW = "correct-low-uncertainty"
WRONG_HIGH = "wrong-high-uncertainty"
WRONG_LOW = "wrong-low-uncertainty"
INSTANCE_CATEGORIES = (CORRECT_HIGH, CORRECT_LOW, WRONG_HIGH, WRONG_LOW)


@dataclass(frozen=True)
class StudyResponse:
    """One participant answer: stated confidence, correctness, chosen label."""

    confidence: float
    correct: int
    participant_label: int
    duration: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidDataError(f"confidence must be in [0, 1], got {self.confidence}")
        if int(self.correct) not in (0, 1):
            raise InvalidDataError(f"correct must be 0 or 1, got {self.correct}")
        if self.duration < 0:
            raise InvalidDataError(f"duration must be >= 0, got {self.duration}")
        object.__setattr__(self, "correct", int(self.correct))


@dataclass(frozen=True)
class ModelTrace:
    """The model's answer for one task, against the true label."""

    model_label: int
    true_label: int

    @property
    def model_correct(self) -> int:
        return int(self.model_label == self.true_label)


def brier(responses: Sequence[StudyResponse]) -> float:
    """Mean squared gap between confidence and correctness; 0 is best."""
    if not responses:
        raise InvalidDataError("brier score needs at least one response")
    return float(np.mean([(r.confidence - r.correct) ** 2 for r in responses]))


def _check_paired(responses, traces) -> None:
    if len(responses) != len(traces):
        raise InvalidDataError(
            f"{len(responses)} responses vs {len(traces)} traces"
        )


def over_reliance(
    responses: Sequence[StudyResponse], traces: Sequence[ModelTrace]
) -> float | None:
    """Fraction of model-wrong tasks where the participant matched the model.

    None when the model was never wrong (the metric is undefined).
    """
    _check_paired(responses, traces)
    wrong = [(r, t) for r, t in zip(responses, traces) if not t.model_correct]
    if not wrong:
        return None
    matched = sum(1 for r, t in wrong if r.participant_label == t.model_label)
    return matched / len(wrong)


def under_reliance(
    responses: Sequence[StudyResponse], traces: Sequence[ModelTrace]
) -> float | None:
    """Fraction of model-correct tasks where the participant diverged.

    None when the model was never correct.
    """
    _check_paired(responses, traces)
    right = [(r, t) for r, t in zip(responses, traces) if t.model_correct]
    if not right:
        return None
    diverged = sum(1 for r, t in right if r.participant_label != t.model_label)
    return diverged / len(right)


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float | None, float | None, float | None]:
    """Precision, recall, F1 from confusion counts; None where undefined."""
    if min(tp, fp, fn) < 0:
        raise InvalidDataError("confusion counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None if precision is None or recall is None else 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def precision_recall_f1(
    predicted: Sequence[int], actual: Sequence[int], positive: int = 1
) -> tuple[float | None, float | None, float | None]:
    """Binary precision/recall/F1 with ``positive`` as the positive class."""
    if len(predicted) != len(actual):
        raise InvalidDataError("predicted and actual lengths differ")
    tp = sum(1 for p, a in zip(predicted, actual) if p == positive and a == positive)
    fp = sum(1 for p, a in zip(predicted, actual) if p == positive and a != positive)
    fn = sum(1 for p, a in zip(predicted, actual) if p != positive and a == positive)
    return prf_from_counts(tp, fp, fn)


@dataclass(frozen=True)
class SelectedInstance:
    index: int
    category: str
    entropy: float
    predicted_label: int
    true_label: int


@dataclass(frozen=True)
class InstanceSelection:
    """Instance ids per category plus shortfall notes for under-filled ones."""

    low_threshold: float
    high_threshold: float
    by_category: dict[str, tuple[SelectedInstance, ...]]
    shortfalls: tuple[str, ...] = ()

    def ids(self, category: str) -> tuple[int, ...]:
        return tuple(inst.index for inst in self.by_category[category])


def select_instances(
    model: GaussianEvidenceModel,
    pool: LabeledTable,
    low_t: float = 0.3,
    high_t: float = 0.7,
    per_category: int | None = None,
) -> InstanceSelection:
    """Categorize pool instances by model correctness x posterior entropy.

    Entropy below ``low_t`` is low-uncertainty, above ``high_t`` is high;
    instances in between are excluded. At most ``per_category`` ids are kept
    per category, in pool order. Categories that cannot be filled are named
    in ``shortfalls``.
    """
    if pool.n_rows == 0:
        raise InvalidDataError("instance pool is empty")
    if not low_t < high_t:
        raise InvalidDataError(f"low threshold {low_t} must be < high threshold {high_t}")
    buckets: dict[str, list[SelectedInstance]] = {c: [] for c in INSTANCE_CATEGORIES}
    for i in range(pool.n_rows):
        x = pool.rows[i]
        predicted = classify(model, x).id
        ent = uncertainty(posterior(model, x))
        if ent < low_t:
            level = "low"
        elif ent > high_t:
            level = "high"
        else:
            continue
        correct = predicted == int(pool.labels[i])
        category = {
            (True, "high"): CORRECT_HIGH,
            (True, "low"): CORRECT_LOW,
            (False, "high"): WRONG_HIGH,
            (False, "low"): WRONG_LOW,
        }[(correct, level)]
        if per_category is None or len(buckets[category]) < per_category:
            buckets[category].append(
                SelectedInstance(
                    index=i,
                    category=category,
                    entropy=ent,
                    predicted_label=predicted,
                    true_label=int(pool.labels[i]),
                )
            )
    wanted = per_category if per_category is not None else 1
    shortfalls = tuple(
        c for c in INSTANCE_CATEGORIES if len(buckets[c]) < wanted
    )
    return InstanceSelection(
        low_threshold=low_t,
        high_threshold=high_t,
        by_category={c: tuple(v) for c, v in buckets.items()},
        shortfalls=shortfalls,
    )


def selected_hypotheses_pct(selected, total_hypotheses: int) -> float:
    """Share of hypotheses a participant consulted: |selected| / total."""
    if total_hypotheses < 1:
        raise InvalidDataError("total_hypotheses must be >= 1")
    chosen = set(int(s) for s in selected)
    bad = [s for s in chosen if not 0 <= s < total_hypotheses]
    if bad:
        raise InvalidDataError(f"selected ids {sorted(bad)} out of range")
    return len(chosen) / total_hypotheses


def records_from_export(export_doc: dict) -> tuple[list[StudyResponse], list[ModelTrace]]:
    """Rebuild response/trace pairs from a session-export document."""
    responses: list[StudyResponse] = []
    traces: list[ModelTrace] = []
    for d in export_doc.get("decisions", []):
        responses.append(
            StudyResponse(
                confidence=float(d["confidence"]),
                correct=int(d["label"] == d["true_label"]),
                participant_label=int(d["label"]),
                duration=float(d["server_duration"] or 0.0),
            )
        )
        traces.append(
            ModelTrace(model_label=int(d["model_label"]), true_label=int(d["true_label"]))
        )
    return responses, traces


def selected_pct_from_export(export_doc: dict) -> float | None:
    """Mean over hypothesis-driven tasks of (distinct hypotheses consulted
    before the decision) / K; None if the session had no C3 tasks."""
    n_classes = int(export_doc["n_classes"])
    c3_slots = [s["index"] for s in export_doc.get("slots", []) if s["condition"] == "C3"]
    if not c3_slots:
        return None
    per_task = []
    for index in c3_slots:
        selected = {
            e["payload"]
            for e in export_doc.get("events", [])
            if e["task_index"] == index and e["kind"] == "hypothesis-selected"
        }
        per_task.append(selected_hypotheses_pct(selected, n_classes))
    return float(np.mean(per_task))


def confidence_from_allocation(allocation: Sequence[float], chosen: int) -> float:
    """Confidence implied by a 100-point likelihood allocation: the mass the
    participant put on their chosen class, rescaled to [0, 1]."""
    a = np.asarray(allocation, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise InvalidDataError("allocation must be a non-empty vector")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InvalidDataError("allocation entries must be non-negative and finite")
    if abs(float(a.sum()) - 100.0) > 1e-6:
        raise InvalidDataError(f"allocation sums to {float(a.sum())}, expected 100")
    if not 0 <= int(chosen) < a.size:
        raise InvalidDataError(f"chosen index {chosen} out of range")
    return float(a[int(chosen)] / 100.0)
