"""Evidence artifacts built on top of raw WoE values: significance buckets,
per-hypothesis reports, condition-specific views, and posterior uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDataError, InvalidDistributionError
from .model import GaussianEvidenceModel, Label, classify
from .model import per_feature_woe as _per_feature_woe
from .model import posterior as _posterior
from .model import validate_features, _validate_gamma

# The seven categories, ordered from strongest refutation to strongest
# support. Default thresholds follow the conventional natural-log decade
# scale: ln 10^0.5, ln 10, ln 100 (rounded to two decimals).
CATEGORIES = (
    "decisive-against",
    "strong-against",
    "substantial-against",
    "not-significant",
    "substantial-in-favour",
    "strong-in-favour",
    "decisive-in-favour",
)

GLYPHS = {
    "decisive-against": "---",
    "strong-against": "--",
    "substantial-against": "-",
    "not-significant": "N",
    "substantial-in-favour": "+",
    "strong-in-favour": "++",
    "decisive-in-favour": "+++",
}

SUPPORTS = "supports"
REFUTES = "refutes"
NEUTRAL = "neutral"

CONDITIONS = ("C1", "C2", "C3")


@dataclass(frozen=True)
class SignificanceScale:
    """Three strictly increasing positive thresholds splitting |woe| into
    not-significant / substantial / strong / decisive, mirrored around zero."""

    thresholds: tuple[float, float, float] = (1.15, 2.30, 4.61)
    categories: tuple[str, ...] = CATEGORIES

    def __post_init__(self) -> None:
        t = tuple(float(x) for x in self.thresholds)
        if len(t) != 3:
            raise InvalidDataError("exactly three thresholds required")
        if not (0.0 < t[0] < t[1] < t[2]) or not all(np.isfinite(t)):
            raise InvalidDataError(f"thresholds must be positive and increasing, got {t}")
        if len(self.categories) != 7:
            raise InvalidDataError("exactly seven categories required")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "categories", tuple(self.categories))


DEFAULT_SCALE = SignificanceScale()


def bucket(woe_value: float, scale: SignificanceScale = DEFAULT_SCALE) -> str:
    """Significance category for a WoE value (mirror-symmetric in sign)."""
    w = float(woe_value)
    if not np.isfinite(w):
        raise InvalidDataError(f"woe value must be finite, got {w}")
    t1, t2, t3 = scale.thresholds
    mag = abs(w)
    if mag <= t1:
        return scale.categories[3]
    if mag <= t2:
        strength = 1
    elif mag <= t3:
        strength = 2
    else:
        strength = 3
    return scale.categories[3 + strength] if w > 0 else scale.categories[3 - strength]


def direction(woe_value: float, scale: SignificanceScale = DEFAULT_SCALE) -> str:
    """supports / refutes / neutral; neutral iff |woe| is not significant."""
    w = float(woe_value)
    if not np.isfinite(w):
        raise InvalidDataError(f"woe value must be finite, got {w}")
    if abs(w) <= scale.thresholds[0]:
        return NEUTRAL
    return SUPPORTS if w > 0 else REFUTES


@dataclass(frozen=True)
class EvidenceItem:
    feature_id: int
    feature_name: str
    woe: float
    category: str
    direction: str


@dataclass(frozen=True)
class HypothesisReport:
    """One hypothesis's evidence bundle.

    ``hypothesis`` is None when the label has been redacted (condition C2);
    redaction is structural so serialization cannot leak the name. Items are
    sorted by |woe| descending, feature id ascending on ties.
    """

    hypothesis: Label | None
    items: tuple[EvidenceItem, ...]
    total_woe: float
    weighted_total_woe: float
    gamma_used: tuple[float, ...]

    def redacted(self) -> "HypothesisReport":
        return HypothesisReport(
            hypothesis=None,
            items=self.items,
            total_woe=self.total_woe,
            weighted_total_woe=self.weighted_total_woe,
            gamma_used=self.gamma_used,
        )


def report(
    model: GaussianEvidenceModel,
    x,
    h,
    gamma=None,
    scale: SignificanceScale = DEFAULT_SCALE,
) -> HypothesisReport:
    """Per-feature evidence items plus plain and importance-weighted totals."""
    x = validate_features(model, x)
    g = _validate_gamma(model, gamma)
    woes = _per_feature_woe(model, x, h)
    items = [
        EvidenceItem(
            feature_id=i,
            feature_name=model.feature_names[i],
            woe=float(woes[i]),
            category=bucket(float(woes[i]), scale),
            direction=direction(float(woes[i]), scale),
        )
        for i in range(model.n_features)
    ]
    items.sort(key=lambda it: (-abs(it.woe), it.feature_id))
    label = model.label_by_id(h.id if isinstance(h, Label) else int(h))
    return HypothesisReport(
        hypothesis=label,
        items=tuple(items),
        total_woe=float(woes.sum()),
        weighted_total_woe=float((g * woes).sum()),
        gamma_used=tuple(float(v) for v in g),
    )


@dataclass(frozen=True)
class ConditionView:
    """Payload for one decision-support condition.

    C1 (recommendation-driven): the predicted label plus its report.
    C2 (explanation-only): the predicted label's report, label redacted.
    C3 (hypothesis-driven): one report per hypothesis, no prediction marker.
    """

    condition: str
    prediction: Label | None
    reports: tuple[HypothesisReport, ...]


def condition_view(
    model: GaussianEvidenceModel,
    x,
    condition: str,
    gamma=None,
    scale: SignificanceScale = DEFAULT_SCALE,
) -> ConditionView:
    if condition not in CONDITIONS:
        raise InvalidDataError(f"condition must be one of {CONDITIONS}, got {condition!r}")
    x = validate_features(model, x)
    if condition == "C3":
        reports = tuple(report(model, x, h, gamma, scale) for h in range(model.n_classes))
        return ConditionView(condition="C3", prediction=None, reports=reports)
    predicted = classify(model, x)
    rep = report(model, x, predicted, gamma, scale)
    if condition == "C1":
        return ConditionView(condition="C1", prediction=predicted, reports=(rep,))
    return ConditionView(condition="C2", prediction=None, reports=(rep.redacted(),))


def uncertainty(probabilities) -> float:
    """Shannon entropy (natural log) of a probability vector; 0 log 0 = 0."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistributionError("expected a non-empty probability vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidDistributionError("probabilities must be finite and non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-6:
        raise InvalidDistributionError(f"probabilities sum to {float(p.sum())}, expected 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def rank_hypotheses(model: GaussianEvidenceModel, x) -> tuple[tuple[Label, float], ...]:
    """Labels sorted by posterior mass, descending; ties keep label-id order."""
    post = _posterior(model, x)
    order = np.argsort(-post, kind="stable")
    return tuple((model.labels[int(i)], float(post[int(i)])) for i in order)
