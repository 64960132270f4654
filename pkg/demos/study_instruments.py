"""Study-measurement instruments: entropy-driven instance selection and the
performance / reliance metrics computed over simulated participant answers.

Run:  python3 demos/study_instruments.py
"""

import numpy as np

from woe_engine.dataset import LabeledTable
from woe_engine.evidence import uncertainty
from woe_engine.metrics import (
    INSTANCE_CATEGORIES,
    ModelTrace,
    StudyResponse,
    brier,
    over_reliance,
    select_instances,
    selected_hypotheses_pct,
    under_reliance,
)
from woe_engine.model import ClassStats, GaussianEvidenceModel, Label, classify, posterior

# three unit-variance classes on an equilateral triangle: points near a mean
# are low-uncertainty, points near the centre are high-uncertainty
angles = np.deg2rad([90.0, 210.0, 330.0])
model = GaussianEvidenceModel(
    labels=tuple(Label(i, n) for i, n in enumerate(("low", "medium", "high"))),
    feature_names=("f0", "f1"),
    per_class=tuple(
        ClassStats(mean=6.0 * np.array([np.cos(a), np.sin(a)]),
                   covariance=np.eye(2), prior=1 / 3)
        for a in angles
    ),
)

rng = np.random.default_rng(11)
rows, labels = [], []
for _ in range(300):
    c = int(rng.integers(3))
    # mix of points near the class mean and near the ambiguous centre
    t = rng.uniform(0, 1.1)
    point = t * model.per_class[c].mean + rng.normal(scale=0.4, size=2)
    rows.append(point)
    labels.append(c)
pool = LabeledTable(feature_names=model.feature_names,
                    rows=np.asarray(rows), labels=np.asarray(labels))

selection = select_instances(model, pool, low_t=0.3, high_t=0.7, per_category=3)
print("entropy-selected study instances (3 per category wanted):")
for category in INSTANCE_CATEGORIES:
    picks = selection.by_category[category]
    ids = ", ".join(f"#{p.index}(u={p.entropy:.2f})" for p in picks)
    print(f"  {category:<24} {ids or '(none)'}")
if selection.shortfalls:
    print("  shortfalls:", ", ".join(selection.shortfalls))

# --- simulate a participant answering the selected tasks -------------------
tasks = [p for cat in INSTANCE_CATEGORIES for p in selection.by_category[cat]]
responses, traces = [], []
for task in tasks:
    x = pool.rows[task.index]
    model_label = classify(model, x).id
    # this participant mostly follows the model, hedging on uncertain tasks
    follows = rng.uniform() < 0.8
    chosen = model_label if follows else int(rng.integers(3))
    confident = uncertainty(posterior(model, x)) < 0.3
    responses.append(
        StudyResponse(
            confidence=0.9 if confident else 0.5,
            correct=int(chosen == task.true_label),
            participant_label=chosen,
            duration=float(rng.uniform(8, 40)),
        )
    )
    traces.append(ModelTrace(model_label=model_label, true_label=task.true_label))

print(f"\nsimulated participant over {len(tasks)} tasks:")
print(f"  brier score     {brier(responses):.3f}")
over = over_reliance(responses, traces)
under = under_reliance(responses, traces)
print(f"  over-reliance   {'undefined' if over is None else f'{over:.3f}'}")
print(f"  under-reliance  {'undefined' if under is None else f'{under:.3f}'}")
print(f"  hypotheses consulted on one task: "
      f"{selected_hypotheses_pct({0, 2}, model.n_classes):.3f} of the set")
