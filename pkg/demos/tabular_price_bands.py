"""End-to-end tabular walkthrough: price bands from a numeric target.

Generates a synthetic housing-like table, discretizes the price into three
bands, balances the classes, splits 80/20, fits the Gaussian evidence model
and prints per-feature weight-of-evidence reports with significance glyphs.

Run:  python3 demos/tabular_price_bands.py
"""

import numpy as np

from woe_engine.dataset import DiscretizationSpec, LabeledTable, balance, discretize_target, split
from woe_engine.evidence import GLYPHS, condition_view, report
from woe_engine.model import classify, fit, posterior

rng = np.random.default_rng(7)

# --- synthesize a table whose price depends on quality and age -------------
n = 900
quality = rng.uniform(1, 10, size=n)
age = rng.uniform(0, 80, size=n)
fireplaces = rng.integers(0, 3, size=n).astype(float)  # irrelevant on purpose
price = 40_000 * quality - 1_500 * age + rng.normal(scale=30_000, size=n)

bands = discretize_target(price, DiscretizationSpec(n_bins=3))
table = LabeledTable(
    feature_names=("quality", "age", "fireplaces"),
    rows=np.column_stack([quality, age, fireplaces]),
    labels=bands,
)
print("band counts before balancing:", table.class_counts())

balanced = balance(table, strategy="random-undersample", seed=1)
train, test = split(balanced, fraction=0.8, seed=2)
print(f"train {train.n_rows} rows / test {test.n_rows} rows")

# --- fit and inspect one instance ------------------------------------------
model = fit(train, assumption="dependent", label_names=["low", "medium", "high"])
x = test.rows[0]
true_band = int(test.labels[0])

predicted = classify(model, x)
post = posterior(model, x)
print(f"\ninstance {np.round(x, 2)}  true band: {model.labels[true_band].name}")
print(f"prediction: {predicted.name}   posterior: {np.round(post, 3)}")

for label in model.labels:
    rep = report(model, x, label)
    print(f"\nevidence for '{label.name}'  (total {rep.total_woe:+.2f})")
    for item in rep.items:
        glyph = GLYPHS[item.category]
        print(f"  {item.feature_name:<10} {item.woe:+8.3f}  {glyph:<3} {item.direction}")

# --- the three decision-support conditions ---------------------------------
for condition in ("C1", "C2", "C3"):
    view = condition_view(model, x, condition)
    shown = view.prediction.name if view.prediction else "(hidden)"
    print(f"{condition}: prediction={shown}, reports={len(view.reports)}")

# test accuracy of the total-WoE decision rule
accuracy = np.mean([classify(model, row).id == lab for row, lab in zip(test.rows, test.labels)])
print(f"\ntest accuracy of the total-WoE rule: {accuracy:.3f}")
