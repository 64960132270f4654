"""Concept-activation pathway: evidence over image concepts.

An upstream extractor (out of scope here) turns an image into a vector of
concept activations. This demo writes a small activation file in the
ingestion format, loads it back, fits the evidence model with the full
covariance (no independence assumption) and ranks the seven hypotheses for
one instance.

Run:  python3 demos/concept_activations.py
"""

import tempfile

import numpy as np

from woe_engine.dataset import ConceptActivationTable, load_concepts, write_concepts
from woe_engine.evidence import rank_hypotheses, report, uncertainty
from woe_engine.model import fit, posterior

CONCEPTS = (
    "atypical_pigment_network", "typical_pigment_network", "blue_whitish_veil",
    "irregular_vascular", "regular_vascular", "irregular_pigmentation",
    "regular_pigmentation", "irregular_streaks", "regular_streaks",
    "regression_structures", "irregular_dots_globules", "regular_dots_globules",
)
CLASSES = ("akiec", "bcc", "bkl", "df", "mel", "nv", "vasc")

rng = np.random.default_rng(3)
per_class = 30
profiles = rng.uniform(0.2, 1.8, size=(len(CLASSES), len(CONCEPTS)))
rows = np.vstack(
    [profiles[c] + rng.normal(scale=0.3, size=(per_class, len(CONCEPTS)))
     for c in range(len(CLASSES))]
)
labels = np.repeat(np.arange(len(CLASSES)), per_class)

table = ConceptActivationTable(
    feature_names=CONCEPTS,
    rows=rows,
    labels=labels,
    instance_ids=tuple(f"img{i:03d}" for i in range(len(labels))),
)

# round-trip through the on-disk format
with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as f:
    path = f.name
write_concepts(table, path)
loaded = load_concepts(path)
print(f"loaded {loaded.n_rows} instances, {len(loaded.concept_names)} concepts, "
      f"{loaded.n_classes} classes from {path}")

model = fit(loaded, label_names=CLASSES)  # dependent mode is the default
x = loaded.rows[5]
print(f"\ninstance {loaded.instance_ids[5]} (true class {CLASSES[loaded.labels[5]]})")
print(f"posterior entropy: {uncertainty(posterior(model, x)):.3f}")

print("\nhypotheses ranked by posterior mass:")
for label, mass in rank_hypotheses(model, x):
    print(f"  {label.name:<6} {mass:.3f}")

best = rank_hypotheses(model, x)[0][0]
rep = report(model, x, best)
print(f"\nstrongest concept evidence for '{best.name}':")
for item in rep.items[:5]:
    print(f"  {item.feature_name:<26} {item.woe:+7.2f}  {item.category}")
