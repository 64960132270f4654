"""Scripted study session against the HTTP service (in-process).

Builds a model document and a task pool, starts the service app, walks a
within-subject session through task fetches, hypothesis-driven evidence
queries, decision submissions and a rating, then re-aggregates the export.

Run:  python3 demos/study_service_session.py
"""

import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from woe_engine.evidence import DEFAULT_SCALE
from woe_engine.metrics import records_from_export, brier, selected_pct_from_export
from woe_engine.model import ClassStats, GaussianEvidenceModel, Label
from woe_engine.persistence import Task, TaskPool, save_model, save_task_pool
from woe_engine.service import ServiceConfig, create_app

workdir = Path(tempfile.mkdtemp(prefix="woe_demo_"))

angles = np.deg2rad([90.0, 210.0, 330.0])
model = GaussianEvidenceModel(
    labels=tuple(Label(i, n) for i, n in enumerate(("low", "medium", "high"))),
    feature_names=("quality", "age"),
    per_class=tuple(
        ClassStats(mean=6.0 * np.array([np.cos(a), np.sin(a)]),
                   covariance=np.eye(2), prior=1 / 3)
        for a in angles
    ),
)
save_model(model, DEFAULT_SCALE, str(workdir / "model.json"))

rng = np.random.default_rng(21)
tasks = tuple(
    Task(
        id=f"t{i:02d}",
        values=tuple(float(v) for v in model.per_class[i % 3].mean + rng.normal(scale=0.4, size=2)),
        true_label=(i % 3) if i % 4 else ((i + 1) % 3),
    )
    for i in range(16)
)
save_task_pool(TaskPool(feature_names=model.feature_names, tasks=tasks),
               str(workdir / "pool.json"))

config = ServiceConfig(
    model_path=str(workdir / "model.json"),
    task_pool_path=str(workdir / "pool.json"),
    policy="within-subject",
    seed=99,
    log_dir=str(workdir / "sessions"),
)
client = TestClient(create_app(config))

session = client.post("/sessions", json={"seed": 1234}).json()
sid = session["id"]
print(f"session {sid[:8]}… conditions {session['condition']}, "
      f"{session['task_count']} tasks")

for index in range(session["task_count"]):
    task = client.get(f"/sessions/{sid}/tasks/{index}").json()
    if task["condition"] == "C3":
        # hypothesis-driven: peek at two hypotheses before deciding
        for hyp in (0, 2):
            client.get(f"/sessions/{sid}/tasks/{index}/evidence",
                       params={"hypothesis": hyp})
        chosen = 0
    else:
        chosen = task["prediction"]["id"]
    allocation = [10.0, 10.0, 10.0]
    allocation[chosen] = 80.0
    client.post(f"/sessions/{sid}/decisions",
                json={"task_index": index, "label": chosen,
                      "allocation": allocation, "client_duration": 12.0})

client.post(f"/sessions/{sid}/ratings", json={"metric": "in-control", "value": 2})

export = client.get(f"/sessions/{sid}/export").json()
responses, traces = records_from_export(export)
print(f"decisions recorded: {len(responses)}")
print(f"service summary brier:   {export['summary']['brier']:.4f}")
print(f"re-aggregated brier:     {brier(responses):.4f}")
print(f"selected hypotheses pct: {selected_pct_from_export(export):.4f}")
print(f"events logged: {len(export['events'])}, ratings: {len(export['ratings'])}")
print(f"session log on disk: {config.log_dir}/{sid}.jsonl")
