"""HTTP study service: sessions with counterbalanced task delivery,
per-hypothesis evidence in the hypothesis-driven condition, decision and
rating capture, and a re-aggregatable export.

Every session appends its records to one JSONL log file, so a crashed or
finished study can be exported offline with :func:`export_from_log`. The
fitted model is immutable and read lock-free; requests within one session
are serialized by a per-session lock.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from fastapi import FastAPI, HTTPException

from . import metrics
from .errors import EngineError
from .evidence import CONDITIONS, SignificanceScale, condition_view, report
from .model import GaussianEvidenceModel, classify
from .persistence import (
    TaskPool,
    load_model,
    load_task_pool,
    report_to_doc,
)

FIXED = "fixed"
RANDOM_BETWEEN = "random-between"
WITHIN_SUBJECT = "within-subject"
POLICIES = (FIXED, RANDOM_BETWEEN, WITHIN_SUBJECT)

WITHIN_SUBJECT_PAIR = ("C1", "C3")

RATING_METRICS = ("in-control", "decision-making", "ease-of-use", "error-detection")

HYPOTHESIS_SELECTED = "hypothesis-selected"
HYPOTHESIS_DESELECTED = "hypothesis-deselected"
EVIDENCE_VIEWED = "evidence-viewed"
RECOMMENDATION_VIEWED = "recommendation-viewed"

ENV_PREFIX = "WOE_ENGINE_"


@dataclass(frozen=True)
class ServiceConfig:
    model_path: str
    task_pool_path: str
    policy: str = WITHIN_SUBJECT
    condition: str = "C1"  # used by the fixed policy
    seed: int = 0
    log_dir: str = "sessions"
    bind: str = "127.0.0.1:8000"

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise EngineError(f"unknown condition policy {self.policy!r}")
        if self.condition not in CONDITIONS:
            raise EngineError(f"unknown condition {self.condition!r}")


def config_from_env(**overrides) -> ServiceConfig:
    """Build a config from WOE_ENGINE_* environment variables, then apply
    explicit overrides (CLI flags win over the environment)."""
    def pick(name: str, default=None):
        return os.environ.get(ENV_PREFIX + name, default)

    values = {
        "model_path": pick("MODEL"),
        "task_pool_path": pick("TASKS"),
        "policy": pick("POLICY", WITHIN_SUBJECT),
        "condition": pick("CONDITION", "C1"),
        "seed": int(pick("SEED", "0")),
        "log_dir": pick("LOG_DIR", "sessions"),
        "bind": pick("BIND", "127.0.0.1:8000"),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if not values["model_path"] or not values["task_pool_path"]:
        raise EngineError(
            "model and task pool paths are required "
            f"(flags or {ENV_PREFIX}MODEL / {ENV_PREFIX}TASKS)"
        )
    return ServiceConfig(**values)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class SessionState:
    id: str
    seed: int
    conditions: tuple[str, ...]
    task_order: tuple[int, ...]  # indices into the task pool
    slot_conditions: tuple[str, ...]
    created_at: str
    first_fetch_wall: dict = field(default_factory=dict)  # slot -> iso timestamp
    first_fetch_mono: dict = field(default_factory=dict)  # slot -> monotonic seconds
    events: list = field(default_factory=list)
    decisions: dict = field(default_factory=dict)  # slot -> decision doc
    ratings: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    seq: int = 0
    last_ts: str = ""
    lock: threading.Lock = field(default_factory=threading.Lock)

    def next_timestamp(self) -> str:
        ts = _now_iso()
        if ts < self.last_ts:
            ts = self.last_ts
        self.last_ts = ts
        return ts

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def session_doc(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "condition": list(self.conditions),
            "task_order": list(self.task_order),
            "slot_conditions": list(self.slot_conditions),
            "created_at": self.created_at,
        }


class StudyEngine:
    """Shared study state: the fitted model, the task pool, and sessions."""

    def __init__(
        self,
        model: GaussianEvidenceModel,
        scale: SignificanceScale,
        pool: TaskPool,
        config: ServiceConfig,
    ) -> None:
        if len(pool.feature_names) != model.n_features:
            raise EngineError(
                f"task pool has {len(pool.feature_names)} features, "
                f"model expects {model.n_features}"
            )
        self.model = model
        self.scale = scale
        self.pool = pool
        self.config = config
        self.predictions = tuple(classify(model, t.values).id for t in pool.tasks)
        self._sessions: dict[str, SessionState] = {}
        self._registry_lock = threading.Lock()
        self._server_rng = np.random.default_rng(config.seed)
        os.makedirs(config.log_dir, exist_ok=True)

    # -- session registry ---------------------------------------------------

    def _log_path(self, session_id: str) -> str:
        return os.path.join(self.config.log_dir, f"{session_id}.jsonl")

    def _append_log(self, session: SessionState, record: dict) -> None:
        with open(self._log_path(session.id), "a", encoding="utf-8") as f:
            f.write(json.dumps(record, allow_nan=False) + "\n")

    def get_session(self, session_id: str) -> SessionState:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def create_session(self, seed: int | None = None, condition: str | None = None) -> SessionState:
        if not self.pool.tasks:
            raise HTTPException(status_code=409, detail="no tasks registered")
        with self._registry_lock:
            if seed is None:
                seed = int(self._server_rng.integers(0, 2**31 - 1))
        rng = np.random.default_rng(seed)
        n = len(self.pool.tasks)
        order = tuple(int(i) for i in rng.permutation(n))
        policy = self.config.policy
        if policy == WITHIN_SUBJECT:
            pair = list(WITHIN_SUBJECT_PAIR)
            rng.shuffle(pair)
            first = (n + 1) // 2
            conditions = tuple(pair)
            slot_conditions = tuple([pair[0]] * first + [pair[1]] * (n - first))
        else:
            if policy == RANDOM_BETWEEN:
                chosen = str(rng.choice(list(CONDITIONS)))
            else:
                chosen = condition or self.config.condition
            if chosen not in CONDITIONS:
                raise HTTPException(status_code=422, detail=f"unknown condition {chosen!r}")
            conditions = (chosen,)
            slot_conditions = tuple([chosen] * n)
        session = SessionState(
            id=uuid.uuid4().hex,
            seed=seed,
            conditions=conditions,
            task_order=order,
            slot_conditions=slot_conditions,
            created_at=_now_iso(),
        )
        session.last_ts = session.created_at
        with self._registry_lock:
            self._sessions[session.id] = session
        self._append_log(session, {"type": "created", "session": session.session_doc()})
        return session

    # -- request handlers ---------------------------------------------------

    def _slot(self, session: SessionState, index: int) -> tuple[int, str]:
        if not 0 <= index < len(session.task_order):
            raise HTTPException(status_code=404, detail=f"task index {index} out of range")
        return session.task_order[index], session.slot_conditions[index]

    def _record_event(self, session: SessionState, kind: str, index: int, payload: int) -> None:
        pool_idx, _ = self._slot(session, index)
        event = {
            "kind": kind,
            "task_index": index,
            "task_id": self.pool.tasks[pool_idx].id,
            "payload": int(payload),
            "timestamp": session.next_timestamp(),
            "seq": session.next_seq(),
        }
        session.events.append(event)
        self._append_log(session, {"type": "event", "event": event})

    def get_task(self, session_id: str, index: int) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            pool_idx, condition = self._slot(session, index)
            task = self.pool.tasks[pool_idx]
            first_fetch = index not in session.first_fetch_wall
            if first_fetch:
                session.first_fetch_wall[index] = session.next_timestamp()
                session.first_fetch_mono[index] = time.monotonic()
                self._append_log(
                    session,
                    {
                        "type": "task-fetched",
                        "task_index": index,
                        "task_id": task.id,
                        "condition": condition,
                        "timestamp": session.first_fetch_wall[index],
                    },
                )
            payload = {
                "condition": condition,
                "index": index,
                "task_id": task.id,
                "feature_names": list(self.pool.feature_names),
                "values": list(task.values),
                "n_classes": self.model.n_classes,
            }
            if condition == "C3":
                payload["labels"] = [
                    {"id": lab.id, "name": lab.name} for lab in self.model.labels
                ]
                # evidence is served on demand per hypothesis; none included
            else:
                view = condition_view(self.model, task.values, condition, scale=self.scale)
                if condition == "C1":
                    payload["labels"] = [
                        {"id": lab.id, "name": lab.name} for lab in self.model.labels
                    ]
                    payload["prediction"] = {
                        "id": view.prediction.id,
                        "name": view.prediction.name,
                    }
                payload["report"] = report_to_doc(view.reports[0])
                if first_fetch:
                    kind = RECOMMENDATION_VIEWED if condition == "C1" else EVIDENCE_VIEWED
                    self._record_event(
                        session, kind, index, self.predictions[pool_idx]
                    )
            return payload

    def get_evidence(self, session_id: str, index: int, hypothesis: int) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            pool_idx, condition = self._slot(session, index)
            if condition != "C3":
                violation = {
                    "task_index": index,
                    "condition": condition,
                    "hypothesis": int(hypothesis),
                    "timestamp": session.next_timestamp(),
                }
                session.violations.append(violation)
                self._append_log(session, {"type": "violation", "violation": violation})
                raise HTTPException(
                    status_code=409,
                    detail=(
                        f"condition-violation: per-hypothesis evidence is only "
                        f"served in C3, task {index} is {condition}"
                    ),
                )
            if not 0 <= hypothesis < self.model.n_classes:
                raise HTTPException(
                    status_code=422, detail=f"unknown hypothesis {hypothesis}"
                )
            task = self.pool.tasks[pool_idx]
            kind = HYPOTHESIS_SELECTED if index not in session.decisions else EVIDENCE_VIEWED
            self._record_event(session, kind, index, hypothesis)
            rep = report(self.model, task.values, hypothesis, scale=self.scale)
            return report_to_doc(rep)

    def submit_decision(self, session_id: str, body: dict) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            if "task_index" not in body:
                raise HTTPException(status_code=422, detail="task_index is required")
            index = int(body["task_index"])
            pool_idx, condition = self._slot(session, index)
            if index in session.decisions:
                raise HTTPException(
                    status_code=409, detail=f"task {index} already has a decision"
                )
            if "label" not in body:
                raise HTTPException(status_code=422, detail="label is required")
            label = int(body["label"])
            if not 0 <= label < self.model.n_classes:
                raise HTTPException(status_code=422, detail=f"unknown label {label}")
            has_conf = body.get("confidence") is not None
            has_alloc = body.get("allocation") is not None
            if has_conf == has_alloc:
                raise HTTPException(
                    status_code=422,
                    detail="exactly one of confidence or allocation is required",
                )
            allocation = None
            if has_alloc:
                allocation = [float(v) for v in body["allocation"]]
                if len(allocation) != self.model.n_classes:
                    raise HTTPException(
                        status_code=422,
                        detail=f"allocation needs {self.model.n_classes} entries",
                    )
                if any(v < 0 for v in allocation):
                    raise HTTPException(
                        status_code=422, detail="allocation entries must be non-negative"
                    )
                total = sum(allocation)
                if abs(total - 100.0) > 1e-6:
                    raise HTTPException(
                        status_code=422,
                        detail=f"allocation sums to {total}, expected 100",
                    )
                confidence = allocation[label] / 100.0
            else:
                confidence = float(body["confidence"])
                if not 0.0 <= confidence <= 1.0:
                    raise HTTPException(
                        status_code=422,
                        detail=f"confidence must be in [0, 1], got {confidence}",
                    )
            client_duration = body.get("client_duration")
            if client_duration is not None:
                client_duration = float(client_duration)
                if client_duration < 0:
                    raise HTTPException(
                        status_code=422, detail="client_duration must be >= 0"
                    )
            server_duration = None
            if index in session.first_fetch_mono:
                server_duration = time.monotonic() - session.first_fetch_mono[index]
            task = self.pool.tasks[pool_idx]
            decision = {
                "task_index": index,
                "task_id": task.id,
                "condition": condition,
                "label": label,
                "confidence": confidence,
                "allocation": allocation,
                "client_duration": client_duration,
                "server_duration": server_duration,
                "timestamp": session.next_timestamp(),
                "true_label": task.true_label,
                "model_label": self.predictions[pool_idx],
            }
            session.decisions[index] = decision
            self._append_log(session, {"type": "decision", "decision": decision})
            return {"accepted": True, "task_index": index, "server_duration": server_duration}

    def submit_rating(self, session_id: str, body: dict) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            metric = body.get("metric")
            if metric not in RATING_METRICS:
                raise HTTPException(
                    status_code=422, detail=f"metric must be one of {RATING_METRICS}"
                )
            try:
                value = int(body["value"])
            except (KeyError, TypeError, ValueError):
                raise HTTPException(status_code=422, detail="integer value is required") from None
            if not -5 <= value <= 5:
                raise HTTPException(
                    status_code=422, detail=f"value must be in [-5, 5], got {value}"
                )
            rating = {
                "metric": metric,
                "value": value,
                "timestamp": session.next_timestamp(),
            }
            session.ratings.append(rating)
            self._append_log(session, {"type": "rating", "rating": rating})
            return {"accepted": True}

    def export_session(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            return build_export(session, self.pool, self.predictions, self.model.n_classes)


def build_export(
    session: SessionState,
    pool: TaskPool,
    predictions: tuple[int, ...],
    n_classes: int,
) -> dict:
    """Assemble the full session log document consumed by the metrics module."""
    slots = []
    for index, pool_idx in enumerate(session.task_order):
        task = pool.tasks[pool_idx]
        slots.append(
            {
                "index": index,
                "task_id": task.id,
                "condition": session.slot_conditions[index],
                "true_label": task.true_label,
                "model_label": predictions[pool_idx],
                "first_fetched_at": session.first_fetch_wall.get(index),
            }
        )
    decisions = [session.decisions[i] for i in sorted(session.decisions)]
    doc = {
        "format_version": 1,
        "kind": "session-export",
        "n_classes": n_classes,
        "session": session.session_doc(),
        "slots": slots,
        "decisions": decisions,
        "events": list(session.events),
        "ratings": list(session.ratings),
        "violations": list(session.violations),
    }
    responses, traces = metrics.records_from_export(doc)
    summary: dict = {"n_decisions": len(decisions)}
    summary["brier"] = metrics.brier(responses) if responses else None
    summary["over_reliance"] = metrics.over_reliance(responses, traces) if responses else None
    summary["under_reliance"] = metrics.under_reliance(responses, traces) if responses else None
    summary["selected_hypotheses_pct"] = metrics.selected_pct_from_export(doc)
    doc["summary"] = summary
    return doc


def replay_log(path: str, pool: TaskPool, predictions: tuple[int, ...]) -> SessionState:
    """Rebuild a session from its append-only JSONL log."""
    session: SessionState | None = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            kind = record.get("type")
            if kind == "created":
                doc = record["session"]
                session = SessionState(
                    id=doc["id"],
                    seed=doc["seed"],
                    conditions=tuple(doc["condition"]),
                    task_order=tuple(doc["task_order"]),
                    slot_conditions=tuple(doc["slot_conditions"]),
                    created_at=doc["created_at"],
                )
            elif session is None:
                raise EngineError(f"{path}: log does not start with a created record")
            elif kind == "task-fetched":
                session.first_fetch_wall[record["task_index"]] = record["timestamp"]
            elif kind == "event":
                session.events.append(record["event"])
            elif kind == "decision":
                session.decisions[record["decision"]["task_index"]] = record["decision"]
            elif kind == "rating":
                session.ratings.append(record["rating"])
            elif kind == "violation":
                session.violations.append(record["violation"])
            else:
                raise EngineError(f"{path}: unknown log record type {kind!r}")
    if session is None:
        raise EngineError(f"{path}: empty session log")
    return session


def export_from_log(
    log_path: str, model_path: str, task_pool_path: str
) -> dict:
    """Offline export: rebuild the session from its log and emit the same
    document the live service would."""
    model, _scale = load_model(model_path)
    pool = load_task_pool(task_pool_path)
    predictions = tuple(classify(model, t.values).id for t in pool.tasks)
    session = replay_log(log_path, pool, predictions)
    return build_export(session, pool, predictions, model.n_classes)


def create_app(config: ServiceConfig) -> FastAPI:
    model, scale = load_model(config.model_path)
    pool = load_task_pool(config.task_pool_path)
    engine = StudyEngine(model, scale, pool, config)
    return build_app(engine)


def build_app(engine: StudyEngine) -> FastAPI:
    app = FastAPI(title="woe-engine study service")
    app.state.engine = engine

    @app.get("/study")
    def study_meta() -> dict:
        labels = [{"id": lab.id, "name": lab.name} for lab in engine.model.labels]
        return {
            "kind": "study-meta",
            "feature_names": list(engine.pool.feature_names),
            "labels": labels,
            "n_classes": engine.model.n_classes,
            "task_count": len(engine.pool.tasks),
            "policy": engine.config.policy,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: dict | None = None) -> dict:
        body = body or {}
        seed = body.get("seed")
        session = engine.create_session(
            seed=None if seed is None else int(seed),
            condition=body.get("condition"),
        )
        return {
            "id": session.id,
            "condition": list(session.conditions),
            "task_count": len(session.task_order),
            "created_at": session.created_at,
        }

    @app.get("/sessions/{session_id}/tasks/{index}")
    def get_task(session_id: str, index: int) -> dict:
        return engine.get_task(session_id, index)

    @app.get("/sessions/{session_id}/tasks/{index}/evidence")
    def get_evidence(session_id: str, index: int, hypothesis: int) -> dict:
        return engine.get_evidence(session_id, index, hypothesis)

    @app.post("/sessions/{session_id}/decisions")
    def submit_decision(session_id: str, body: dict) -> dict:
        return engine.submit_decision(session_id, body)

    @app.post("/sessions/{session_id}/ratings")
    def submit_rating(session_id: str, body: dict) -> dict:
        return engine.submit_rating(session_id, body)

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str) -> dict:
        return engine.export_session(session_id)

    return app
