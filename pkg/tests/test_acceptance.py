"""Acceptance suite: one test per release criterion, each with its stated
tolerance and runtime budget. The terminal summary prints one PASS/FAIL
line per criterion (see conftest)."""

import itertools
import json
import math
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy.stats import multivariate_normal

from woe_engine import metrics
from woe_engine.dataset import ConceptActivationTable, LabeledTable
from woe_engine.evidence import (
    CATEGORIES,
    DEFAULT_SCALE,
    bucket,
    condition_view,
    report,
    uncertainty,
)
from woe_engine.metrics import (
    INSTANCE_CATEGORIES,
    ModelTrace,
    StudyResponse,
    brier,
    over_reliance,
    prf_from_counts,
    select_instances,
    under_reliance,
)
from woe_engine.model import (
    classify,
    classify_joint,
    fit,
    log_density_subset,
    posterior,
    total_woe,
)
from woe_engine.persistence import (
    Task,
    TaskPool,
    load_model,
    save_model,
    save_task_pool,
    view_to_doc,
)
from woe_engine.service import ServiceConfig, create_app

from conftest import make_model
from test_metrics import equilateral_model
from test_service import LABEL_NAMES, study_model


class Budget:
    def __init__(self, seconds):
        self.limit = seconds
        self.start = time.perf_counter()

    def check(self):
        elapsed = time.perf_counter() - self.start
        assert elapsed < self.limit, f"runtime {elapsed:.2f}s exceeds {self.limit}s budget"


def test_chain_rule_density_identity():
    """100 random dependent models, every proper subset, 1e-8, < 10 s."""
    budget = Budget(10.0)
    rng = np.random.default_rng(12345)
    checked = 0
    for trial in range(100):
        k = int(rng.integers(2, 5))
        d = int(rng.integers(2, 7))
        m = make_model(seed=50_000 + trial, k=k, d=d)
        x = rng.normal(scale=2.0, size=d)
        for h in range(k):
            stats = m.per_class[h]
            joint = multivariate_normal.logpdf(x, stats.mean, stats.covariance)
            for size in range(1, d):
                for subset in itertools.combinations(range(d), size):
                    rest = [i for i in range(d) if i not in subset]
                    marginal = multivariate_normal.logpdf(
                        x[rest], stats.mean[rest], stats.covariance[np.ix_(rest, rest)]
                    )
                    got = log_density_subset(m, h, subset, x)
                    assert got == pytest.approx(joint - marginal, abs=1e-8), (
                        trial, h, subset,
                    )
                    checked += 1
    assert checked > 2000
    budget.check()


def test_two_class_decision_equivalence():
    """20 uniform-prior models x 1000 points: S=all WoE argmax == posterior
    argmax, 100% agreement, < 5 s."""
    budget = Budget(5.0)
    agreements = 0
    total = 0
    for trial in range(20):
        rng = np.random.default_rng(60_000 + trial)
        d = int(rng.integers(2, 7))
        m = make_model(seed=61_000 + trial, k=2, d=d)  # uniform priors
        for _ in range(1000):
            x = rng.normal(scale=2.5, size=d)
            woe_decision = classify_joint(m, x).id
            bayes_decision = int(np.argmax(posterior(m, x)))
            agreements += woe_decision == bayes_decision
            total += 1
    assert total == 20_000
    assert agreements == total  # 100% agreement
    budget.check()


def test_synthetic_recoverability_within_two_points_of_bayes():
    """3-class d=4 mixture, 5000 train / 2000 test: total-WoE classifier
    within 2 percentage points of the analytic Bayes-optimal accuracy,
    < 30 s."""
    budget = Budget(30.0)
    rng = np.random.default_rng(2024)

    def spd(scale=1.0):
        a = rng.normal(size=(4, 4)) * scale
        return a @ a.T + 0.8 * np.eye(4)

    means = [rng.normal(scale=2.5, size=4) for _ in range(3)]
    covs = [spd() for _ in range(3)]

    def sample(n_per):
        rows = np.vstack(
            [rng.multivariate_normal(means[c], covs[c], size=n_per) for c in range(3)]
        )
        labels = np.repeat(np.arange(3), n_per)
        return rows, labels

    train_x, train_y = sample(5000 // 3 + 1)
    test_x, test_y = sample(2000 // 3 + 1)
    table = LabeledTable(
        feature_names=("f0", "f1", "f2", "f3"), rows=train_x, labels=train_y
    )
    model = fit(table)

    # analytic Bayes-optimal classifier uses the true generating parameters
    log_post = np.stack(
        [multivariate_normal.logpdf(test_x, means[c], covs[c]) for c in range(3)],
        axis=1,
    )
    bayes_acc = float(np.mean(np.argmax(log_post, axis=1) == test_y))

    woe_pred = np.array([classify(model, x).id for x in test_x])
    woe_acc = float(np.mean(woe_pred == test_y))

    assert abs(woe_acc - bayes_acc) <= 0.02, (woe_acc, bayes_acc)
    budget.check()


def test_hand_value_metric_suite():
    """Frozen hand-computed metric values, < 1 s."""
    budget = Budget(1.0)

    def resp(c, a, label=0):
        return StudyResponse(confidence=c, correct=a, participant_label=label)

    # Brier
    assert brier([resp(1.0, 1)] * 3) == 0.0
    assert brier([resp(0.0, 0)] * 3) == 0.0
    assert brier([resp(0.7, 1), resp(0.2, 0)]) == pytest.approx(0.065, abs=1e-12)

    # over-reliance
    wrong = [ModelTrace(1, 0), ModelTrace(2, 0)]
    assert over_reliance([resp(0.5, 0, 1), resp(0.5, 0, 2)], wrong) == 1.0
    assert over_reliance([resp(0.5, 1, 0), resp(0.5, 1, 0)], wrong) == 0.0
    right = [ModelTrace(0, 0), ModelTrace(1, 1)]
    assert over_reliance([resp(0.5, 1, 0), resp(0.5, 1, 1)], right) is None

    # under-reliance
    assert under_reliance([resp(0.5, 1, 0), resp(0.5, 1, 1)], right) == 0.0
    assert under_reliance([resp(0.5, 1, 0), resp(0.5, 0, 0)], right) == 0.5
    assert under_reliance([resp(0.5, 0, 1)], [ModelTrace(1, 0)]) is None

    # precision / recall / F1
    p, r, f1 = prf_from_counts(8, 2, 2)
    assert (p, r) == (0.8, 0.8) and f1 == pytest.approx(0.8, abs=1e-12)
    rng = np.random.default_rng(777)
    for _ in range(1000):
        tp = int(rng.integers(1, 1000))
        fp = int(rng.integers(0, 1000))
        fn = int(rng.integers(0, 1000))
        _, _, f1 = prf_from_counts(tp, fp, fn)
        assert f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)
    budget.check()


def test_entropy_based_instance_selection():
    """Threshold semantics at 0.3 / 0.7 and four populated categories, < 1 s."""
    budget = Budget(1.0)
    confident = uncertainty([0.98, 0.01, 0.01])
    assert confident == pytest.approx(0.112, abs=5e-4)
    assert confident < 0.3
    uniform = uncertainty([1 / 3, 1 / 3, 1 / 3])
    assert uniform == pytest.approx(math.log(3.0), abs=1e-12)
    assert uniform > 0.7

    m = equilateral_model()
    rows, labels = [], []
    for c in range(3):
        rows.append(m.per_class[c].mean)
        labels.append(c)  # correct-low
        rows.append(m.per_class[c].mean)
        labels.append((c + 1) % 3)  # wrong-low
    rows.append(np.zeros(2))
    labels.append(int(classify(m, np.zeros(2)).id))  # correct-high
    rows.append(np.zeros(2))
    labels.append((int(classify(m, np.zeros(2)).id) + 1) % 3)  # wrong-high
    # a mid-entropy point, excluded by construction
    for t in np.linspace(0.0, 1.0, 2000):
        mid = t * m.per_class[0].mean
        if 0.35 < uncertainty(posterior(m, mid)) < 0.65:
            break
    rows.append(mid)
    labels.append(0)
    pool = LabeledTable(
        feature_names=m.feature_names, rows=np.asarray(rows), labels=np.asarray(labels)
    )
    selection = select_instances(m, pool, low_t=0.3, high_t=0.7)
    for cat in INSTANCE_CATEGORIES:
        assert len(selection.by_category[cat]) >= 1, cat
    selected = {i.index for insts in selection.by_category.values() for i in insts}
    assert len(rows) - 1 not in selected  # mid-entropy instance excluded
    for insts in selection.by_category.values():
        for inst in insts:
            assert inst.entropy < 0.3 or inst.entropy > 0.7
    budget.check()


def test_significance_bucketing_sweep():
    """Mirror symmetry + monotonicity over 10,000 values; all 7 categories
    reachable, < 1 s."""
    budget = Budget(1.0)
    sweep = np.linspace(-8.0, 8.0, 10_000)
    seen = set()
    last_rank = None
    for w in sweep:
        cat = bucket(float(w), DEFAULT_SCALE)
        mirrored = bucket(float(-w), DEFAULT_SCALE)
        assert CATEGORIES.index(cat) + CATEGORIES.index(mirrored) == 6  # mirror
        rank = CATEGORIES.index(cat)
        if last_rank is not None:
            assert rank >= last_rank  # monotone along the increasing sweep
        last_rank = rank
        seen.add(cat)
    assert seen == set(CATEGORIES)
    budget.check()


def test_persistence_round_trip_bitwise(tmp_path):
    """save/load reproduces classify and report outputs bitwise on 1000
    random points, < 5 s."""
    budget = Budget(5.0)
    m = make_model(seed=70_001, k=3, d=4)
    path = tmp_path / "model.json"
    save_model(m, DEFAULT_SCALE, str(path))
    loaded, scale = load_model(str(path))
    assert scale.thresholds == DEFAULT_SCALE.thresholds
    rng = np.random.default_rng(70_002)
    for _ in range(1000):
        x = rng.normal(scale=3.0, size=4)
        assert classify(loaded, x) == classify(m, x)
        h = int(rng.integers(3))
        a = report(m, x, h, scale=DEFAULT_SCALE)
        b = report(loaded, x, h, scale=scale)
        assert [it.woe for it in a.items] == [it.woe for it in b.items]
        assert a.total_woe == b.total_woe
        assert a.weighted_total_woe == b.weighted_total_woe
        assert [it.category for it in a.items] == [it.category for it in b.items]
    budget.check()


def test_service_conformance(tmp_path):
    """Scripted within-subject session (16 tasks, 8+8): create / get /
    evidence / submit / export; export re-aggregates to identical Brier and
    selected-hypotheses percentage; C2 payload passes the label-leak scan.
    Runtime < 10 s."""
    budget = Budget(10.0)
    model = study_model()
    model_path = tmp_path / "model.json"
    save_model(model, DEFAULT_SCALE, str(model_path))
    rng = np.random.default_rng(80_000)
    tasks = []
    for i in range(16):
        c = i % 3
        point = model.per_class[c].mean + rng.normal(scale=0.3, size=2)
        true = c if i % 4 != 3 else (c + 1) % 3
        tasks.append(
            Task(id=f"t{i:02d}", values=tuple(float(v) for v in point), true_label=true)
        )
    pool = TaskPool(feature_names=model.feature_names, tasks=tuple(tasks))
    pool_path = tmp_path / "pool.json"
    save_task_pool(pool, str(pool_path))
    config = ServiceConfig(
        model_path=str(model_path),
        task_pool_path=str(pool_path),
        policy="within-subject",
        seed=80_001,
        log_dir=str(tmp_path / "sessions"),
    )
    client = TestClient(create_app(config))

    session = client.post("/sessions", json={"seed": 4242}).json()
    sid = session["id"]
    assert sorted(session["condition"]) == ["C1", "C3"]
    assert session["task_count"] == 16

    task_by_id = {t.id: t for t in tasks}
    my_responses = []
    my_traces = []
    my_selected_per_task = []
    conditions_seen = []
    for index in range(16):
        payload = client.get(f"/sessions/{sid}/tasks/{index}").json()
        conditions_seen.append(payload["condition"])
        true_label = task_by_id[payload["task_id"]].true_label
        model_label = classify(model, payload["values"]).id
        if payload["condition"] == "C3":
            queried = sorted({(index + j) % 3 for j in range(1 + index % 3)})
            for hyp in queried:
                r = client.get(
                    f"/sessions/{sid}/tasks/{index}/evidence",
                    params={"hypothesis": hyp},
                )
                assert r.status_code == 200
            my_selected_per_task.append(
                metrics.selected_hypotheses_pct(set(queried), model.n_classes)
            )
        else:
            assert payload["prediction"]["id"] == model_label
        chosen = model_label if index % 5 else (model_label + 1) % 3
        allocation = [5.0, 5.0, 5.0]
        allocation[chosen] = 90.0
        r = client.post(
            f"/sessions/{sid}/decisions",
            json={"task_index": index, "label": chosen, "allocation": allocation,
                  "client_duration": 3.5},
        )
        assert r.status_code == 200
        my_responses.append(
            StudyResponse(
                confidence=0.9,
                correct=int(chosen == true_label),
                participant_label=chosen,
            )
        )
        my_traces.append(ModelTrace(model_label=model_label, true_label=true_label))
    assert conditions_seen.count("C1") == 8 and conditions_seen.count("C3") == 8

    client.post(f"/sessions/{sid}/ratings", json={"metric": "in-control", "value": 3})
    export = client.get(f"/sessions/{sid}/export").json()
    assert len(export["decisions"]) == 16

    # re-aggregation oracle: script-side records, library metric functions
    assert export["summary"]["brier"] == brier(my_responses)
    assert export["summary"]["over_reliance"] == over_reliance(my_responses, my_traces)
    assert export["summary"]["selected_hypotheses_pct"] == float(
        np.mean(my_selected_per_task)
    )

    # C2 leak scan on a dedicated explanation-only session
    c2_config = ServiceConfig(
        model_path=str(model_path),
        task_pool_path=str(pool_path),
        policy="fixed",
        condition="C2",
        seed=80_002,
        log_dir=str(tmp_path / "sessions_c2"),
    )
    c2_client = TestClient(create_app(c2_config))
    c2_session = c2_client.post("/sessions", json={"seed": 1}).json()
    for index in range(4):
        text = json.dumps(c2_client.get(f"/sessions/{c2_session['id']}/tasks/{index}").json())
        for name in LABEL_NAMES:
            assert name not in text
    budget.check()


def test_concept_pathway_smoke(tmp_path):
    """12-concept, 7-class activation table fit without the independence
    assumption; the invariant suites hold unchanged, < 10 s."""
    budget = Budget(10.0)
    rng = np.random.default_rng(90_000)
    n_concepts, n_classes, per_class = 12, 7, 40
    base = rng.uniform(0.5, 2.0, size=(n_classes, n_concepts))
    rows = np.vstack(
        [
            base[c] + rng.normal(scale=0.4, size=(per_class, n_concepts))
            for c in range(n_classes)
        ]
    )
    labels = np.repeat(np.arange(n_classes), per_class)
    table = ConceptActivationTable(
        feature_names=tuple(f"concept_{i}" for i in range(n_concepts)),
        rows=rows,
        labels=labels,
        instance_ids=tuple(f"img{i:03d}" for i in range(len(labels))),
    )
    model = fit(table)  # defaults to the dependent (full-covariance) mode
    assert model.assumption.value == "dependent"
    assert model.n_features == 12 and model.n_classes == 7

    x = rows[3]
    # chain-rule identity on sampled proper subsets
    for trial in range(40):
        h = int(rng.integers(n_classes))
        stats = model.per_class[h]
        size = int(rng.integers(1, n_concepts))
        subset = sorted(rng.choice(n_concepts, size=size, replace=False).tolist())
        rest = [i for i in range(n_concepts) if i not in subset]
        joint = multivariate_normal.logpdf(x, stats.mean, stats.covariance)
        marginal = multivariate_normal.logpdf(
            x[rest], stats.mean[rest], stats.covariance[np.ix_(rest, rest)]
        )
        assert log_density_subset(model, h, subset, x) == pytest.approx(
            joint - marginal, abs=1e-8
        )

    # report totals re-sum; posterior normalizes; views have full cardinality
    for i in range(0, len(rows), 40):
        xi = rows[i]
        rep = report(model, xi, int(labels[i]))
        assert rep.total_woe == pytest.approx(sum(it.woe for it in rep.items), abs=1e-9)
        p = posterior(model, xi)
        assert abs(float(p.sum()) - 1.0) < 1e-9
        assert 0.0 <= uncertainty(p) <= math.log(n_classes) + 1e-12
    view = condition_view(model, x, "C3")
    assert len(view.reports) == n_classes
    assert "prediction" not in view_to_doc(view)

    # persistence round trip stays bitwise
    path = tmp_path / "concept_model.json"
    save_model(model, DEFAULT_SCALE, str(path))
    loaded, _ = load_model(str(path))
    for i in range(0, len(rows), 20):
        assert classify(loaded, rows[i]) == classify(model, rows[i])
        assert total_woe(loaded, rows[i], 2) == total_woe(model, rows[i], 2)
    budget.check()
