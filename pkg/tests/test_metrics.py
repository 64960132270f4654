import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from woe_engine.dataset import LabeledTable
from woe_engine.errors import InvalidDataError
from woe_engine.evidence import uncertainty
from woe_engine.metrics import (
    CORRECT_LOW,
    INSTANCE_CATEGORIES,
    WRONG_LOW,
    ModelTrace,
    StudyResponse,
    brier,
    confidence_from_allocation,
    over_reliance,
    precision_recall_f1,
    prf_from_counts,
    select_instances,
    selected_hypotheses_pct,
    under_reliance,
)
from woe_engine.model import classify, posterior



def resp(confidence, correct, label=0, duration=0.0):
    return StudyResponse(
        confidence=confidence, correct=correct, participant_label=label, duration=duration
    )


class TestBrier:
    def test_confident_correct_is_zero(self):
        assert brier([resp(1.0, 1)] * 4) == 0.0

    def test_unconfident_wrong_is_zero(self):
        assert brier([resp(0.0, 0)] * 3) == 0.0

    def test_two_response_hand_value(self):
        # (0.7-1)^2 = 0.09, (0.2-0)^2 = 0.04, mean = 0.065
        assert brier([resp(0.7, 1), resp(0.2, 0)]) == pytest.approx(0.065, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidDataError):
            brier([])

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=1, allow_nan=False),
                st.integers(min_value=0, max_value=1),
            ),
            min_size=1,
            max_size=30,
        )
    )
    def test_bounded_and_order_invariant(self, pairs):
        rs = [resp(c, a) for c, a in pairs]
        value = brier(rs)
        assert 0.0 <= value <= 1.0
        assert brier(list(reversed(rs))) == pytest.approx(value, abs=1e-12)

    def test_bounds_enforced(self):
        with pytest.raises(InvalidDataError):
            resp(1.5, 1)
        with pytest.raises(InvalidDataError):
            resp(0.5, 2)


class TestReliance:
    def trace(self, model_label, true_label):
        return ModelTrace(model_label=model_label, true_label=true_label)

    def test_over_reliance_all_matched(self):
        traces = [self.trace(1, 0), self.trace(2, 0)]  # model wrong twice
        responses = [resp(0.5, 0, label=1), resp(0.5, 0, label=2)]
        assert over_reliance(responses, traces) == 1.0

    def test_over_reliance_never_matched(self):
        traces = [self.trace(1, 0), self.trace(2, 0)]
        responses = [resp(0.5, 1, label=0), resp(0.5, 1, label=0)]
        assert over_reliance(responses, traces) == 0.0

    def test_over_reliance_undefined_when_model_always_right(self):
        traces = [self.trace(0, 0), self.trace(1, 1)]
        responses = [resp(0.5, 1, label=0), resp(0.5, 1, label=1)]
        assert over_reliance(responses, traces) is None

    def test_under_reliance_zero_when_following(self):
        traces = [self.trace(0, 0), self.trace(1, 1)]
        responses = [resp(0.5, 1, label=0), resp(0.5, 1, label=1)]
        assert under_reliance(responses, traces) == 0.0

    def test_under_reliance_half(self):
        traces = [self.trace(0, 0), self.trace(1, 1), self.trace(2, 0)]
        responses = [resp(0.5, 1, label=0), resp(0.5, 0, label=0), resp(0.5, 1, label=0)]
        assert under_reliance(responses, traces) == 0.5

    def test_under_reliance_undefined_when_model_always_wrong(self):
        traces = [self.trace(1, 0)]
        responses = [resp(0.5, 0, label=1)]
        assert under_reliance(responses, traces) is None

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(InvalidDataError):
            over_reliance([resp(0.5, 1)], [])

    def test_padding_with_other_denominator_class_is_invisible(self):
        # over-reliance only depends on model-wrong tasks
        traces = [self.trace(1, 0)]
        responses = [resp(0.5, 0, label=1)]
        base = over_reliance(responses, traces)
        padded_traces = traces + [self.trace(0, 0)] * 5
        padded_responses = responses + [resp(0.9, 1, label=0)] * 5
        assert over_reliance(padded_responses, padded_traces) == base


class TestPrecisionRecallF1:
    def test_hand_triple(self):
        assert prf_from_counts(8, 2, 2) == (0.8, 0.8, pytest.approx(0.8, abs=1e-12))

    def test_perfect(self):
        p, r, f1 = precision_recall_f1([1, 0, 1], [1, 0, 1])
        assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_harmonic_mean_hand_case(self):
        p, r, f1 = prf_from_counts(1, 0, 1)
        assert p == 1.0 and r == 0.5
        assert f1 == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_undefined_components(self):
        p, r, f1 = prf_from_counts(0, 0, 3)
        assert p is None and r == 0.0 and f1 is None
        p, r, f1 = prf_from_counts(0, 3, 0)
        assert p == 0.0 and r is None and f1 is None

    def test_zero_when_tp_zero_but_defined(self):
        p, r, f1 = prf_from_counts(0, 2, 3)
        assert p == 0.0 and r == 0.0 and f1 == 0.0

    @given(
        st.integers(min_value=1, max_value=500),
        st.integers(min_value=0, max_value=500),
        st.integers(min_value=0, max_value=500),
    )
    def test_harmonic_identity(self, tp, fp, fn):
        p, r, f1 = prf_from_counts(tp, fp, fn)
        assert f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)


def equilateral_model(radius=6.0):
    """Three unit-variance classes with means on an equilateral triangle:
    the origin has an exactly uniform posterior, each mean a near-certain one."""
    from woe_engine.model import ClassStats, GaussianEvidenceModel, Label

    angles = np.deg2rad([90.0, 210.0, 330.0])
    stats = tuple(
        ClassStats(
            mean=radius * np.array([np.cos(a), np.sin(a)]),
            covariance=np.eye(2),
            prior=1.0 / 3.0,
        )
        for a in angles
    )
    return GaussianEvidenceModel(
        labels=tuple(Label(i, f"h{i}") for i in range(3)),
        feature_names=("f0", "f1"),
        per_class=stats,
    )


class TestSelectInstances:
    def build_pool(self):
        m = equilateral_model()
        rows = []
        labels = []
        for c in range(3):
            mean = m.per_class[c].mean
            rows.append(mean)  # near-certain, correct -> correct-low
            labels.append(c)
            rows.append(mean)  # near-certain but labelled wrong -> wrong-low
            labels.append((c + 1) % 3)
        center = np.zeros(2)  # uniform posterior -> entropy ln 3
        rows.append(center)
        labels.append(int(classify(m, center).id))  # correct-high
        rows.append(center)
        labels.append((int(classify(m, center).id) + 1) % 3)  # wrong-high
        pool = LabeledTable(
            feature_names=m.feature_names,
            rows=np.asarray(rows),
            labels=np.asarray(labels),
        )
        return m, pool, center

    def test_constructed_pool_fills_all_categories(self):
        m, pool, center = self.build_pool()
        ent = uncertainty(posterior(m, center))
        assert ent == pytest.approx(math.log(3.0), abs=1e-9)
        sel = select_instances(m, pool)
        for cat in INSTANCE_CATEGORIES:
            assert len(sel.by_category[cat]) >= 1, cat
        assert sel.shortfalls == ()

    def test_entropy_bounds_hold_for_every_selection(self):
        m, pool, _ = self.build_pool()
        sel = select_instances(m, pool)
        for cat, insts in sel.by_category.items():
            for inst in insts:
                if cat in (CORRECT_LOW, WRONG_LOW):
                    assert inst.entropy < 0.3
                else:
                    assert inst.entropy > 0.7

    def test_no_instance_in_two_categories(self):
        m, pool, _ = self.build_pool()
        sel = select_instances(m, pool)
        seen = [i.index for insts in sel.by_category.values() for i in insts]
        assert len(seen) == len(set(seen))

    def test_mid_entropy_excluded(self):
        m = equilateral_model()
        # walk from the uniform-posterior origin towards a mean: entropy
        # decays continuously from ln 3 to ~0, so a mid value exists
        target = m.per_class[0].mean
        for t in np.linspace(0.0, 1.0, 2000):
            x = t * target
            ent = uncertainty(posterior(m, x))
            if 0.35 < ent < 0.65:
                break
        else:
            pytest.fail("no mid-entropy point found")
        pool = LabeledTable(
            feature_names=m.feature_names, rows=np.array([x]), labels=np.array([0])
        )
        sel = select_instances(m, pool)
        assert all(len(v) == 0 for v in sel.by_category.values())
        assert set(sel.shortfalls) == set(INSTANCE_CATEGORIES)

    def test_per_category_cap_and_order(self):
        m, pool, _ = self.build_pool()
        sel = select_instances(m, pool, per_category=1)
        for cat in (CORRECT_LOW, WRONG_LOW):
            insts = sel.by_category[cat]
            assert len(insts) == 1
        # deterministic: first eligible in pool order
        again = select_instances(m, pool, per_category=1)
        assert again.by_category == sel.by_category

    def test_threshold_validation(self):
        m, pool, _ = self.build_pool()
        with pytest.raises(InvalidDataError):
            select_instances(m, pool, low_t=0.7, high_t=0.3)


class TestSelectedHypothesesPct:
    def test_all_of_seven(self):
        assert selected_hypotheses_pct(set(range(7)), 7) == 1.0

    def test_none_selected(self):
        assert selected_hypotheses_pct(set(), 7) == 0.0

    def test_three_of_seven(self):
        assert selected_hypotheses_pct({0, 3, 5}, 7) == pytest.approx(3 / 7)

    def test_duplicates_collapse(self):
        assert selected_hypotheses_pct([1, 1, 2], 7) == pytest.approx(2 / 7)

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidDataError):
            selected_hypotheses_pct({9}, 7)


class TestAllocation:
    def test_mass_on_chosen_class(self):
        assert confidence_from_allocation([20, 30, 50], 2) == 0.5

    def test_sum_must_be_hundred(self):
        with pytest.raises(InvalidDataError, match="90"):
            confidence_from_allocation([20, 30, 40], 0)

    def test_negative_entries_rejected(self):
        with pytest.raises(InvalidDataError):
            confidence_from_allocation([110, -10, 0], 0)
