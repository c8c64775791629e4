import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasamp import (
    BaseCorrelations,
    IndicatorDataset,
    MetricConfig,
    MetricSpec,
    PredictionSet,
    UndefinedMetricError,
    accuracy_difference,
    biasamp_directional,
    biasamp_mals,
    counting_oracle,
    delta_pair,
    evaluate_metric,
    fpr_difference,
    mean_subgroup_accuracy,
    tpr_difference,
)
from biasamp.scenarios import (
    SCENARIOS,
    fig2_bundle,
    shortcoming1_three_group,
    shortcoming1_two_group,
    shortcoming2_imbalanced,
)

from conftest import grouped_dataset, perfect_preds

SKIP = MetricConfig()
NAN = MetricConfig(undefined_policy="propagate_nan")
ERR = MetricConfig(undefined_policy="error")


def at(base, truth, preds, cfg=SKIP, weights=None):
    return biasamp_directional("A_to_T", base, truth, preds, cfg, weights)


def ta(base, truth, preds, cfg=SKIP, weights=None):
    return biasamp_directional("T_to_A", base, truth, preds, cfg, weights)


# -- worked examples -----------------------------------------------------------


def test_shortcoming1_three_group_values():
    b = shortcoming1_three_group()
    assert biasamp_mals(b.base, b.test_preds).aggregate == 0
    res = at(b.base, b.test_truth, b.test_preds)
    assert res.aggregate == pytest.approx(0.1778, abs=1e-4)
    assert res.aggregate == pytest.approx(8 / 45, abs=1e-12)
    assert ta(b.base, b.test_truth, b.test_preds).aggregate == pytest.approx(0, abs=1e-9)


def test_shortcoming2_values():
    b = shortcoming2_imbalanced()
    assert biasamp_mals(b.base, b.test_preds).aggregate == pytest.approx(-0.6, abs=1e-9)
    assert at(b.base, b.test_truth, b.test_preds).aggregate == pytest.approx(1 / 3, abs=1e-12)
    assert ta(b.base, b.test_truth, b.test_preds).aggregate == pytest.approx(0, abs=1e-12)


def test_shortcoming2_y_selects_second_group():
    b = shortcoming2_imbalanced()
    res = at(b.base, b.test_truth, b.test_preds)
    assert res.y[:, 0].tolist() == [False, True]
    # the prediction-conditioned rule picks the larger group instead
    assert biasamp_mals(b.base, b.test_preds).y[:, 0].tolist() == [True, False]


def test_shortcoming2_manifestation_condition():
    b = shortcoming2_imbalanced()
    p_a1, cond = b.base.p_attr[0], b.base.p_attr_given_task[0, 0]
    assert min(0.5, p_a1) < cond < max(0.5, p_a1)


def test_delta_pair_two_group_variants():
    d = shortcoming1_two_group("deflate_A2")
    i = shortcoming1_two_group("inflate_A1")
    p = shortcoming1_two_group("perfect")
    assert delta_pair(d.base, d.test_preds, (0, 0)) == pytest.approx(40 / 40 - 40 / 50, abs=1e-12)
    assert delta_pair(i.base, i.test_preds, (0, 0)) == pytest.approx(50 / 60 - 40 / 50, abs=1e-12)
    assert delta_pair(p.base, p.test_preds, (0, 0)) == 0


def test_two_group_directional_symmetry():
    d = shortcoming1_two_group("deflate_A2")
    i = shortcoming1_two_group("inflate_A1")
    rd = at(d.base, d.test_truth, d.test_preds)
    ri = at(i.base, i.test_truth, i.test_preds)
    assert rd.aggregate == pytest.approx(ri.aggregate, abs=1e-9)
    # each variant has one pair off by 0.2, divided over |A||T| = 2 pairs
    assert rd.aggregate == pytest.approx(0.1, abs=1e-12)
    assert np.nansum(np.abs(rd.contribution)) == pytest.approx(0.2, abs=1e-12)


def test_delta_pair_undefined():
    ds = grouped_dataset({(0, 1): 2, (1, 0): 2})
    base = BaseCorrelations.from_dataset(ds)
    preds = PredictionSet(ds.attr_matrix, np.zeros((4, 1)))
    with pytest.raises(UndefinedMetricError):
        delta_pair(base, preds, (0, 0))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_bundles_meet_expectations_and_oracle(name):
    b = SCENARIOS[name]()
    results = {
        "mals": biasamp_mals(b.base, b.test_preds),
        "at": at(b.base, b.test_truth, b.test_preds),
        "ta": ta(b.base, b.test_truth, b.test_preds),
    }
    for key, exp in b.expected.items():
        assert exp.holds(results[key].aggregate), (key, results[key].aggregate, exp)
    for key, res in results.items():
        for base in (b.train, b.base):
            o = counting_oracle(b.test_truth, b.test_preds, base, key)
            assert abs(o.value - res.aggregate) <= 1e-12
            assert o.defined_mask == res.defined_mask.tolist()


# -- painting sweep classic metrics-------------------------------------------------


def test_painting_fpr_points():
    b = fig2_bundle(0.75)
    args = (b.test_truth, b.test_preds, "painting", "man", "woman")
    assert fpr_difference(*args) == 0
    assert mean_subgroup_accuracy(*args) == 1
    assert mean_subgroup_accuracy(*args, cells="attribute_label") == 1
    b = fig2_bundle(1.0)
    args = (b.test_truth, b.test_preds, "painting", "man", "woman")
    assert fpr_difference(*args) == 1
    assert fpr_difference(b.test_truth, b.test_preds, 0, "woman", "man") == -1


def test_painting_accuracy_symmetry_points():
    vals = []
    for x in (0.5, 1.0):
        b = fig2_bundle(x)
        vals.append(accuracy_difference(b.test_truth, b.test_preds, "painting", "man", "woman"))
    assert vals[0] == pytest.approx(vals[1], abs=1e-12)


def test_classic_perfect_classifier(painting_dataset):
    args = (painting_dataset, perfect_preds(painting_dataset), 0, 0, 1)
    assert fpr_difference(*args) == 0
    assert tpr_difference(*args) == 0
    assert accuracy_difference(*args) == 0
    assert mean_subgroup_accuracy(*args) == 1


def test_classic_errors_and_policies():
    ds = grouped_dataset({(0, 1): 3, (1, 1): 2, (1, 0): 2})
    preds = perfect_preds(ds)
    assert math.isnan(fpr_difference(ds, preds))
    with pytest.raises(UndefinedMetricError):
        fpr_difference(ds, preds, cfg=ERR)
    assert tpr_difference(ds, preds) == 0
    # empty (group, label) cell: skipped by default, undefined otherwise
    assert mean_subgroup_accuracy(ds, preds, cells="attribute_label") == 1
    assert math.isnan(mean_subgroup_accuracy(ds, preds, cells="attribute_label", cfg=NAN))
    with pytest.raises(ValueError):
        fpr_difference(ds, PredictionSet(task_pred=np.full((7, 1), 0.5)))
    with pytest.raises(ValueError):
        fpr_difference(ds, preds, group_a=0, group_b=0)
    overlap = IndicatorDataset([[1, 1], [0, 1]], [[1], [0]])
    with pytest.raises(ValueError):
        fpr_difference(overlap, perfect_preds(overlap))
    empty = IndicatorDataset([[1, 0], [1, 0]], [[1], [0]])
    with pytest.raises(ValueError):
        accuracy_difference(empty, perfect_preds(empty))
    with pytest.raises(KeyError):
        fpr_difference(ds, preds, group_a="nobody")


# -- undefined policies -------------------------------------------------------


def _sparse_case():
    # no test example is positive for the second task, truly or predicted
    train = IndicatorDataset([[1, 0], [0, 1], [1, 0], [0, 1]], [[1, 1], [1, 0], [0, 1], [0, 1]])
    truth = IndicatorDataset([[1, 0], [1, 0], [0, 1]], [[1, 0], [0, 0], [1, 0]])
    preds = PredictionSet([[1, 0], [1, 0], [0, 1]], [[1, 0], [0, 0], [0, 0]])
    return BaseCorrelations.from_dataset(train), truth, preds


def test_undefined_policies_directional():
    base, truth, preds = _sparse_case()
    skip = ta(base, truth, preds)
    assert not skip.defined_mask.all()
    assert skip.normalization == skip.defined_mask.sum()
    assert skip.aggregate == pytest.approx(np.nansum(skip.contribution) / skip.normalization)
    assert math.isnan(ta(base, truth, preds, NAN).aggregate)
    with pytest.raises(UndefinedMetricError):
        ta(base, truth, preds, ERR)


def test_undefined_policies_mals():
    base, truth, preds = _sparse_case()
    res = biasamp_mals(base, preds)
    assert res.defined_mask[:, 0].all() and not res.defined_mask[:, 1].any()
    assert res.normalization == 1
    assert math.isnan(biasamp_mals(base, preds, NAN).aggregate)
    with pytest.raises(UndefinedMetricError):
        biasamp_mals(base, preds, ERR)


def test_nothing_defined_gives_nan():
    ds = IndicatorDataset([[1], [1]], [[1], [0]])
    preds = PredictionSet([[1], [1]], [[0], [0]])
    res = biasamp_mals(BaseCorrelations.from_dataset(ds), preds)
    assert res.normalization == 0 and math.isnan(res.aggregate)


def test_tie_epsilon_changes_y():
    base = BaseCorrelations.from_probabilities([0.5, 0.5], [0.5], p_attr_given_task=[[0.5 + 1e-7], [0.5 - 1e-7]])
    truth = IndicatorDataset([[1, 0], [0, 1]], [[1], [1]])
    preds = PredictionSet(task_pred=[[1], [1]])
    assert at(base, truth, preds).y[:, 0].tolist() == [True, False]
    assert at(base, truth, preds, MetricConfig(tie_epsilon=1e-6)).y.sum() == 0
    with pytest.raises(ValueError):
        MetricConfig(tie_epsilon=-1)


def test_delta_baseline_base_mode():
    b = shortcoming1_three_group()
    res = at(b.base, b.test_truth, b.test_preds, MetricConfig(delta_baseline="base_correlations"))
    o = counting_oracle(b.test_truth, b.test_preds, b.train, "at", delta_baseline="base_correlations")
    assert abs(res.aggregate - o.value) <= 1e-12
    # the test set equals the train set here, so both baselines agree
    assert res.aggregate == pytest.approx(at(b.base, b.test_truth, b.test_preds).aggregate, abs=1e-12)


def test_missing_sides_raise():
    b = shortcoming1_three_group()
    with pytest.raises(ValueError):
        biasamp_mals(b.base, PredictionSet(task_pred=b.test_preds.task_pred))
    with pytest.raises(ValueError):
        at(b.base, b.test_truth, PredictionSet(attr_pred=b.test_preds.attr_pred))
    with pytest.raises(ValueError):
        ta(b.base, b.test_truth, PredictionSet(task_pred=b.test_preds.task_pred))


def test_result_invariants_and_dict():
    b = shortcoming2_imbalanced()
    res = at(b.base, b.test_truth, b.test_preds)
    expected = np.where(res.y, res.delta, -res.delta)
    np.testing.assert_array_equal(res.contribution, expected)
    assert np.all(np.abs(res.delta[res.defined_mask]) <= 1)
    d = res.to_dict()
    assert d["metric_kind"] == "at" and d["aggregate"] == pytest.approx(1 / 3)
    assert d["attribute_names"] == ["A1", "A2"]


def test_evaluate_metric_dispatch():
    b = fig2_bundle(1.0)
    spec = MetricSpec("fpr_difference", task="painting", group_a="man", group_b="woman")
    assert evaluate_metric(spec, b.test_truth, b.test_preds, b.base) == 1
    assert evaluate_metric("at", b.test_truth, b.test_preds, b.base) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        MetricSpec("auc")


# -- properties ----------------------------------------------------------------


@st.composite
def instances(draw, soft=False):
    n = draw(st.integers(2, 14))
    n_a = draw(st.integers(1, 3))
    n_t = draw(st.integers(1, 2))
    bits = st.integers(0, 1)
    def mat(k, vals=bits):
        return np.array(draw(st.lists(st.lists(vals, min_size=k, max_size=k), min_size=n, max_size=n)), float)
    truth = IndicatorDataset(mat(n_a), mat(n_t))
    train = IndicatorDataset(mat(n_a), mat(n_t))
    pvals = st.sampled_from([0.0, 0.25, 0.5, 1.0]) if soft else bits
    preds = PredictionSet(mat(n_a, pvals), mat(n_t, pvals))
    return train, truth, preds


@settings(max_examples=150, deadline=None)
@given(instances())
def test_zero_at_truth(inst):
    train, truth, _ = inst
    base = BaseCorrelations.from_dataset(train)
    preds = perfect_preds(truth)
    for res in (at(base, truth, preds), ta(base, truth, preds)):
        assert res.aggregate == 0 or math.isnan(res.aggregate)
    # predictions equal to the base data give zero for the prediction-conditioned metric
    m = biasamp_mals(base, perfect_preds(train))
    assert m.aggregate == 0 or math.isnan(m.aggregate)


@settings(max_examples=150, deadline=None)
@given(instances(), st.data())
def test_sign_semantics(inst, data):
    train, truth, preds = inst
    base = BaseCorrelations.from_dataset(train)
    n_a, n_t = base.p_joint.shape
    a = data.draw(st.integers(0, n_a - 1))
    t = data.draw(st.integers(0, n_t - 1))
    # turn on T_t for one example belonging to A_a alone that currently predicts 0
    only_a = (truth.attr_matrix[:, a] == 1) & (truth.attr_matrix.sum(axis=1) == 1)
    rows = np.nonzero(only_a & (preds.task_pred[:, t] == 0))[0]
    if rows.size == 0:
        return
    task = preds.task_pred.copy()
    task[rows[0], t] = 1
    before = at(base, truth, preds, NAN)
    after = at(base, truth, PredictionSet(preds.attr_pred, task), NAN)
    if not (before.defined_mask.all() and after.defined_mask.all()):
        return
    if before.y[a, t]:
        assert after.aggregate > before.aggregate
    else:
        assert after.aggregate < before.aggregate


@settings(max_examples=150, deadline=None)
@given(instances(soft=True), st.sampled_from(["mals", "at", "ta"]),
       st.sampled_from(["skip_and_renormalize", "propagate_nan"]))
def test_oracle_agreement_property(inst, metric, policy):
    train, truth, preds = inst
    base = BaseCorrelations.from_dataset(train)
    cfg = MetricConfig(undefined_policy=policy)
    res = evaluate_metric(metric, truth, preds, base, cfg)
    o = counting_oracle(truth, preds, train, metric, undefined_policy=policy)
    if math.isnan(o.value):
        assert math.isnan(res)
    else:
        assert abs(res - o.value) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(instances(), st.lists(st.integers(0, 3), min_size=14, max_size=14))
def test_integer_weights_equal_row_duplication(inst, counts):
    train, truth, preds = inst
    w = np.array(counts[: truth.n_examples], dtype=float)
    if w.sum() == 0:
        return
    base = BaseCorrelations.from_dataset(train)
    rows = np.repeat(np.arange(truth.n_examples), w.astype(int))
    for metric in ("at", "ta"):
        weighted = evaluate_metric(metric, truth, preds, base, NAN, w)
        duplicated = evaluate_metric(metric, truth.take(rows), preds.take(rows), base, NAN)
        assert (math.isnan(weighted) and math.isnan(duplicated)) or abs(weighted - duplicated) <= 1e-12
