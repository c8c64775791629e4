import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasamp import (
    BaseCorrelations,
    DegradedEstimateError,
    IndicatorDataset,
    IntervalEstimate,
    MetricSpec,
    PredictionSet,
    bootstrap_ci,
    intervals_overlap,
    multirun_ci,
    replicate_weights,
)
from biasamp.scenarios import bernoulli_fixture, fig2_bundle, shortcoming1_three_group

from conftest import perfect_preds


def test_constant_metric_zero_interval():
    b = shortcoming1_three_group()
    est = bootstrap_ci(b.test_truth, perfect_preds(b.test_truth), b.base, "at", n_boot=200, seed=1)
    assert (est.point, est.lower, est.upper) == (0.0, 0.0, 0.0)
    assert est.method.value == "bootstrap_percentile" and est.seed == 1


def test_seed_reproducible_bit_exact():
    b = shortcoming1_three_group()
    first = bootstrap_ci(b.test_truth, b.test_preds, b.base, "at", n_boot=300, seed=42)
    second = bootstrap_ci(b.test_truth, b.test_preds, b.base, "at", n_boot=300, seed=42)
    assert first == second
    other = bootstrap_ci(b.test_truth, b.test_preds, b.base, "at", n_boot=300, seed=43)
    assert (other.lower, other.upper) != (first.lower, first.upper)


def test_replicates_independent_of_count():
    # replicate b depends only on (seed, b), not on how many are drawn
    assert np.array_equal(replicate_weights(50, 10, 5)[:4], replicate_weights(50, 4, 5))
    w = replicate_weights(30, 7, 0)
    assert np.all(w.sum(axis=1) == 30)


def test_bernoulli_width_matches_analytic():
    f = bernoulli_fixture(2000, 0.3, seed=0)
    est = bootstrap_ci(f.truth, f.preds, f.base, "at", n_boot=1000, confidence=0.95, seed=0)
    assert est.point == pytest.approx(f.preds.task_pred.mean(), abs=1e-15)
    width = est.upper - est.lower
    assert abs(width / f.analytic_width() - 1) <= 0.15


def test_bernoulli_width_shrinks_as_root_n():
    widths = []
    for n in (500, 2000, 8000):
        f = bernoulli_fixture(n, 0.3, seed=n)
        est = bootstrap_ci(f.truth, f.preds, f.base, "at", n_boot=500, seed=3)
        widths.append((est.upper - est.lower) * math.sqrt(n))
    # width * sqrt(N) stays roughly constant
    assert max(widths) / min(widths) < 1.3


def test_classic_metric_and_callable_specs():
    b = fig2_bundle(1.0)
    spec = MetricSpec("fpr_difference", task="painting", group_a="man", group_b="woman")
    est = bootstrap_ci(b.test_truth, b.test_preds, b.base, spec, n_boot=100, seed=0)
    assert est.point == 1.0 and est.lower == est.upper == 1.0

    def mean_pred(truth, preds, base, weights):
        return float(np.average(preds.task_pred[:, 0], weights=weights))

    est = bootstrap_ci(b.test_truth, b.test_preds, None, mean_pred, n_boot=100, seed=0)
    assert est.point == pytest.approx(b.test_preds.task_pred.mean())


def test_degraded_estimate_raises():
    # one positive in 40: most replicates miss it and P(Ahat|That) is undefined
    n = 40
    attr = np.ones((n, 1))
    task = np.zeros((n, 1))
    task[0] = 1
    truth = IndicatorDataset(attr, task)
    preds = PredictionSet(attr, task)
    base = BaseCorrelations.from_dataset(truth)
    with pytest.raises(DegradedEstimateError):
        bootstrap_ci(truth, preds, base, "mals", n_boot=200, seed=0)


def test_dropped_replicates_counted():
    n = 200
    attr = np.ones((n, 1))
    task = np.zeros((n, 1))
    task[:3] = 1
    truth = IndicatorDataset(attr, task)
    preds = PredictionSet(attr, task)
    est = bootstrap_ci(truth, preds, BaseCorrelations.from_dataset(truth), "mals", n_boot=400, seed=0)
    assert 0 < est.n_dropped <= 40
    assert "dropped" in est.note


def test_bootstrap_argument_errors():
    b = shortcoming1_three_group()
    with pytest.raises(ValueError):
        bootstrap_ci(b.test_truth, b.test_preds, b.base, "at", n_boot=1)
    with pytest.raises(ValueError):
        bootstrap_ci(b.test_truth, b.test_preds, b.base, "at", confidence=1.0)


def test_multirun_examples():
    est = multirun_ci([0.1, 0.1, 0.1])
    assert (est.lower, est.point, est.upper) == (0.1, 0.1, 0.1)
    est = multirun_ci([0, 1], 0.95)
    assert est.point == 0.5
    assert est.half_width == pytest.approx(1.959963984540054 * (math.sqrt(0.5) / math.sqrt(2)), abs=1e-12)
    assert est.half_width == pytest.approx(0.98, abs=1e-3)
    assert est.method.value == "multirun_normal"
    assert "only 2 runs" in est.note
    assert multirun_ci(np.arange(12.0)).note is None
    with pytest.raises(ValueError):
        multirun_ci([1.0])


def test_overlap():
    a = IntervalEstimate(0.0, -0.1, 0.1, 0.95, "multirun_normal", 5)
    b = IntervalEstimate(0.2, 0.1, 0.3, 0.95, "multirun_normal", 5)
    c = IntervalEstimate(0.5, 0.4, 0.6, 0.95, "multirun_normal", 5)
    assert intervals_overlap(a, b) and a.overlaps(b)
    assert not intervals_overlap(a, c)
    with pytest.raises(ValueError):
        IntervalEstimate(0.0, 0.2, 0.1, 0.95, "multirun_normal", 5)
    with pytest.raises(ValueError):
        IntervalEstimate(0.0, 0.0, 0.1, 1.5, "multirun_normal", 5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=12), st.randoms(use_true_random=False))
def test_multirun_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert multirun_ci(values) == multirun_ci(shuffled)
