"""Deterministic toy datasets with known bias amplification values.

Each generator builds a small dataset of disjoint protected groups, a model
behaviour described group by group, and the metric values that behaviour is
known to produce. They double as regression fixtures and as documentation of
how the metrics differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Dict, Sequence

import numpy as np

from .core import BaseCorrelations, IndicatorDataset, PredictionSet
from .metrics import (
    DEFAULT_CONFIG,
    MetricConfig,
    MetricSpec,
    accuracy_difference,
    biasamp_directional,
    biasamp_mals,
    fpr_difference,
    mean_subgroup_accuracy,
    tpr_difference,
    evaluate_metric,
)
from .oracle import counting_oracle

__all__ = [
    "Expectation",
    "ScenarioBundle",
    "shortcoming1_three_group",
    "shortcoming1_two_group",
    "shortcoming2_imbalanced",
    "masking_fixture",
    "fig2_bundle",
    "fig2_sweep",
    "counting_oracle",
    "SCENARIOS",
    "evaluate_bundle",
    "random_instance",
    "differential_check",
    "bernoulli_fixture",
]


@dataclass(frozen=True)
class Expectation:
    value: float
    tolerance: float = 1e-4
    provenance: str = ""

    def holds(self, observed: float) -> bool:
        return bool(np.isfinite(observed)) and abs(observed - self.value) <= self.tolerance


@dataclass(frozen=True)
class ScenarioBundle:
    name: str
    train: IndicatorDataset
    test_truth: IndicatorDataset
    test_preds: PredictionSet
    description: str
    expected: Dict[str, Expectation] = field(default_factory=dict)

    @property
    def base(self) -> BaseCorrelations:
        return BaseCorrelations.from_dataset(self.train, description=f"training split of {self.name}")


# policies for how the model predicts the task inside one group
CORRECT, ALL_NEGATIVE, ALL_POSITIVE = "correct", "all0", "all1"


def _grouped(counts: Sequence[tuple], policies: Sequence[str], names: Sequence[str], task_name="T"):
    """Build one-hot groups with ``(n_negative, n_positive)`` examples each.

    Attribute predictions are perfect; task predictions follow ``policies``.
    """
    n_groups = len(counts)
    attr_rows, task_rows, pred_rows = [], [], []
    for g, ((n_neg, n_pos), policy) in enumerate(zip(counts, policies)):
        onehot = [1.0 if j == g else 0.0 for j in range(n_groups)]
        for label, n in ((0.0, n_neg), (1.0, n_pos)):
            for _ in range(n):
                attr_rows.append(onehot)
                task_rows.append([label])
                if policy == CORRECT:
                    pred_rows.append([label])
                elif policy == ALL_NEGATIVE:
                    pred_rows.append([0.0])
                elif policy == ALL_POSITIVE:
                    pred_rows.append([1.0])
                else:
                    raise ValueError(f"unknown policy {policy!r}")
    attr = np.array(attr_rows)
    truth = IndicatorDataset(attr, np.array(task_rows), tuple(names), (task_name,))
    preds = PredictionSet(attr_pred=attr.copy(), task_pred=np.array(pred_rows))
    return truth, preds


def shortcoming1_three_group() -> ScenarioBundle:
    """Three groups; only the largest positive correlation is left intact.

    The model is exact on A1, never predicts the task on A2 and always
    predicts it on A3. The prediction-conditioned metric reports no
    amplification because A1 is the only pair it looks at.
    """
    truth, preds = _grouped([(10, 40), (40, 10), (10, 20)], [CORRECT, ALL_NEGATIVE, ALL_POSITIVE],
                            ["A1", "A2", "A3"])
    return ScenarioBundle(
        "shortcoming1-three-group", truth, truth, preds,
        "A1: 10 neg/40 pos, A2: 40/10, A3: 10/20; model exact on A1, predicts 0 on A2, 1 on A3",
        {
            "mals": Expectation(0.0, 1e-9, "published worked example"),
            "at": Expectation(0.1778, 1e-4, "published worked example (exactly 8/45)"),
            "ta": Expectation(0.0, 1e-9, "published worked example"),
        },
    )


def shortcoming1_two_group(variant: str = "deflate_A2") -> ScenarioBundle:
    """Two groups with a miscalibrated model, three variants.

    ``deflate_A2`` never predicts the task on A2; ``inflate_A1`` always
    predicts it on A1; ``perfect`` is exact. The first two move the same
    number of examples (10) against the training correlation.
    """
    policies = {
        "deflate_A2": [CORRECT, ALL_NEGATIVE],
        "inflate_A1": [ALL_POSITIVE, CORRECT],
        "perfect": [CORRECT, CORRECT],
    }
    if variant not in policies:
        raise ValueError(f"variant must be one of {sorted(policies)}")
    truth, preds = _grouped([(10, 40), (40, 10)], policies[variant], ["A1", "A2"])
    if variant == "deflate_A2":
        mals = Expectation(0.2, 1e-9, "published: 40/40 - 40/50")
    elif variant == "inflate_A1":
        mals = Expectation(50 / 60 - 40 / 50, 1e-9, "published: 50/60 - 40/50 = 0.033")
    else:
        mals = Expectation(0.0, 1e-12, "exact model")
    at = 0.0 if variant == "perfect" else 0.1
    return ScenarioBundle(
        f"shortcoming1-two-group-{variant.replace('_', '-').lower()}", truth, truth, preds,
        f"A1: 10 neg/40 pos, A2: 40/10; variant {variant}",
        {
            "mals": mals,
            "at": Expectation(at, 1e-9, "hand arithmetic: one pair with |delta| 0.2, divided by |A||T| = 2"),
            "ta": Expectation(0.0, 1e-12, "attribute predictions are exact"),
        },
    )


def shortcoming2_imbalanced() -> ScenarioBundle:
    """Imbalanced groups: the larger group looks task-correlated but is not.

    ``P(A1 | T) = 0.6 > 1/2`` although A2 is the group over-represented among
    positives. The model predicts 0 on A1 and 1 on A2.
    """
    truth, preds = _grouped([(60, 30), (10, 20)], [ALL_NEGATIVE, ALL_POSITIVE], ["A1", "A2"])
    return ScenarioBundle(
        "shortcoming2-imbalanced", truth, truth, preds,
        "A1: 60 neg/30 pos, A2: 10/20; model predicts 0 on A1 and 1 on A2",
        {
            "mals": Expectation(-0.6, 1e-9, "published: 0/30 - 30/50"),
            "at": Expectation(0.3333, 1e-4, "published worked example (exactly 1/3)"),
            "ta": Expectation(0.0, 1e-9, "published worked example"),
        },
    )


MASKING_LEVELS = ("original", "noisy_mask", "full_mask")
# (task errors per group, attribute flips among positives) by level
_MASKING_ERRORS = {"original": (12, 2), "noisy_mask": (6, 6), "full_mask": (2, 10)}


def masking_fixture(level: str = "original") -> ScenarioBundle:
    """Synthetic stand-in for hiding people in images.

    200 examples, two disjoint groups (``woman``, ``man``) and one task
    correlated with ``woman``. Going from ``original`` to ``full_mask``, the
    task predictor relies less on the visible attribute (fewer women
    over-predicted, fewer men under-predicted) while the attribute predictor
    leans more on the task (more men among task positives labelled women).
    """
    if level not in _MASKING_ERRORS:
        raise ValueError(f"level must be one of {MASKING_LEVELS}")
    task_err, attr_flips = _MASKING_ERRORS[level]
    # women: 40 neg / 60 pos, men: 70 neg / 30 pos
    attr, task, attr_hat, task_hat = [], [], [], []
    for group, n_neg, n_pos in ((0, 40, 60), (1, 70, 30)):
        onehot = [1.0, 0.0] if group == 0 else [0.0, 1.0]
        for label, n in ((0.0, n_neg), (1.0, n_pos)):
            for i in range(n):
                attr.append(onehot)
                task.append([label])
                pred = label
                if group == 0 and label == 0.0 and i < task_err:
                    pred = 1.0
                if group == 1 and label == 1.0 and i < task_err:
                    pred = 0.0
                task_hat.append([pred])
                if group == 1 and label == 1.0 and i >= n - attr_flips:
                    attr_hat.append([1.0, 0.0])
                else:
                    attr_hat.append(onehot)
    truth = IndicatorDataset(np.array(attr), np.array(task), ("woman", "man"), ("task",))
    preds = PredictionSet(attr_pred=np.array(attr_hat), task_pred=np.array(task_hat))
    return ScenarioBundle(
        f"masking-{level.replace('_', '-')}", truth, truth, preds,
        f"masking fixture, level {level}: {task_err} task errors per group, "
        f"{attr_flips} attribute flips among positives",
        {
            "at": Expectation(task_err / 100, 1e-12, "hand arithmetic: |delta| = errors/100 on both pairs"),
            "ta": Expectation(attr_flips / 90, 1e-12, "hand arithmetic: |delta| = flips/90 on both pairs"),
        },
    )


# ---------------------------------------------------------------------------
# painting example: 30 women painting, 10 not; 10 men painting, 30 not

PAINTING_GROUND_TRUTH = 0.75
PAINTING_METRICS = (
    "fpr_difference",
    "tpr_difference",
    "accuracy_difference",
    "mean_subgroup_accuracy",
    "mean_cell_accuracy",
    "mals",
    "at",
)


def _women_painting_count(x: float) -> int:
    k = round(40 * x)
    if not 0 <= k <= 40 or abs(40 * x - k) > 1e-9:
        raise ValueError(f"x={x} is not a multiple of 1/40 in [0, 1]")
    return k


def fig2_bundle(x: float) -> ScenarioBundle:
    """Painting dataset with women predicted painting at rate ``x``.

    The model is exact on men. On women it covers true painters first and
    only then starts producing false positives, so below 0.75 it only
    under-predicts and above 0.75 it only over-predicts.
    """
    k = _women_painting_count(x)
    attr, task, task_hat = [], [], []
    for i in range(40):  # women: 30 painting then 10 not, predicted in this order
        attr.append([1.0, 0.0])
        task.append([1.0 if i < 30 else 0.0])
        task_hat.append([1.0 if i < k else 0.0])
    for i in range(40):  # men: 10 painting then 30 not
        label = 1.0 if i < 10 else 0.0
        attr.append([0.0, 1.0])
        task.append([label])
        task_hat.append([label])
    truth = IndicatorDataset(np.array(attr), np.array(task), ("woman", "man"), ("painting",))
    preds = PredictionSet(attr_pred=np.array(attr), task_pred=np.array(task_hat))
    return ScenarioBundle(f"painting-x{x:g}", truth, truth, preds,
                          f"painting example, women predicted painting at rate {x:g}")


@dataclass
class PaintingSweepTable:
    x: np.ndarray
    values: Dict[str, np.ndarray]

    def to_dict(self) -> dict:
        return {"x": [float(v) for v in self.x],
                "values": {k: [float(v) for v in vals] for k, vals in self.values.items()}}


def fig2_sweep(x_grid=None, cfg: MetricConfig = DEFAULT_CONFIG) -> PaintingSweepTable:
    """All metrics of the painting example as the women-painting rate varies.

    Group differences are women minus men. ``mean_subgroup_accuracy`` is the
    mean of the two per-group accuracies; ``mean_cell_accuracy`` averages the
    four (group, label) cells instead.
    """
    if x_grid is None:
        x_grid = np.arange(41) / 40
    x_grid = np.asarray(x_grid, dtype=float)
    values = {name: np.empty(x_grid.size) for name in PAINTING_METRICS}
    for i, x in enumerate(x_grid):
        b = fig2_bundle(x)
        truth, preds, base = b.test_truth, b.test_preds, b.base
        args = (truth, preds, "painting", "man", "woman", cfg)
        values["fpr_difference"][i] = fpr_difference(*args)
        values["tpr_difference"][i] = tpr_difference(*args)
        values["accuracy_difference"][i] = accuracy_difference(*args)
        values["mean_subgroup_accuracy"][i] = mean_subgroup_accuracy(*args)
        values["mean_cell_accuracy"][i] = mean_subgroup_accuracy(*args, cells="attribute_label")
        values["mals"][i] = biasamp_mals(base, preds, cfg).aggregate
        values["at"][i] = biasamp_directional("A_to_T", base, truth, preds, cfg).aggregate
    return PaintingSweepTable(x_grid, values)


# ---------------------------------------------------------------------------

SCENARIOS: Dict[str, Callable[[], ScenarioBundle]] = {
    "shortcoming1-three-group": shortcoming1_three_group,
    "shortcoming1-two-group-deflate-a2": lambda: shortcoming1_two_group("deflate_A2"),
    "shortcoming1-two-group-inflate-a1": lambda: shortcoming1_two_group("inflate_A1"),
    "shortcoming1-two-group-perfect": lambda: shortcoming1_two_group("perfect"),
    "shortcoming2-imbalanced": shortcoming2_imbalanced,
    "masking-original": lambda: masking_fixture("original"),
    "masking-noisy-mask": lambda: masking_fixture("noisy_mask"),
    "masking-full-mask": lambda: masking_fixture("full_mask"),
}


def evaluate_bundle(bundle: ScenarioBundle, cfg: MetricConfig = DEFAULT_CONFIG) -> dict:
    """Check every expectation of ``bundle`` with the metrics and the oracle."""
    base = bundle.base
    out = {}
    for name, exp in bundle.expected.items():
        value = evaluate_metric(MetricSpec(name), bundle.test_truth, bundle.test_preds, base, cfg)
        oracle = counting_oracle(bundle.test_truth, bundle.test_preds, bundle.train, name,
                                 cfg.undefined_policy, cfg.tie_epsilon, cfg.delta_baseline).value
        out[name] = {
            "value": value,
            "expected": exp.value,
            "tolerance": exp.tolerance,
            "provenance": exp.provenance,
            "oracle": oracle,
            "ok": exp.holds(value) and abs(oracle - value) <= 1e-12,
        }
    return out


# ---------------------------------------------------------------------------
# randomized differential check against the counting oracle


def random_instance(rng: np.random.Generator, max_n: int = 12, max_attrs: int = 3, max_tasks: int = 2,
                    soft: bool = False):
    """Random small train set, test set and predictions (possibly degenerate)."""
    n_a = int(rng.integers(1, max_attrs + 1))
    n_t = int(rng.integers(1, max_tasks + 1))

    def binary(n, k):
        return rng.integers(0, 2, size=(n, k)).astype(float)

    n_train = int(rng.integers(1, max_n + 1))
    n_test = int(rng.integers(1, max_n + 1))
    train = IndicatorDataset(binary(n_train, n_a), binary(n_train, n_t))
    test = IndicatorDataset(binary(n_test, n_a), binary(n_test, n_t))
    if soft:
        preds = PredictionSet(rng.random((n_test, n_a)), rng.random((n_test, n_t)))
    else:
        preds = PredictionSet(binary(n_test, n_a), binary(n_test, n_t))
    return train, test, preds


def differential_check(n_instances: int = 1000, seed: int = 0, tol: float = 1e-12,
                       cfg: MetricConfig = DEFAULT_CONFIG) -> dict:
    """Compare metric outputs with the counting oracle on random instances.

    Every instance is checked for ``mals``, ``at`` and ``ta``; values must
    agree within ``tol`` (or both be NaN) and defined masks must be identical.
    """
    rng = np.random.default_rng(seed)
    failures = []
    checks = 0
    for i in range(n_instances):
        train, test, preds = random_instance(rng, soft=bool(i % 4 == 3))
        base = BaseCorrelations.from_dataset(train)
        for name in ("mals", "at", "ta"):
            if name == "mals":
                res = biasamp_mals(base, preds, cfg)
            else:
                res = biasamp_directional("A_to_T" if name == "at" else "T_to_A", base, test, preds, cfg)
            ora = counting_oracle(test, preds, train, name, cfg.undefined_policy, cfg.tie_epsilon,
                                  cfg.delta_baseline)
            checks += 1
            same_mask = res.defined_mask.tolist() == ora.defined_mask
            a, b = res.aggregate, ora.value
            same_value = (np.isnan(a) and np.isnan(b)) or abs(a - b) <= tol
            if not (same_mask and same_value):
                failures.append({"instance": i, "metric": name, "metrics_value": a, "oracle_value": b,
                                 "mask_match": same_mask})
    return {"instances": n_instances, "checks": checks, "seed": seed, "tolerance": tol,
            "failures": failures, "passed": not failures}


# ---------------------------------------------------------------------------
# interval calibration fixture


@dataclass(frozen=True)
class BernoulliFixture:
    truth: IndicatorDataset
    preds: PredictionSet
    base: BaseCorrelations
    p: float

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.p * (1 - self.p)))

    def analytic_width(self, confidence: float = 0.95) -> float:
        """Width of the normal-approximation interval for the sample mean."""
        z = NormalDist().inv_cdf(0.5 + confidence / 2)
        return 2 * z * self.sigma / np.sqrt(self.truth.n_examples)


def bernoulli_fixture(n: int = 2000, p: float = 0.3, seed: int = 0) -> BernoulliFixture:
    """A case where ``at`` is exactly the mean of Bernoulli task predictions.

    Every example carries the single attribute and a negative task label;
    predictions are Bernoulli(``p``) draws. The supplied base correlation puts
    the pair above independence, so the metric equals the predicted positive
    rate and its sampling spread is ``sqrt(p (1 - p) / n)``.
    """
    rng = np.random.default_rng(seed)
    truth = IndicatorDataset(np.ones((n, 1)), np.zeros((n, 1)), ["A"], ["T"])
    preds = PredictionSet(task_pred=(rng.random((n, 1)) < p).astype(float))
    base = BaseCorrelations.from_probabilities([0.5], [0.5], p_joint=[[0.4]],
                                               description="fixed base with the pair above independence")
    return BernoulliFixture(truth, preds, base, p)
