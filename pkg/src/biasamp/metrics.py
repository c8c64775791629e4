"""Bias amplification metrics and classic group-fairness baselines.

Two bias amplification measures are provided:

* ``biasamp_mals`` compares the attribute rate among *predicted* task
  positives with the base rate ``P(A_a=1 | T_t=1)``, counting only pairs
  whose base conditional exceeds ``1/|A|``. It needs no test labels.
* ``biasamp_directional`` counts every pair, picks the sign from whether the
  pair co-occurs above independence in the base correlations, and separates
  attribute-to-task (``at``) from task-to-attribute (``ta``) amplification by
  conditioning on ground truth on one side.

Every result keeps the full per-pair breakdown; aggregates can hide pairs
that amplify strongly in opposite directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .core import (
    BaseCorrelations,
    IndicatorDataset,
    PredictionSet,
    compute_stats,
    independence_gap,
)


class UndefinedPolicy(str, Enum):
    SKIP_AND_RENORMALIZE = "skip_and_renormalize"
    PROPAGATE_NAN = "propagate_nan"
    ERROR = "error"


class DeltaBaseline(str, Enum):
    TEST_GROUND_TRUTH = "test_ground_truth"
    BASE_CORRELATIONS = "base_correlations"


class MetricKind(str, Enum):
    MALS = "mals"
    AT = "at"
    TA = "ta"


class Direction(str, Enum):
    A_TO_T = "A_to_T"
    T_TO_A = "T_to_A"


class UndefinedMetricError(ValueError):
    """A conditional probability needed by a metric has zero support."""


@dataclass(frozen=True)
class MetricConfig:
    undefined_policy: UndefinedPolicy = UndefinedPolicy.SKIP_AND_RENORMALIZE
    tie_epsilon: float = 0.0
    delta_baseline: DeltaBaseline = DeltaBaseline.TEST_GROUND_TRUTH

    def __post_init__(self):
        object.__setattr__(self, "undefined_policy", UndefinedPolicy(self.undefined_policy))
        object.__setattr__(self, "delta_baseline", DeltaBaseline(self.delta_baseline))
        if not self.tie_epsilon >= 0:
            raise ValueError("tie_epsilon must be non-negative")

    def to_dict(self) -> dict:
        return {
            "undefined_policy": self.undefined_policy.value,
            "tie_epsilon": self.tie_epsilon,
            "delta_baseline": self.delta_baseline.value,
        }


DEFAULT_CONFIG = MetricConfig()


@dataclass(frozen=True)
class BiasAmpResult:
    """Aggregate bias amplification plus its per-(attribute, task) breakdown.

    ``contribution`` is the term actually summed for each pair and is NaN
    where ``defined_mask`` is False. ``aggregate`` equals the sum of defined
    contributions divided by ``normalization``.
    """

    aggregate: float
    y: np.ndarray
    delta: np.ndarray
    contribution: np.ndarray
    defined_mask: np.ndarray
    normalization: float
    metric_kind: MetricKind
    attribute_names: tuple = ()
    task_names: tuple = ()

    def to_dict(self) -> dict:
        def mat(m):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in np.asarray(m, dtype=float)]

        return {
            "metric_kind": self.metric_kind.value,
            "aggregate": None if not np.isfinite(self.aggregate) else float(self.aggregate),
            "normalization": float(self.normalization),
            "attribute_names": list(self.attribute_names),
            "task_names": list(self.task_names),
            "y": self.y.astype(int).tolist(),
            "delta": mat(self.delta),
            "contribution": mat(self.contribution),
            "defined_mask": self.defined_mask.astype(bool).tolist(),
        }


def _aggregate(kind: MetricKind, y, delta, defined, cfg: MetricConfig, names) -> BiasAmpResult:
    y = y.astype(bool)
    if kind is MetricKind.MALS:
        contribution = np.where(y, delta, 0.0)
    else:
        contribution = np.where(y, delta, -delta)
    contribution = np.where(defined, contribution, np.nan)
    n_a, n_t = delta.shape

    if cfg.undefined_policy is UndefinedPolicy.ERROR and not defined.all():
        bad = [(names[0][a], names[1][t]) for a, t in zip(*np.nonzero(~defined))]
        raise UndefinedMetricError(f"{kind.value}: undefined conditionals for pairs {bad}")

    if kind is MetricKind.MALS:
        nominal = n_t
        if cfg.undefined_policy is UndefinedPolicy.SKIP_AND_RENORMALIZE:
            # undefinedness in this metric is per task column
            normalization = int(defined.any(axis=0).sum())
        else:
            normalization = nominal
    else:
        nominal = n_a * n_t
        if cfg.undefined_policy is UndefinedPolicy.SKIP_AND_RENORMALIZE:
            normalization = int(defined.sum())
        else:
            normalization = nominal

    if cfg.undefined_policy is UndefinedPolicy.PROPAGATE_NAN and not defined.all():
        aggregate = float("nan")
    elif normalization == 0:
        aggregate = float("nan")
    else:
        aggregate = float(np.sum(contribution[defined]) / normalization)

    return BiasAmpResult(
        aggregate=aggregate,
        y=y,
        delta=np.where(defined, delta, np.nan),
        contribution=contribution,
        defined_mask=defined,
        normalization=float(normalization),
        metric_kind=kind,
        attribute_names=tuple(names[0]),
        task_names=tuple(names[1]),
    )


def _check_width(matrix, width: int, what: str):
    if matrix.shape[1] != width:
        raise ValueError(f"{what} has {matrix.shape[1]} columns, expected {width}")


def _names(base: BaseCorrelations, truth: Optional[IndicatorDataset] = None):
    if truth is not None:
        return truth.attribute_names, truth.task_names
    n_a, n_t = base.p_joint.shape
    return (
        base.attribute_names or tuple(f"A{i}" for i in range(n_a)),
        base.task_names or tuple(f"T{i}" for i in range(n_t)),
    )


def _pred_weights(weights, truth: Optional[IndicatorDataset]):
    if weights is not None:
        return weights
    if truth is not None:
        return truth.example_weights
    return None


def mals_y(base: BaseCorrelations, cfg: MetricConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Pairs treated as positively correlated: ``P(A|T) > 1/|A|``."""
    n_a = base.p_attr.shape[0]
    cond = np.nan_to_num(base.p_attr_given_task, nan=-np.inf)
    return cond > 1.0 / n_a + cfg.tie_epsilon


def directional_y(base: BaseCorrelations, cfg: MetricConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Pairs co-occurring above independence in the base correlations."""
    return independence_gap(base) > cfg.tie_epsilon


def biasamp_mals(base: BaseCorrelations, test_preds: PredictionSet,
                 cfg: MetricConfig = DEFAULT_CONFIG, weights=None) -> BiasAmpResult:
    """Prediction-conditioned bias amplification.

    ``Delta_at = P(Ahat_a=1 | That_t=1) - P(A_a=1 | T_t=1)``, summed over
    pairs with ``P(A_a=1 | T_t=1) > 1/|A|`` and divided by ``|T|``.
    """
    if test_preds.attr_pred is None or test_preds.task_pred is None:
        raise ValueError("biasamp_mals needs both attribute and task predictions")
    n_a, n_t = base.p_joint.shape
    _check_width(test_preds.attr_pred, n_a, "attr_pred")
    _check_width(test_preds.task_pred, n_t, "task_pred")

    pred = compute_stats(test_preds.attr_pred, test_preds.task_pred, weights)
    delta = pred.p_attr_given_task - base.p_attr_given_task
    defined = pred.defined_attr_given_task & base.defined_attr_given_task
    return _aggregate(MetricKind.MALS, mals_y(base, cfg), delta, defined, cfg, _names(base))


def biasamp_directional(direction, base: BaseCorrelations, test_truth: IndicatorDataset,
                        test_preds: PredictionSet, cfg: MetricConfig = DEFAULT_CONFIG,
                        weights=None) -> BiasAmpResult:
    """Directional bias amplification, ``A_to_T`` or ``T_to_A``.

    ``y`` comes from the base correlations (normally the training set);
    the predicted conditional is measured on the test set against either the
    test ground truth or the base conditional, per ``cfg.delta_baseline``.
    """
    direction = Direction(direction)
    n_a, n_t = base.p_joint.shape
    _check_width(test_truth.attr_matrix, n_a, "test attr_matrix")
    _check_width(test_truth.task_matrix, n_t, "test task_matrix")
    if test_preds.n_examples != test_truth.n_examples:
        raise ValueError(
            f"predictions cover {test_preds.n_examples} examples, ground truth {test_truth.n_examples}"
        )
    w = _pred_weights(weights, test_truth)
    use_base = cfg.delta_baseline is DeltaBaseline.BASE_CORRELATIONS

    if direction is Direction.A_TO_T:
        if test_preds.task_pred is None:
            raise ValueError("A_to_T needs task predictions")
        _check_width(test_preds.task_pred, n_t, "task_pred")
        pred = compute_stats(test_truth.attr_matrix, test_preds.task_pred, w)
        predicted, defined = pred.p_task_given_attr, pred.defined_task_given_attr
        if use_base:
            ref, ref_defined = base.p_task_given_attr, base.defined_task_given_attr
        else:
            truth = compute_stats(test_truth.attr_matrix, test_truth.task_matrix, w)
            ref, ref_defined = truth.p_task_given_attr, truth.defined_task_given_attr
        kind = MetricKind.AT
    else:
        if test_preds.attr_pred is None:
            raise ValueError("T_to_A needs attribute predictions")
        _check_width(test_preds.attr_pred, n_a, "attr_pred")
        pred = compute_stats(test_preds.attr_pred, test_truth.task_matrix, w)
        predicted, defined = pred.p_attr_given_task, pred.defined_attr_given_task
        if use_base:
            ref, ref_defined = base.p_attr_given_task, base.defined_attr_given_task
        else:
            truth = compute_stats(test_truth.attr_matrix, test_truth.task_matrix, w)
            ref, ref_defined = truth.p_attr_given_task, truth.defined_attr_given_task
        kind = MetricKind.TA

    delta = predicted - ref
    return _aggregate(kind, directional_y(base, cfg), delta, defined & ref_defined, cfg,
                      _names(base, test_truth))


def delta_pair(base: BaseCorrelations, preds: PredictionSet, pair: tuple, weights=None) -> float:
    """Single ``Delta_at`` of the prediction-conditioned metric for one pair."""
    a, t = pair
    res = biasamp_mals(base, preds, MetricConfig(undefined_policy=UndefinedPolicy.PROPAGATE_NAN), weights)
    n_a, n_t = res.delta.shape
    if not (0 <= a < n_a and 0 <= t < n_t):
        raise IndexError(f"pair {pair} out of range for {n_a}x{n_t}")
    if not res.defined_mask[a, t]:
        raise UndefinedMetricError(f"Delta undefined for pair {pair}")
    return float(res.delta[a, t])


# ---------------------------------------------------------------------------
# classic group-fairness baselines


def _resolve(index, names: Sequence[str], what: str) -> int:
    if isinstance(index, str):
        try:
            return list(names).index(index)
        except ValueError:
            raise KeyError(f"unknown {what} {index!r}; have {list(names)}") from None
    index = int(index)
    if not 0 <= index < len(names):
        raise IndexError(f"{what} index {index} out of range")
    return index


def _undefined(msg: str, cfg: MetricConfig) -> float:
    if cfg.undefined_policy is UndefinedPolicy.ERROR:
        raise UndefinedMetricError(msg)
    return float("nan")


@dataclass(frozen=True)
class _GroupCounts:
    tp: float
    fp: float
    tn: float
    fn: float

    @property
    def positives(self):
        return self.tp + self.fn

    @property
    def negatives(self):
        return self.fp + self.tn

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def _group_counts(test_truth, test_preds, task_index, group_a, group_b, weights):
    if test_preds.task_pred is None:
        raise ValueError("classic metrics need task predictions")
    if not np.all((test_preds.task_pred == 0) | (test_preds.task_pred == 1)):
        raise ValueError("classic metrics need discrete task predictions; threshold scores first")
    if test_preds.n_examples != test_truth.n_examples:
        raise ValueError("prediction and ground-truth example counts differ")
    t = _resolve(task_index, test_truth.task_names, "task")
    ga = _resolve(group_a, test_truth.attribute_names, "attribute")
    gb = _resolve(group_b, test_truth.attribute_names, "attribute")
    if ga == gb:
        raise ValueError("group_a and group_b must differ")
    if not test_truth.is_binary:
        raise ValueError("classic metrics need binary ground truth")
    w = test_truth.weights() if weights is None else np.asarray(weights, dtype=float)
    in_a = test_truth.attr_matrix[:, ga] == 1
    in_b = test_truth.attr_matrix[:, gb] == 1
    if np.any(in_a & in_b & (w > 0)):
        raise ValueError("classic metrics need disjoint groups; some examples are in both")
    y = test_truth.task_matrix[:, t] == 1
    yhat = test_preds.task_pred[:, t] == 1

    out = []
    for name, member in ((group_a, in_a), (group_b, in_b)):
        m = member & (w > 0)
        if not m.any():
            raise ValueError(f"group {name!r} has no examples")
        out.append(_GroupCounts(
            tp=float(w[m & y & yhat].sum()),
            fp=float(w[m & ~y & yhat].sum()),
            tn=float(w[m & ~y & ~yhat].sum()),
            fn=float(w[m & y & ~yhat].sum()),
        ))
    return out


def fpr_difference(test_truth: IndicatorDataset, test_preds: PredictionSet, task_index=0,
                   group_a=0, group_b=1, cfg: MetricConfig = DEFAULT_CONFIG, weights=None) -> float:
    """``FPR(group_b) - FPR(group_a)`` for one task."""
    ca, cb = _group_counts(test_truth, test_preds, task_index, group_a, group_b, weights)
    if ca.negatives == 0 or cb.negatives == 0:
        return _undefined("FPR undefined: a group has no negatives", cfg)
    return cb.fp / cb.negatives - ca.fp / ca.negatives


def tpr_difference(test_truth: IndicatorDataset, test_preds: PredictionSet, task_index=0,
                   group_a=0, group_b=1, cfg: MetricConfig = DEFAULT_CONFIG, weights=None) -> float:
    """``TPR(group_b) - TPR(group_a)`` for one task."""
    ca, cb = _group_counts(test_truth, test_preds, task_index, group_a, group_b, weights)
    if ca.positives == 0 or cb.positives == 0:
        return _undefined("TPR undefined: a group has no positives", cfg)
    return cb.tp / cb.positives - ca.tp / ca.positives


def accuracy_difference(test_truth: IndicatorDataset, test_preds: PredictionSet, task_index=0,
                        group_a=0, group_b=1, cfg: MetricConfig = DEFAULT_CONFIG, weights=None) -> float:
    """``accuracy(group_b) - accuracy(group_a)`` for one task."""
    ca, cb = _group_counts(test_truth, test_preds, task_index, group_a, group_b, weights)
    return (cb.tp + cb.tn) / cb.total - (ca.tp + ca.tn) / ca.total


def mean_subgroup_accuracy(test_truth: IndicatorDataset, test_preds: PredictionSet, task_index=0,
                           group_a=0, group_b=1, cfg: MetricConfig = DEFAULT_CONFIG, weights=None,
                           cells: str = "attribute") -> float:
    """Task accuracy averaged over subgroups with equal subgroup weight.

    ``cells="attribute"`` averages the per-group accuracy of the two
    attribute groups. ``cells="attribute_label"`` averages over the four
    (group, true label) cells instead, i.e. mean per-class accuracy across
    groups. Empty cells are skipped under ``skip_and_renormalize``.
    """
    ca, cb = _group_counts(test_truth, test_preds, task_index, group_a, group_b, weights)
    if cells == "attribute":
        return ((ca.tp + ca.tn) / ca.total + (cb.tp + cb.tn) / cb.total) / 2
    if cells != "attribute_label":
        raise ValueError(f"unknown cells mode {cells!r}")
    accs = []
    for c in (ca, cb):
        for correct, size in ((c.tp, c.positives), (c.tn, c.negatives)):
            if size == 0:
                if cfg.undefined_policy is not UndefinedPolicy.SKIP_AND_RENORMALIZE:
                    return _undefined("empty (group, label) subgroup", cfg)
                continue
            accs.append(correct / size)
    return float(np.mean(accs))


# ---------------------------------------------------------------------------
# uniform dispatch used by sweeps, bootstrap and the CLI

CLASSIC_METRICS = {
    "fpr_difference": fpr_difference,
    "tpr_difference": tpr_difference,
    "accuracy_difference": accuracy_difference,
    "mean_subgroup_accuracy": mean_subgroup_accuracy,
}
BIASAMP_METRICS = ("mals", "at", "ta")
METRIC_NAMES = BIASAMP_METRICS + tuple(CLASSIC_METRICS)


@dataclass(frozen=True)
class MetricSpec:
    """Names one scalar metric and the task/groups it is evaluated on."""

    name: str
    task: object = 0
    group_a: object = 0
    group_b: object = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}; choose from {METRIC_NAMES}")

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        return cls(text.strip())


def evaluate_metric(spec, test_truth: Optional[IndicatorDataset], test_preds: PredictionSet,
                    base: Optional[BaseCorrelations], cfg: MetricConfig = DEFAULT_CONFIG,
                    weights=None) -> float:
    """Evaluate ``spec`` and return its scalar value (NaN when undefined)."""
    if isinstance(spec, str):
        spec = MetricSpec(spec)
    if spec.name == "mals":
        if weights is None and test_truth is not None:
            weights = test_truth.example_weights
        return biasamp_mals(base, test_preds, cfg, weights).aggregate
    if spec.name in ("at", "ta"):
        direction = Direction.A_TO_T if spec.name == "at" else Direction.T_TO_A
        return biasamp_directional(direction, base, test_truth, test_preds, cfg, weights).aggregate
    fn = CLASSIC_METRICS[spec.name]
    return fn(test_truth, test_preds, spec.task, spec.group_a, spec.group_b, cfg, weights, **spec.options)
