"""Confidence intervals for fairness metrics.

Two sources of uncertainty are covered: the finite test set (percentile
bootstrap over example rows) and run-to-run variation of training
(normal-approximation interval over independent runs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist
from typing import Callable, Optional, Union

import numpy as np

from .core import BaseCorrelations, IndicatorDataset, PredictionSet
from .metrics import DEFAULT_CONFIG, MetricConfig, MetricSpec, UndefinedMetricError, evaluate_metric

MAX_DROPPED_FRACTION = 0.10


class IntervalMethod(str, Enum):
    BOOTSTRAP_PERCENTILE = "bootstrap_percentile"
    MULTIRUN_NORMAL = "multirun_normal"


class DegradedEstimateError(RuntimeError):
    """Too many bootstrap replicates left the metric undefined."""


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    confidence: float
    method: IntervalMethod
    n_replicates_or_runs: int
    seed: Optional[int] = None
    n_dropped: int = 0
    note: Optional[str] = None

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")

    @property
    def half_width(self) -> float:
        return (self.upper - self.lower) / 2

    def overlaps(self, other: "IntervalEstimate") -> bool:
        return intervals_overlap(self, other)

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "confidence": self.confidence,
            "method": IntervalMethod(self.method).value,
            "n_replicates_or_runs": self.n_replicates_or_runs,
            "seed": self.seed,
            "n_dropped": self.n_dropped,
            "note": self.note,
        }


def intervals_overlap(first: IntervalEstimate, second: IntervalEstimate) -> bool:
    return max(first.lower, second.lower) <= min(first.upper, second.upper)


MetricFn = Callable[[Optional[IndicatorDataset], PredictionSet, Optional[BaseCorrelations], np.ndarray], float]


def _metric_callable(metric_spec, cfg: MetricConfig) -> MetricFn:
    if callable(metric_spec) and not isinstance(metric_spec, MetricSpec):
        return metric_spec
    spec = metric_spec if isinstance(metric_spec, MetricSpec) else MetricSpec(metric_spec)

    def fn(truth, preds, base, weights):
        return evaluate_metric(spec, truth, preds, base, cfg, weights)

    return fn


def replicate_weights(n: int, n_boot: int, seed: int) -> np.ndarray:
    """Bootstrap multiplicity counts, one row per replicate.

    Replicate ``b`` draws its indices from a generator seeded with
    ``(seed, b)``, so any subset of replicates can be regenerated alone and
    serial or parallel evaluation agree exactly.
    """
    out = np.empty((n_boot, n), dtype=float)
    for b in range(n_boot):
        rng = np.random.default_rng([seed, b])
        idx = rng.integers(0, n, size=n)
        out[b] = np.bincount(idx, minlength=n)
    return out


def bootstrap_ci(test_truth: Optional[IndicatorDataset], test_preds: PredictionSet,
                 base: Optional[BaseCorrelations], metric_spec: Union[str, MetricSpec, MetricFn],
                 n_boot: int = 1000, confidence: float = 0.95, seed: int = 0,
                 cfg: MetricConfig = DEFAULT_CONFIG) -> IntervalEstimate:
    """Percentile bootstrap interval over test examples.

    Ground-truth and prediction rows are resampled together; the base
    correlations stay fixed. Resampling is expressed as integer example
    weights, which the metric code consumes directly. Replicates on which
    the metric is undefined are dropped; more than 10% dropped raises
    :class:`DegradedEstimateError`.

    ``metric_spec`` may be a metric name, a :class:`MetricSpec`, or a
    callable ``fn(truth, preds, base, weights) -> float``.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be at least 2")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    fn = _metric_callable(metric_spec, cfg)
    n = test_preds.n_examples
    if test_truth is not None and test_truth.n_examples != n:
        raise ValueError("ground truth and predictions have different lengths")
    base_w = np.ones(n) if test_truth is None else test_truth.weights()

    point = float(fn(test_truth, test_preds, base, base_w))

    values = []
    dropped = 0
    for counts in replicate_weights(n, n_boot, seed):
        w = counts * base_w
        try:
            v = float(fn(test_truth, test_preds, base, w)) if w.sum() > 0 else float("nan")
        except (UndefinedMetricError, ValueError):
            v = float("nan")
        if math.isfinite(v):
            values.append(v)
        else:
            dropped += 1
    if dropped > MAX_DROPPED_FRACTION * n_boot:
        raise DegradedEstimateError(
            f"metric undefined on {dropped} of {n_boot} bootstrap replicates"
        )
    alpha = (1 - confidence) / 2
    lower, upper = np.quantile(np.asarray(values), [alpha, 1 - alpha])
    note = f"{dropped} replicates dropped (metric undefined)" if dropped else None
    return IntervalEstimate(point, float(lower), float(upper), confidence,
                            IntervalMethod.BOOTSTRAP_PERCENTILE, n_boot, seed, dropped, note)


def multirun_ci(values, confidence: float = 0.95) -> IntervalEstimate:
    """Mean plus or minus ``z * s / sqrt(n)`` over independent runs.

    Uses the normal quantile rather than Student's t so results do not
    depend on table conventions; with fewer than 10 runs this understates
    the width and the returned ``note`` says so.
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size < 2:
        raise ValueError("multirun_ci needs at least two run values")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    # fsum keeps the result independent of the order of the runs
    if np.all(v == v[0]):
        mean, sd = float(v[0]), 0.0
    else:
        mean = math.fsum(v) / v.size
        sd = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (v.size - 1))
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    half = z * sd / math.sqrt(v.size)
    note = None
    if v.size < 10:
        note = f"normal approximation with only {v.size} runs; interval is optimistic"
    return IntervalEstimate(mean, mean - half, mean + half, confidence,
                            IntervalMethod.MULTIRUN_NORMAL, int(v.size), None, 0, note)
