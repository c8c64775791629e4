"""Decision thresholds that match a target positive rate, and threshold sweeps.

A threshold is "calibrated" here in the rate sense: on ``N`` validation
scores, the ``ceil(N * p)`` highest are predicted positive. Predictions use
the exclusive rule ``score > threshold`` throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BaseCorrelations, IndicatorDataset, PredictionSet
from .metrics import DEFAULT_CONFIG, MetricConfig, MetricSpec, UndefinedMetricError, evaluate_metric


@dataclass(frozen=True)
class ThresholdChoice:
    threshold: float
    target_rate: float
    achieved_rate: float
    n_validation: int
    tie_note: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "target_rate": self.target_rate,
            "achieved_rate": self.achieved_rate,
            "n_validation": self.n_validation,
            "tie_note": self.tie_note,
        }


def calibrate_threshold(validation_scores, target_rate: float) -> ThresholdChoice:
    """Pick a threshold so that a fraction ``target_rate`` of scores exceed it.

    The threshold sits midway between the ``ceil(N p)``-th highest score and
    the next one down. When equal scores straddle that cut, the whole tied
    block is left negative and the shortfall is recorded in ``tie_note``.
    ``p = 0`` and ``p = 1`` give thresholds above the maximum and below the
    minimum score respectively.
    """
    scores = np.asarray(validation_scores, dtype=float).reshape(-1)
    if scores.size == 0:
        raise ValueError("need at least one validation score")
    if not np.all(np.isfinite(scores)):
        raise ValueError("validation scores must be finite")
    if not 0.0 <= target_rate <= 1.0:
        raise ValueError(f"target_rate must lie in [0, 1], got {target_rate}")

    n = scores.size
    desc = np.sort(scores)[::-1]
    # guard against p*N landing a hair above an integer
    k = min(n, math.ceil(round(n * target_rate, 9)))
    upper_sentinel = desc[0] + 1.0
    lower_sentinel = desc[-1] - 1.0

    note = None
    if k == 0:
        threshold = (desc[0] + upper_sentinel) / 2
    elif k == n:
        threshold = (desc[-1] + lower_sentinel) / 2
    elif desc[k - 1] > desc[k]:
        threshold = (desc[k - 1] + desc[k]) / 2
    else:
        tied = desc[k - 1]
        above = desc[desc > tied]
        threshold = (tied + (above[-1] if above.size else upper_sentinel)) / 2
        note = (
            f"{int(np.sum(desc == tied))} scores tied at {tied:g} straddle the cut; "
            f"tied block predicted negative"
        )

    achieved = float(np.mean(scores > threshold))
    if note is not None:
        note += f" (achieved {achieved:.6g} vs target {target_rate:.6g})"
    return ThresholdChoice(float(threshold), float(target_rate), achieved, int(n), note)


def calibrate_columns(validation_scores, target_rates) -> list:
    """Per-column calibration of an ``N x K`` score matrix.

    ``target_rates`` is typically the training-set positive rate of each task
    column, e.g. ``train.task_matrix.mean(axis=0)``.
    """
    scores = np.asarray(validation_scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, None]
    rates = np.broadcast_to(np.asarray(target_rates, dtype=float), (scores.shape[1],))
    return [calibrate_threshold(scores[:, k], rates[k]) for k in range(scores.shape[1])]


def apply_threshold(scores, threshold) -> np.ndarray:
    """Binary predictions ``1[score > threshold]``.

    ``threshold`` may be a scalar or one value per column.
    """
    s = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    th = np.asarray(threshold, dtype=float)
    return (s > th).astype(float)


@dataclass
class SweepCurve:
    thresholds: np.ndarray
    values_per_metric: dict
    integral_per_metric: dict = field(default_factory=dict)
    gaps: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            return [None if not np.isfinite(x) else float(x) for x in v]

        return {
            "thresholds": [float(x) for x in self.thresholds],
            "values_per_metric": {k: clean(v) for k, v in self.values_per_metric.items()},
            "integral_per_metric": {k: (None if not np.isfinite(v) else float(v))
                                    for k, v in self.integral_per_metric.items()},
            "gaps": {k: [float(x) for x in v] for k, v in self.gaps.items()},
        }


def _trapezoid(y, x) -> float:
    if len(x) < 2:
        return 0.0
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2))


def threshold_sweep(test_truth: IndicatorDataset, scores, base: Optional[BaseCorrelations],
                    grid: Sequence[float], metrics: Sequence, cfg: MetricConfig = DEFAULT_CONFIG,
                    attr_pred=None, integrate: bool = True) -> SweepCurve:
    """Evaluate metrics on task predictions thresholded at each grid value.

    ``scores`` are task scores (``N x |T|``). ``attr_pred`` supplies attribute
    predictions for metrics that need them (``mals``, ``ta``); they are held
    fixed across the sweep. Metrics undefined at a grid point give NaN and are
    left out of the trapezoid integral; the skipped thresholds are listed in
    ``gaps``.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("threshold grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("threshold grid must be strictly increasing")
    s = np.asarray(scores, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    specs = [m if isinstance(m, MetricSpec) else MetricSpec(m) for m in metrics]
    labels = [_label(spec) for spec in specs]

    values = {label: np.full(grid.size, np.nan) for label in labels}
    for i, th in enumerate(grid):
        preds = PredictionSet(attr_pred=attr_pred, task_pred=apply_threshold(s, th))
        for spec, label in zip(specs, labels):
            try:
                values[label][i] = evaluate_metric(spec, test_truth, preds, base, cfg)
            except UndefinedMetricError:
                values[label][i] = np.nan

    curve = SweepCurve(grid, values)
    if integrate:
        for label, v in values.items():
            ok = np.isfinite(v)
            curve.integral_per_metric[label] = _trapezoid(v[ok], grid[ok]) if ok.any() else float("nan")
            if not ok.all():
                curve.gaps[label] = grid[~ok]
    return curve


def _label(spec: MetricSpec) -> str:
    return spec.name
