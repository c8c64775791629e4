"""
Thresholds, calibration and sweeps
==================================

A score model that ranks each group correctly but scores one group's
negatives higher. FPR gaps appear at many thresholds, yet at the threshold
that reproduces the training positive rate there is no amplification.
"""

import numpy as np

from biasamp import (
    BaseCorrelations,
    IndicatorDataset,
    PredictionSet,
    apply_threshold,
    calibrate_threshold,
    evaluate_metric,
    threshold_sweep,
)

rng = np.random.default_rng(0)
attr, task, score = [], [], []
for group, neg_range in ((0, (0.4, 0.6)), (1, (0.0, 0.2))):
    for label, (lo, hi) in ((1, (0.7, 1.0)), (0, neg_range)):
        for s in rng.uniform(lo, hi, size=50):
            attr.append([1 - group, group])
            task.append([label])
            score.append([s])
truth = IndicatorDataset(np.array(attr, float), np.array(task, float), ["A", "B"], ["T"])
scores = np.array(score)
base = BaseCorrelations.from_dataset(truth)

# Sweep the decision threshold and integrate each curve over the grid.
grid = np.linspace(0.05, 0.95, 19)
curve = threshold_sweep(truth, scores, base, grid, ["at", "fpr_difference"])
for th, at, fpr in zip(grid, curve.values_per_metric["at"], curve.values_per_metric["fpr_difference"]):
    print(f"threshold {th:.2f}   A->T {at:+.3f}   FPR diff {fpr:+.3f}")
print("integrals:", {k: round(v, 4) for k, v in curve.integral_per_metric.items()})

# Calibrate to the base positive rate: the top N*p scores become positive.
choice = calibrate_threshold(scores[:, 0], base.p_task[0])
preds = PredictionSet(task_pred=apply_threshold(scores, choice.threshold))
print(f"\ncalibrated threshold {choice.threshold:.3f}, rate {choice.achieved_rate:.2f}")
print("A->T at the calibrated threshold:", evaluate_metric("at", truth, preds, base))
