"""
How uncertain is a bias amplification score?
============================================

The test set is a sample, so a score computed on it has sampling error.
Resample test rows with replacement, hold the base correlations fixed, and
read off percentiles.
"""

import numpy as np

from biasamp import bootstrap_ci, multirun_ci
from biasamp.scenarios import bernoulli_fixture, masking_fixture

# A case where the score is a plain sample mean, so the answer is known.
for n in (500, 2000, 8000):
    f = bernoulli_fixture(n, p=0.3, seed=n)
    est = bootstrap_ci(f.truth, f.preds, f.base, "at", n_boot=1000, seed=0)
    print(f"N={n:5d}  point {est.point:.4f}  95% [{est.lower:.4f}, {est.upper:.4f}]  "
          f"width {est.upper - est.lower:.4f}  normal theory {f.analytic_width():.4f}")

# Two prediction sets on the same data: do their intervals overlap?
a, b = masking_fixture("original"), masking_fixture("full_mask")
ia = bootstrap_ci(a.test_truth, a.test_preds, a.base, "at", seed=1)
ib = bootstrap_ci(b.test_truth, b.test_preds, b.base, "at", seed=1)
print(f"\noriginal  A->T {ia.point:.3f} [{ia.lower:.3f}, {ia.upper:.3f}]")
print(f"full mask A->T {ib.point:.3f} [{ib.lower:.3f}, {ib.upper:.3f}]")
print("overlap:", ia.overlaps(ib))

# Across independent training runs the spread comes from training instead.
runs = np.array([0.041, 0.037, 0.052, 0.044, 0.039])
est = multirun_ci(runs)
print(f"\n5 runs: {est.point:.4f} +/- {est.half_width:.4f}  ({est.note})")
