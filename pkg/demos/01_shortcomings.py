"""
Where the prediction-conditioned metric goes wrong
===================================================

Three small datasets where the older prediction-conditioned score and the
directional score disagree, and why.
"""

import numpy as np

from biasamp import biasamp_directional, biasamp_mals, delta_pair
from biasamp.scenarios import shortcoming1_three_group, shortcoming1_two_group, shortcoming2_imbalanced

np.set_printoptions(precision=4, suppress=True)

# Three groups, one task. The model is perfect on A1, never predicts T on A2
# and always predicts T on A3. Errors on A2 and A3 cancel in P(A | That).
b = shortcoming1_three_group()
print(b.description)
print("prediction-conditioned:", biasamp_mals(b.base, b.test_preds).aggregate)

# The directional score conditions on the true attribute, so both errors count.
at = biasamp_directional("A_to_T", b.base, b.test_truth, b.test_preds)
print("A->T:", round(at.aggregate, 4))
print("per-pair contribution:\n", at.contribution)

# Two groups. Deflating A2 and inflating A1 by the same amount should look
# equally bad, but the prediction-conditioned Delta differs by a factor of six.
for variant in ("deflate_A2", "inflate_A1"):
    b = shortcoming1_two_group(variant)
    d = delta_pair(b.base, b.test_preds, (0, 0))
    at = biasamp_directional("A_to_T", b.base, b.test_truth, b.test_preds).aggregate
    print(f"{variant:11s} Delta_1 = {d:.4f}   A->T = {at:.4f}")

# Imbalanced groups. A1 is the larger group, so P(A1 | T) > 1/2 even though
# T co-occurs with A2 more than independence predicts.
b = shortcoming2_imbalanced()
mals = biasamp_mals(b.base, b.test_preds)
at = biasamp_directional("A_to_T", b.base, b.test_truth, b.test_preds)
print("pairs marked positive by P(A|T) > 1/|A|:", mals.y[:, 0])
print("pairs marked positive by the independence gap:", at.y[:, 0])
print("prediction-conditioned:", mals.aggregate, " A->T:", round(at.aggregate, 4))
