"""
Choosing the base correlations by hand
======================================

For a fill-in-the-blank language model there is no training table to read
base rates from. Instead we state them: here, pronouns equally likely for
every occupation, with a tiny tilt that fixes which direction counts as
amplification.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from biasamp import IndicatorDataset, MetricConfig, PredictionSet, biasamp_directional, independence_gap
from biasamp.io import load_base_correlations

eps = 1e-7
doc = {
    "source": "user_supplied",
    "description": "equal pronoun rates, tilted towards the stereotype",
    "attribute_names": ["he", "she"],
    "task_names": ["nurse", "engineer"],
    "p_attr": [0.5, 0.5],
    "p_task": [0.5, 0.5],
    "p_attr_given_task": [[0.5 - eps, 0.5 + eps], [0.5 + eps, 0.5 - eps]],
}
with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "base.json"
    path.write_text(json.dumps(doc))
    base = load_base_correlations(path)
print("independence gap:\n", independence_gap(base))

# Each row is a sentence about one occupation. T is the occupation; the model
# fills in a pronoun, given as P(he), P(she).
truth = IndicatorDataset(
    attr_matrix=np.zeros((4, 2)),
    task_matrix=np.array([[1, 0], [1, 0], [0, 1], [0, 1]], float),
    attribute_names=["he", "she"],
    task_names=["nurse", "engineer"],
)
fills = PredictionSet(attr_pred=np.array([[0.2, 0.8], [0.3, 0.7], [0.9, 0.1], [0.6, 0.4]]))

# Measure against the stated base rather than the (absent) test attributes.
cfg = MetricConfig(delta_baseline="base_correlations")
res = biasamp_directional("T_to_A", base, truth, fills, cfg)
print("T->A against the equal-rate base:", round(res.aggregate, 4))
print("per pair:\n", np.round(res.contribution, 4))
