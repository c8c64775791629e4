"""Brute-force counting oracle for the bias amplification metrics.

Deliberately naive: every probability is a ratio of sums taken with explicit
Python loops over examples, and the metric formulas are written out term by
term. Nothing here calls into :mod:`biasamp.metrics` or
:func:`biasamp.core.compute_stats`, so agreement between the two is a real
check rather than a tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class OracleResult:
    value: float
    defined_mask: list
    contribution: list

    def __float__(self):
        return self.value


def _rows(matrix):
    return [[float(v) for v in row] for row in matrix]


def _count_probs(attr_rows, task_rows, weights):
    """Marginals, joint and both conditionals by explicit summation."""
    n_a = len(attr_rows[0])
    n_t = len(task_rows[0])
    total = 0.0
    ca = [0.0] * n_a
    ct = [0.0] * n_t
    cj = [[0.0] * n_t for _ in range(n_a)]
    for i in range(len(attr_rows)):
        w = weights[i]
        total += w
        for a in range(n_a):
            ca[a] += w * attr_rows[i][a]
        for t in range(n_t):
            ct[t] += w * task_rows[i][t]
        for a in range(n_a):
            for t in range(n_t):
                cj[a][t] += w * attr_rows[i][a] * task_rows[i][t]
    p_a = [c / total for c in ca]
    p_t = [c / total for c in ct]
    p_j = [[cj[a][t] / total for t in range(n_t)] for a in range(n_a)]
    a_given_t = [[cj[a][t] / ct[t] if ct[t] > 0 else None for t in range(n_t)] for a in range(n_a)]
    t_given_a = [[cj[a][t] / ca[a] if ca[a] > 0 else None for t in range(n_t)] for a in range(n_a)]
    return p_a, p_t, p_j, a_given_t, t_given_a


def _base_probs(base):
    # IndicatorDataset: count it ourselves; anything else: read the numbers
    if hasattr(base, "attr_matrix"):
        attr, task = _rows(base.attr_matrix), _rows(base.task_matrix)
        w = [1.0] * len(attr) if base.example_weights is None else [float(x) for x in base.example_weights]
        return _count_probs(attr, task, w)

    def cond(m):
        return [[None if math.isnan(float(v)) else float(v) for v in row] for row in m]

    return (
        [float(v) for v in base.p_attr],
        [float(v) for v in base.p_task],
        _rows(base.p_joint),
        cond(base.p_attr_given_task),
        cond(base.p_task_given_attr),
    )


def counting_oracle(dataset, preds, base, metric: str, undefined_policy: str = "skip_and_renormalize",
                    tie_epsilon: float = 0.0, delta_baseline: str = "test_ground_truth",
                    weights=None) -> OracleResult:
    """Recompute ``metric`` (``"mals"``, ``"at"`` or ``"ta"``) by counting.

    ``base`` is either a training :class:`IndicatorDataset` (counted here) or
    a base-correlation object whose probabilities are read as given.
    """
    metric = getattr(metric, "name", metric)
    metric = getattr(metric, "value", metric)
    undefined_policy = getattr(undefined_policy, "value", undefined_policy)
    delta_baseline = getattr(delta_baseline, "value", delta_baseline)
    b_pa, b_pt, b_pj, b_a_given_t, b_t_given_a = _base_probs(base)
    n_a, n_t = len(b_pa), len(b_pt)

    n = preds.n_examples
    if weights is None:
        ew = getattr(dataset, "example_weights", None) if dataset is not None else None
        weights = [1.0] * n if ew is None else list(ew)
    weights = [float(x) for x in weights]

    y = [[0] * n_t for _ in range(n_a)]
    delta = [[None] * n_t for _ in range(n_a)]

    if metric == "mals":
        pa_hat, pt_hat, _, hat_a_given_t, _ = _count_probs(_rows(preds.attr_pred), _rows(preds.task_pred), weights)
        for a in range(n_a):
            for t in range(n_t):
                base_cond = b_a_given_t[a][t]
                if base_cond is not None and base_cond > 1.0 / n_a + tie_epsilon:
                    y[a][t] = 1
                if base_cond is not None and hat_a_given_t[a][t] is not None:
                    delta[a][t] = hat_a_given_t[a][t] - base_cond
    elif metric in ("at", "ta"):
        for a in range(n_a):
            for t in range(n_t):
                if b_pj[a][t] - b_pa[a] * b_pt[t] > tie_epsilon:
                    y[a][t] = 1
        truth_a, truth_t = _rows(dataset.attr_matrix), _rows(dataset.task_matrix)
        _, _, _, true_a_given_t, true_t_given_a = _count_probs(truth_a, truth_t, weights)
        if metric == "at":
            _, _, _, _, hat = _count_probs(truth_a, _rows(preds.task_pred), weights)
            ref = b_t_given_a if delta_baseline == "base_correlations" else true_t_given_a
        else:
            _, _, _, hat, _ = _count_probs(_rows(preds.attr_pred), truth_t, weights)
            ref = b_a_given_t if delta_baseline == "base_correlations" else true_a_given_t
        for a in range(n_a):
            for t in range(n_t):
                if hat[a][t] is not None and ref[a][t] is not None:
                    delta[a][t] = hat[a][t] - ref[a][t]
    else:
        raise ValueError(f"oracle covers mals, at and ta, not {metric!r}")

    defined = [[delta[a][t] is not None for t in range(n_t)] for a in range(n_a)]
    contribution = [[None] * n_t for _ in range(n_a)]
    total = 0.0
    for a in range(n_a):
        for t in range(n_t):
            if not defined[a][t]:
                continue
            if metric == "mals":
                term = y[a][t] * delta[a][t]
            else:
                term = delta[a][t] if y[a][t] == 1 else -delta[a][t]
            contribution[a][t] = term
            total += term

    all_defined = all(all(row) for row in defined)
    if undefined_policy == "error" and not all_defined:
        raise ValueError("undefined conditional under error policy")
    if undefined_policy == "propagate_nan" and not all_defined:
        return OracleResult(float("nan"), defined, contribution)
    if metric == "mals":
        if undefined_policy == "skip_and_renormalize":
            divisor = sum(1 for t in range(n_t) if any(defined[a][t] for a in range(n_a)))
        else:
            divisor = n_t
    else:
        if undefined_policy == "skip_and_renormalize":
            divisor = sum(1 for a in range(n_a) for t in range(n_t) if defined[a][t])
        else:
            divisor = n_a * n_t
    if divisor == 0:
        return OracleResult(float("nan"), defined, contribution)
    return OracleResult(total / divisor, defined, contribution)
