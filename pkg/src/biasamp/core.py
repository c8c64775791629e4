"""Data model and empirical probability estimation.

Every metric in the package reduces to marginal, joint and conditional
probabilities of binary (or soft, in [0, 1]) attribute and task indicators.
This module owns those estimates so that all metrics share one code path,
including the weighted form used for soft predictions and bootstrap
replicates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

EPS_NUM = 1e-9


class PredictionKind(str, Enum):
    DISCRETE = "discrete"
    SOFT = "soft"


class BaseSource(str, Enum):
    EMPIRICAL_TRAIN = "empirical_train"
    EMPIRICAL_TEST = "empirical_test"
    USER_SUPPLIED = "user_supplied"


def _as_matrix(values, name: str, n_rows: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(
            f"{name} has {arr.shape[0]} rows, expected {n_rows}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} has entries outside [0, 1]")
    arr.setflags(write=False)
    return arr


def _check_names(names: Sequence[str], width: int, what: str) -> tuple:
    names = tuple(str(n) for n in names)
    if len(names) != width:
        raise ValueError(f"expected {width} {what} names, got {len(names)}")
    if any(not n for n in names):
        raise ValueError(f"{what} names must be non-empty")
    if len(set(names)) != len(names):
        raise ValueError(f"{what} names must be unique: {names}")
    return names


def _default_names(prefix: str, width: int) -> tuple:
    return tuple(f"{prefix}{i}" for i in range(width))


def _is_binary(arr: Optional[np.ndarray]) -> bool:
    return arr is None or bool(np.all((arr == 0.0) | (arr == 1.0)))


@dataclass(frozen=True)
class IndicatorDataset:
    """Ground-truth attribute and task indicators over ``N`` examples.

    Rows of ``attr_matrix`` may hold zero, one or several ones: people can
    belong to no listed group, one group, or an intersection of groups.
    """

    attr_matrix: np.ndarray
    task_matrix: np.ndarray
    attribute_names: tuple = ()
    task_names: tuple = ()
    example_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        attr = _as_matrix(self.attr_matrix, "attr_matrix")
        task = _as_matrix(self.task_matrix, "task_matrix", attr.shape[0])
        if attr.shape[0] == 0:
            raise ValueError("dataset has no examples")
        if attr.shape[1] == 0 or task.shape[1] == 0:
            raise ValueError("need at least one attribute and one task column")
        object.__setattr__(self, "attr_matrix", attr)
        object.__setattr__(self, "task_matrix", task)
        object.__setattr__(
            self,
            "attribute_names",
            _check_names(self.attribute_names or _default_names("A", attr.shape[1]), attr.shape[1], "attribute"),
        )
        object.__setattr__(
            self,
            "task_names",
            _check_names(self.task_names or _default_names("T", task.shape[1]), task.shape[1], "task"),
        )
        if self.example_weights is not None:
            w = _check_weights(self.example_weights, attr.shape[0])
            object.__setattr__(self, "example_weights", w)

    @property
    def n_examples(self) -> int:
        return self.attr_matrix.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.attr_matrix.shape[1]

    @property
    def n_tasks(self) -> int:
        return self.task_matrix.shape[1]

    @property
    def is_binary(self) -> bool:
        return _is_binary(self.attr_matrix) and _is_binary(self.task_matrix)

    @property
    def has_soft_attributes(self) -> bool:
        return not _is_binary(self.attr_matrix)

    def weights(self) -> np.ndarray:
        if self.example_weights is None:
            return np.ones(self.n_examples)
        return self.example_weights

    def take(self, rows) -> "IndicatorDataset":
        w = None if self.example_weights is None else self.example_weights[rows]
        return IndicatorDataset(
            self.attr_matrix[rows],
            self.task_matrix[rows],
            self.attribute_names,
            self.task_names,
            w,
        )


@dataclass(frozen=True)
class PredictionSet:
    """Model outputs for attributes and/or tasks, aligned with a dataset."""

    attr_pred: Optional[np.ndarray] = None
    task_pred: Optional[np.ndarray] = None
    kind: PredictionKind = field(default=None)  # inferred when omitted

    def __post_init__(self):
        if self.attr_pred is None and self.task_pred is None:
            raise ValueError("a PredictionSet needs attr_pred, task_pred or both")
        attr = None if self.attr_pred is None else _as_matrix(self.attr_pred, "attr_pred")
        n = None if attr is None else attr.shape[0]
        task = None if self.task_pred is None else _as_matrix(self.task_pred, "task_pred", n)
        object.__setattr__(self, "attr_pred", attr)
        object.__setattr__(self, "task_pred", task)
        binary = _is_binary(attr) and _is_binary(task)
        kind = self.kind
        if kind is None:
            kind = PredictionKind.DISCRETE if binary else PredictionKind.SOFT
        kind = PredictionKind(kind)
        if kind is PredictionKind.DISCRETE and not binary:
            raise ValueError("kind=discrete but predictions contain values other than 0/1")
        object.__setattr__(self, "kind", kind)

    @property
    def n_examples(self) -> int:
        return (self.attr_pred if self.attr_pred is not None else self.task_pred).shape[0]

    def take(self, rows) -> "PredictionSet":
        return PredictionSet(
            None if self.attr_pred is None else self.attr_pred[rows],
            None if self.task_pred is None else self.task_pred[rows],
            self.kind,
        )


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise ValueError(f"weights have length {w.shape[0]}, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise ValueError("weights are all zero")
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class CorrelationStats:
    """Empirical probabilities of attribute/task indicators.

    Conditionals whose denominator has zero support are NaN and flagged
    ``False`` in the matching ``defined_*`` mask.
    """

    p_attr: np.ndarray
    p_task: np.ndarray
    p_joint: np.ndarray
    p_attr_given_task: np.ndarray
    p_task_given_attr: np.ndarray
    defined_attr_given_task: np.ndarray
    defined_task_given_attr: np.ndarray
    total_weight: float
    attr_weight: np.ndarray
    task_weight: np.ndarray
    joint_weight: np.ndarray


def _safe_divide(num: np.ndarray, den: np.ndarray):
    defined = np.broadcast_to(den > 0, num.shape).copy()
    out = np.full(num.shape, np.nan)
    np.divide(num, np.broadcast_to(den, num.shape), out=out, where=defined)
    return out, defined


def compute_stats(attr, task, weights=None) -> CorrelationStats:
    """Estimate every marginal, joint and conditional probability.

    Parameters
    ----------
    attr : array_like, shape (N, |A|)
        Attribute indicators or probabilities.
    task : array_like, shape (N, |T|)
        Task indicators or probabilities.
    weights : array_like, shape (N,), optional
        Non-negative example weights (bootstrap counts, sample weights).

    Returns
    -------
    CorrelationStats
    """
    a = _as_matrix(attr, "attr")
    t = _as_matrix(task, "task", a.shape[0])
    n = a.shape[0]
    if n == 0:
        raise ValueError("cannot compute statistics on an empty dataset")
    w = np.ones(n) if weights is None else _check_weights(weights, n)

    total = float(w.sum())
    attr_w = w @ a
    task_w = w @ t
    joint_w = (a * w[:, None]).T @ t

    p_joint = joint_w / total
    p_attr_given_task, def_at = _safe_divide(joint_w, task_w[None, :])
    p_task_given_attr, def_ta = _safe_divide(joint_w, attr_w[:, None])
    return CorrelationStats(
        p_attr=attr_w / total,
        p_task=task_w / total,
        p_joint=p_joint,
        p_attr_given_task=p_attr_given_task,
        p_task_given_attr=p_task_given_attr,
        defined_attr_given_task=def_at,
        defined_task_given_attr=def_ta,
        total_weight=total,
        attr_weight=attr_w,
        task_weight=task_w,
        joint_weight=joint_w,
    )


def dataset_stats(dataset: IndicatorDataset) -> CorrelationStats:
    return compute_stats(dataset.attr_matrix, dataset.task_matrix, dataset.example_weights)


def independence_gap(stats) -> np.ndarray:
    """``P(A_a=1, T_t=1) - P(A_a=1) P(T_t=1)`` for every pair.

    Positive entries mean attribute ``a`` co-occurs with task ``t`` more than
    independence predicts. Works on :class:`CorrelationStats` and
    :class:`BaseCorrelations` alike.
    """
    return np.asarray(stats.p_joint) - np.outer(stats.p_attr, stats.p_task)


@dataclass(frozen=True)
class BaseCorrelations:
    """Reference correlations that amplification is measured against.

    Usually the empirical training statistics, but may be supplied by hand
    when no meaningful training distribution exists (e.g. fill-in-the-blank
    language models, where the analyst chooses the base rates).
    """

    p_attr: np.ndarray
    p_task: np.ndarray
    p_joint: np.ndarray
    p_attr_given_task: np.ndarray
    p_task_given_attr: np.ndarray
    source: BaseSource = BaseSource.EMPIRICAL_TRAIN
    description: str = ""
    attribute_names: tuple = ()
    task_names: tuple = ()

    def __post_init__(self):
        for name in ("p_attr", "p_task", "p_joint", "p_attr_given_task", "p_task_given_attr"):
            arr = np.array(getattr(self, name), dtype=float)
            finite = arr[np.isfinite(arr)]
            if finite.size and (finite.min() < -EPS_NUM or finite.max() > 1 + EPS_NUM):
                raise ValueError(f"{name} has probabilities outside [0, 1]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n_a, n_t = self.p_attr.shape[0], self.p_task.shape[0]
        for name in ("p_joint", "p_attr_given_task", "p_task_given_attr"):
            if getattr(self, name).shape != (n_a, n_t):
                raise ValueError(f"{name} must have shape ({n_a}, {n_t})")
        if np.any(np.isnan(self.p_joint)) or np.any(np.isnan(self.p_attr)) or np.any(np.isnan(self.p_task)):
            raise ValueError("marginal and joint probabilities must be defined")
        bound = np.minimum.outer(self.p_attr, self.p_task)
        if np.any(self.p_joint > bound + EPS_NUM):
            raise ValueError("p_joint exceeds min(p_attr, p_task) for some pair")
        object.__setattr__(self, "source", BaseSource(self.source))
        if self.attribute_names:
            object.__setattr__(self, "attribute_names", _check_names(self.attribute_names, n_a, "attribute"))
        if self.task_names:
            object.__setattr__(self, "task_names", _check_names(self.task_names, n_t, "task"))

    @property
    def defined_attr_given_task(self) -> np.ndarray:
        return ~np.isnan(self.p_attr_given_task)

    @property
    def defined_task_given_attr(self) -> np.ndarray:
        return ~np.isnan(self.p_task_given_attr)

    @classmethod
    def from_stats(cls, stats: CorrelationStats, source=BaseSource.EMPIRICAL_TRAIN,
                   description: str = "", attribute_names=(), task_names=()) -> "BaseCorrelations":
        return cls(
            stats.p_attr, stats.p_task, stats.p_joint,
            stats.p_attr_given_task, stats.p_task_given_attr,
            source, description, tuple(attribute_names), tuple(task_names),
        )

    @classmethod
    def from_dataset(cls, dataset: IndicatorDataset, source=BaseSource.EMPIRICAL_TRAIN,
                     description: str = "") -> "BaseCorrelations":
        return cls.from_stats(
            dataset_stats(dataset), source, description,
            dataset.attribute_names, dataset.task_names,
        )

    @classmethod
    def from_probabilities(cls, p_attr, p_task, p_joint=None, p_attr_given_task=None,
                           p_task_given_attr=None, source=BaseSource.USER_SUPPLIED,
                           description: str = "", attribute_names=(), task_names=(),
                           tol: float = EPS_NUM) -> "BaseCorrelations":
        """Complete a partially specified set of base probabilities.

        Marginals are required. Any one of the joint matrix or the two
        conditional matrices determines the others; when more than one is
        given they must agree within ``tol``.
        """
        p_attr = np.asarray(p_attr, dtype=float).reshape(-1)
        p_task = np.asarray(p_task, dtype=float).reshape(-1)
        shape = (p_attr.shape[0], p_task.shape[0])

        candidates = []
        if p_joint is not None:
            candidates.append(("p_joint", np.asarray(p_joint, dtype=float).reshape(shape)))
        if p_attr_given_task is not None:
            cond = np.asarray(p_attr_given_task, dtype=float).reshape(shape)
            candidates.append(("p_attr_given_task", cond * p_task[None, :]))
        if p_task_given_attr is not None:
            cond = np.asarray(p_task_given_attr, dtype=float).reshape(shape)
            candidates.append(("p_task_given_attr", cond * p_attr[:, None]))
        if not candidates:
            raise ValueError("supply p_joint or at least one conditional matrix")
        ref_name, joint = candidates[0]
        for name, other in candidates[1:]:
            gap = np.nanmax(np.abs(other - joint))
            if gap > tol:
                raise ValueError(
                    f"{name} is inconsistent with {ref_name}: implied joint differs by {gap:.3g}"
                )

        a_given_t, _ = _safe_divide(joint, np.broadcast_to(p_task[None, :], shape))
        t_given_a, _ = _safe_divide(joint, np.broadcast_to(p_attr[:, None], shape))
        # keep supplied conditionals verbatim so tiny tilts survive the round trip
        if p_attr_given_task is not None:
            given = np.asarray(p_attr_given_task, dtype=float).reshape(shape)
            a_given_t = np.where(p_task[None, :] > 0, given, np.nan)
        if p_task_given_attr is not None:
            given = np.asarray(p_task_given_attr, dtype=float).reshape(shape)
            t_given_a = np.where(p_attr[:, None] > 0, given, np.nan)
        return cls(p_attr, p_task, joint, a_given_t, t_given_a, source, description,
                   tuple(attribute_names), tuple(task_names))
