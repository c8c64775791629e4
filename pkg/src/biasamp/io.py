"""Reading prediction tables and base correlations, writing reports.

Tables are delimiter-separated text with a header row. Each column name
carries a prefix saying what it holds::

    attr:<name>        ground-truth attribute indicator
    task:<name>        ground-truth task indicator
    pred_attr:<name>   predicted attribute (0/1 or probability)
    pred_task:<name>   predicted task (0/1 or probability)
    score_task:<name>  raw task score, to be thresholded
    weight             optional non-negative example weight

Base correlations and reports are JSON documents.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import EPS_NUM, BaseCorrelations, BaseSource, IndicatorDataset, PredictionSet

FORMAT_VERSION = "1.0"
PREFIXES = ("attr", "task", "pred_attr", "pred_task", "score_task")


class TableError(ValueError):
    """Malformed input table; the message names the file, row and column."""


@dataclass
class LoadedTable:
    path: str
    columns: list
    n_rows: int
    dataset: Optional[IndicatorDataset] = None
    predictions: Optional[PredictionSet] = None
    task_scores: Optional[np.ndarray] = None
    names: dict = field(default_factory=dict)
    weights: Optional[np.ndarray] = None

    def fingerprint(self) -> dict:
        digest = hashlib.sha256(Path(self.path).read_bytes()).hexdigest()[:16]
        return {"path": self.path, "n_rows": self.n_rows, "columns": self.columns, "sha256_16": digest}


def _sniff_delimiter(header: str) -> str:
    if "\t" in header:
        return "\t"
    if ";" in header and "," not in header:
        return ";"
    return ","


def load_table(path, schema=None) -> LoadedTable:
    """Parse a prefixed-column table.

    ``schema`` optionally lists prefix families that must be present, e.g.
    ``{"attr", "task"}``.
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TableError(f"{path}: missing header row")
    delim = _sniff_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip() for h in next(reader)]

    families = {p: [] for p in PREFIXES}
    weight_col = None
    for j, col in enumerate(header):
        if col == "weight":
            if weight_col is not None:
                raise TableError(f"{path}: duplicate 'weight' column")
            weight_col = j
            continue
        prefix, sep, name = col.partition(":")
        if not sep or prefix not in families:
            raise TableError(f"{path}: column {j + 1} {col!r} has unknown prefix; expected one of {PREFIXES} or 'weight'")
        if not name:
            raise TableError(f"{path}: column {j + 1} {col!r} has an empty name")
        if name in [n for n, _ in families[prefix]]:
            raise TableError(f"{path}: duplicate column {col!r}")
        families[prefix].append((name, j))

    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise TableError(f"{path}: line {line_no} has {len(row)} fields, header has {len(header)}")
        parsed = []
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise TableError(f"{path}: line {line_no}, column {header[j]!r}: {cell!r} is not a number") from None
            if not math.isfinite(v):
                raise TableError(f"{path}: line {line_no}, column {header[j]!r}: non-finite value")
            if j == weight_col:
                if v < 0:
                    raise TableError(f"{path}: line {line_no}, column 'weight': negative weight {v}")
            elif not 0.0 <= v <= 1.0:
                raise TableError(f"{path}: line {line_no}, column {header[j]!r}: {v} outside [0, 1]")
            parsed.append(v)
        rows.append(parsed)
    if not rows:
        raise TableError(f"{path}: no data rows (empty dataset)")
    data = np.array(rows, dtype=float)

    if schema:
        missing = [p for p in schema if not (families.get(p) or (p == "weight" and weight_col is not None))]
        if missing:
            raise TableError(f"{path}: required column families missing: {missing}")

    def block(prefix):
        cols = families[prefix]
        if not cols:
            return None, ()
        return data[:, [j for _, j in cols]], tuple(n for n, _ in cols)

    attr, attr_names = block("attr")
    task, task_names = block("task")
    pattr, pattr_names = block("pred_attr")
    ptask, ptask_names = block("pred_task")
    scores, score_names = block("score_task")
    weights = None if weight_col is None else data[:, weight_col]

    table = LoadedTable(path, header, data.shape[0], weights=weights,
                        names={"attr": attr_names, "task": task_names, "pred_attr": pattr_names,
                               "pred_task": ptask_names, "score_task": score_names})
    if (attr is None) != (task is None):
        raise TableError(f"{path}: ground truth needs both attr: and task: columns")
    if attr is not None:
        try:
            table.dataset = IndicatorDataset(attr, task, attr_names, task_names, weights)
        except ValueError as exc:
            raise TableError(f"{path}: {exc}") from None
    if pattr is not None or ptask is not None:
        table.predictions = PredictionSet(pattr, ptask)
    table.task_scores = scores
    return table


def _reorder(matrix, have: tuple, want: tuple, what: str, where: str):
    if matrix is None:
        return None
    if set(have) != set(want) or len(have) != len(want):
        raise TableError(f"{where}: {what} columns {list(have)} do not match ground-truth names {list(want)}")
    return matrix[:, [have.index(n) for n in want]]


def join_predictions(truth: LoadedTable, preds: LoadedTable) -> PredictionSet:
    """Align a prediction table with a ground-truth table by column name."""
    if truth.dataset is None:
        raise TableError(f"{truth.path}: no ground-truth columns")
    if preds.predictions is None:
        raise TableError(f"{preds.path}: no pred_attr:/pred_task: columns")
    if truth.n_rows != preds.n_rows:
        raise TableError(f"row count mismatch: {truth.path} has {truth.n_rows}, {preds.path} has {preds.n_rows}")
    ds = truth.dataset
    p = preds.predictions
    return PredictionSet(
        _reorder(p.attr_pred, preds.names["pred_attr"], ds.attribute_names, "pred_attr", preds.path),
        _reorder(p.task_pred, preds.names["pred_task"], ds.task_names, "pred_task", preds.path),
        p.kind,
    )


def aligned_scores(truth: LoadedTable, scores: LoadedTable) -> np.ndarray:
    if scores.task_scores is None:
        raise TableError(f"{scores.path}: no score_task: columns")
    if truth.n_rows != scores.n_rows:
        raise TableError(f"row count mismatch: {truth.path} has {truth.n_rows}, {scores.path} has {scores.n_rows}")
    return _reorder(scores.task_scores, scores.names["score_task"], truth.dataset.task_names,
                    "score_task", scores.path)


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    if v == 1.0:
        return "1"
    return repr(v)


def write_table(path, dataset: Optional[IndicatorDataset] = None, predictions: Optional[PredictionSet] = None,
                task_scores=None, attribute_names=None, task_names=None) -> None:
    """Write a table in the format :func:`load_table` reads (floats round-trip exactly)."""
    cols, header = [], []
    if dataset is not None:
        attribute_names = attribute_names or dataset.attribute_names
        task_names = task_names or dataset.task_names
        cols += [dataset.attr_matrix, dataset.task_matrix]
        header += [f"attr:{n}" for n in dataset.attribute_names] + [f"task:{n}" for n in dataset.task_names]
    if predictions is not None:
        if predictions.attr_pred is not None:
            names = attribute_names or [f"A{i}" for i in range(predictions.attr_pred.shape[1])]
            cols.append(predictions.attr_pred)
            header += [f"pred_attr:{n}" for n in names]
        if predictions.task_pred is not None:
            names = task_names or [f"T{i}" for i in range(predictions.task_pred.shape[1])]
            cols.append(predictions.task_pred)
            header += [f"pred_task:{n}" for n in names]
    if task_scores is not None:
        s = np.asarray(task_scores, dtype=float)
        s = s[:, None] if s.ndim == 1 else s
        names = task_names or [f"T{i}" for i in range(s.shape[1])]
        cols.append(s)
        header += [f"score_task:{n}" for n in names]
    if dataset is not None and dataset.example_weights is not None:
        cols.append(dataset.example_weights[:, None])
        header.append("weight")
    if not cols:
        raise ValueError("nothing to write")
    data = np.hstack(cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in data:
            w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# base correlations


def _matrix_or_none(doc, key):
    if key not in doc or doc[key] is None:
        return None
    return np.array([[np.nan if v is None else v for v in row] for row in doc[key]], dtype=float)


def base_from_dict(doc: dict, tol: float = EPS_NUM) -> BaseCorrelations:
    for key in ("p_attr", "p_task"):
        if key not in doc:
            raise ValueError(f"base correlations need {key!r}")
    p_attr = np.asarray(doc["p_attr"], dtype=float)
    p_task = np.asarray(doc["p_task"], dtype=float)
    for key, arr in (("p_attr", p_attr), ("p_task", p_task)):
        if np.any(arr < 0) or np.any(arr > 1):
            raise ValueError(f"{key} has probabilities outside [0, 1]")
    joint = _matrix_or_none(doc, "p_joint")
    a_t = _matrix_or_none(doc, "p_attr_given_task")
    t_a = _matrix_or_none(doc, "p_task_given_attr")
    for key, arr in (("p_joint", joint), ("p_attr_given_task", a_t), ("p_task_given_attr", t_a)):
        if arr is not None:
            finite = arr[np.isfinite(arr)]
            if finite.size and (finite.min() < 0 or finite.max() > 1):
                raise ValueError(f"{key} has probabilities outside [0, 1]")
    if joint is not None:
        hi = np.minimum.outer(p_attr, p_task)
        lo = np.maximum(np.add.outer(p_attr, p_task) - 1.0, 0.0)
        if np.any(joint > hi + tol) or np.any(joint < lo - tol):
            raise ValueError("p_joint is inconsistent with the marginals")
    return BaseCorrelations.from_probabilities(
        p_attr, p_task, joint, a_t, t_a,
        source=doc.get("source", BaseSource.USER_SUPPLIED.value),
        description=doc.get("description", ""),
        attribute_names=tuple(doc.get("attribute_names", ())),
        task_names=tuple(doc.get("task_names", ())),
        tol=tol,
    )


def load_base_correlations(path) -> BaseCorrelations:
    """Read a JSON base-correlation document.

    Required: ``p_attr``, ``p_task`` and at least one of ``p_joint``,
    ``p_attr_given_task``, ``p_task_given_attr``. Missing pieces are derived;
    over-specified documents must be consistent within 1e-9.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return base_from_dict(doc)
    except ValueError as exc:
        raise TableError(f"{path}: {exc}") from None


def base_to_dict(base: BaseCorrelations) -> dict:
    def mat(m):
        return [[None if not np.isfinite(v) else float(v) for v in row] for row in m]

    return {
        "source": base.source.value,
        "description": base.description,
        "attribute_names": list(base.attribute_names),
        "task_names": list(base.task_names),
        "p_attr": [float(v) for v in base.p_attr],
        "p_task": [float(v) for v in base.p_task],
        "p_joint": mat(base.p_joint),
        "p_attr_given_task": mat(base.p_attr_given_task),
        "p_task_given_attr": mat(base.p_task_given_attr),
    }


def save_base_correlations(base: BaseCorrelations, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(base_to_dict(base), fh, indent=2)


# ---------------------------------------------------------------------------
# scenario bundles


def export_bundle(bundle, directory) -> dict:
    """Write ``train.csv``, ``test.csv`` and ``expected.json`` for a bundle."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_table(d / "train.csv", bundle.train)
    write_table(d / "test.csv", bundle.test_truth, bundle.test_preds)
    meta = {
        "format_version": FORMAT_VERSION,
        "name": bundle.name,
        "description": bundle.description,
        "expected": {k: {"value": e.value, "tolerance": e.tolerance, "provenance": e.provenance}
                     for k, e in bundle.expected.items()},
    }
    (d / "expected.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    return {"train": str(d / "train.csv"), "test": str(d / "test.csv"), "expected": str(d / "expected.json")}


def load_bundle(directory):
    from .scenarios import Expectation, ScenarioBundle

    d = Path(directory)
    train = load_table(d / "train.csv", {"attr", "task"})
    test = load_table(d / "test.csv", {"attr", "task"})
    meta = json.loads((d / "expected.json").read_text(encoding="utf-8"))
    return ScenarioBundle(
        meta["name"], train.dataset, test.dataset, join_predictions(test, test), meta["description"],
        {k: Expectation(**v) for k, v in meta["expected"].items()},
    )


# ---------------------------------------------------------------------------
# reports


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if hasattr(obj, "value") and not isinstance(obj, (int, str)):
        return obj.value
    return obj


@dataclass
class ReportDocument:
    command: str
    config: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    intervals: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable({
            "format_version": FORMAT_VERSION,
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "results": self.results,
            "intervals": self.intervals,
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
