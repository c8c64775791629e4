"""Command-line entry point: ``biasamp <subcommand> ...``.

A JSON report goes to stdout (or ``--out``); a short human summary goes to
stderr. Exit codes: 0 success, 2 bad input, 3 a scenario expectation or
oracle check failed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .calibration import apply_threshold, calibrate_columns, threshold_sweep
from .core import BaseCorrelations, BaseSource, PredictionSet, dataset_stats, independence_gap
from .metrics import (
    CLASSIC_METRICS,
    Direction,
    MetricConfig,
    MetricSpec,
    UndefinedMetricError,
    biasamp_directional,
    biasamp_mals,
)
from .resampling import DegradedEstimateError, bootstrap_ci
from .scenarios import SCENARIOS, differential_check, evaluate_bundle, fig2_sweep

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EXPECTATION = 3
SEED_ENV = "BIASAMP_SEED"

TA_CAUTION = (
    "T->A amplification requires predicting a sensitive attribute. Consider whether the "
    "application needs attribute prediction at all; dropping it removes T->A amplification."
)


class InputError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _config(args) -> MetricConfig:
    return MetricConfig(
        undefined_policy=args.undefined_policy,
        tie_epsilon=args.tie_epsilon,
        delta_baseline=args.delta_baseline,
    )


def _add_metric_config(p):
    p.add_argument("--undefined-policy", default="skip_and_renormalize",
                   choices=["skip_and_renormalize", "propagate_nan", "error"])
    p.add_argument("--delta-baseline", default="test_ground_truth",
                   choices=["test_ground_truth", "base_correlations"])
    p.add_argument("--tie-epsilon", type=float, default=0.0)


def _add_base(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--train", help="training table (attr:/task: columns); base correlations are its statistics")
    g.add_argument("--base-correlations", help="JSON base-correlation document")


def _add_test(p, truth_required=True):
    p.add_argument("--test-truth", required=truth_required, help="test table with attr:/task: columns")
    p.add_argument("--test-pred", help="table with pred_attr:/pred_task: columns (default: --test-truth)")


def _load_base(args, report, truth_table=None) -> BaseCorrelations:
    if getattr(args, "base_correlations", None):
        base = bio.load_base_correlations(args.base_correlations)
        report.inputs.append({"base_correlations": args.base_correlations})
    elif getattr(args, "train", None):
        table = bio.load_table(args.train, {"attr", "task"})
        report.inputs.append(table.fingerprint())
        base = BaseCorrelations.from_dataset(table.dataset, BaseSource.EMPIRICAL_TRAIN, f"statistics of {args.train}")
    elif truth_table is not None:
        base = BaseCorrelations.from_dataset(truth_table.dataset, BaseSource.EMPIRICAL_TEST,
                                             f"statistics of {truth_table.path} (no training data given)")
        report.notes.append("no --train or --base-correlations: base correlations taken from the test ground truth")
    else:
        raise InputError("need --train or --base-correlations")
    report.config["base_source"] = base.source.value
    report.notes.append(f"base correlations: {base.source.value}" + (f" ({base.description})" if base.description else ""))
    return base


def _load_test(args, report, require_truth=True):
    truth = None
    if args.test_truth:
        truth = bio.load_table(args.test_truth, {"attr", "task"} if require_truth else None)
        report.inputs.append(truth.fingerprint())
        if truth.dataset is not None and truth.dataset.has_soft_attributes:
            report.notes.append("ground-truth attributes are soft (not 0/1); interpret with care")
    pred_path = args.test_pred or args.test_truth
    if pred_path is None:
        raise InputError("need --test-pred")
    pred_table = truth if pred_path == args.test_truth else bio.load_table(pred_path)
    if pred_table is not truth:
        report.inputs.append(pred_table.fingerprint())
    if truth is not None and truth.dataset is not None:
        preds = bio.join_predictions(truth, pred_table)
    else:
        if pred_table.predictions is None:
            raise InputError(f"{pred_path}: no prediction columns")
        preds = pred_table.predictions
    return truth, preds


def _check_ta_ack(args, report):
    if not args.acknowledge_attribute_prediction:
        raise InputError("T->A needs --acknowledge-attribute-prediction (it evaluates sensitive-attribute predictions)")
    report.notes.append(TA_CAUTION)


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(args, report):
    table = bio.load_table(args.data, {"attr", "task"})
    report.inputs.append(table.fingerprint())
    ds = table.dataset
    st = dataset_stats(ds)
    report.results["stats"] = {
        "attribute_names": ds.attribute_names,
        "task_names": ds.task_names,
        "n_examples": ds.n_examples,
        "total_weight": st.total_weight,
        "p_attr": st.p_attr,
        "p_task": st.p_task,
        "p_joint": st.p_joint,
        "p_attr_given_task": st.p_attr_given_task,
        "p_task_given_attr": st.p_task_given_attr,
        "defined_attr_given_task": st.defined_attr_given_task,
        "defined_task_given_attr": st.defined_task_given_attr,
        "independence_gap": independence_gap(st),
    }
    if ds.has_soft_attributes:
        report.notes.append("ground-truth attributes are soft (not 0/1); interpret with care")
    return f"{ds.n_examples} examples, {ds.n_attributes} attributes, {ds.n_tasks} tasks"


def cmd_biasamp(args, report):
    cfg = _config(args)
    report.config.update(cfg.to_dict())
    report.config["metric"] = args.metric
    if args.metric == "mals":
        truth, preds = _load_test(args, report, require_truth=False)
        base = _load_base(args, report, truth if truth and truth.dataset is not None else None)
        res = biasamp_mals(base, preds, cfg)
    else:
        if args.metric == "ta":
            _check_ta_ack(args, report)
        truth, preds = _load_test(args, report)
        base = _load_base(args, report, truth)
        direction = Direction.A_TO_T if args.metric == "at" else Direction.T_TO_A
        res = biasamp_directional(direction, base, truth.dataset, preds, cfg)
    report.results[args.metric] = res
    return f"{args.metric}: {res.aggregate:.6g} (normalization {res.normalization:g})"


def cmd_classic(args, report):
    cfg = _config(args)
    report.config.update(cfg.to_dict())
    truth, preds = _load_test(args, report)
    names = args.metrics.split(",") if args.metrics else list(CLASSIC_METRICS)
    task = _index_or_name(args.task)
    ga, gb = _index_or_name(args.group_a), _index_or_name(args.group_b)
    report.config.update({"task": args.task, "group_a": args.group_a, "group_b": args.group_b})
    lines = []
    for name in names:
        if name not in CLASSIC_METRICS:
            raise InputError(f"unknown classic metric {name!r}")
        value = CLASSIC_METRICS[name](truth.dataset, preds, task, ga, gb, cfg)
        report.results[name] = value
        lines.append(f"{name}: {value:.6g}")
    return "; ".join(lines)


def cmd_calibrate(args, report):
    table = bio.load_table(args.scores)
    report.inputs.append(table.fingerprint())
    if table.task_scores is None:
        raise InputError(f"{args.scores}: no score_task: columns")
    names = table.names["score_task"]
    if args.target_rate is not None:
        rates = np.full(len(names), args.target_rate)
        report.config["target_rate"] = args.target_rate
    elif args.train:
        train = bio.load_table(args.train, {"attr", "task"})
        report.inputs.append(train.fingerprint())
        tnames = train.dataset.task_names
        missing = [n for n in names if n not in tnames]
        if missing:
            raise InputError(f"training table lacks tasks {missing}")
        p_task = dataset_stats(train.dataset).p_task
        rates = np.array([p_task[tnames.index(n)] for n in names])
        report.notes.append("target rates are training-set positive rates per task")
    else:
        raise InputError("need --target-rate or --train")
    choices = calibrate_columns(table.task_scores, rates)
    report.results["thresholds"] = {n: c for n, c in zip(names, choices)}
    if args.apply_out:
        preds = apply_threshold(table.task_scores, [c.threshold for c in choices])
        bio.write_table(args.apply_out, predictions=PredictionSet(task_pred=preds), task_names=names)
        report.notes.append(f"thresholded predictions written to {args.apply_out}")
    return "; ".join(f"{n}: threshold {c.threshold:.6g} rate {c.achieved_rate:.4g}" for n, c in zip(names, choices))


def _parse_grid(text: str) -> np.ndarray:
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise InputError("--grid start:stop:step needs a positive step")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)
    return np.array([float(v) for v in text.split(",")])


def cmd_sweep(args, report):
    cfg = _config(args)
    report.config.update(cfg.to_dict())
    truth = bio.load_table(args.test_truth, {"attr", "task"})
    report.inputs.append(truth.fingerprint())
    score_table = truth if not args.scores else bio.load_table(args.scores)
    if score_table is not truth:
        report.inputs.append(score_table.fingerprint())
    scores = bio.aligned_scores(truth, score_table)
    attr_pred = None
    if args.test_pred:
        ptable = bio.load_table(args.test_pred)
        report.inputs.append(ptable.fingerprint())
        attr_pred = bio.join_predictions(truth, ptable).attr_pred
    metrics = args.metrics.split(",")
    if "ta" in metrics:
        _check_ta_ack(args, report)
    base = _load_base(args, report, truth)
    grid = _parse_grid(args.grid)
    report.config.update({"grid": grid, "metrics": metrics})
    curve = threshold_sweep(truth.dataset, scores, base, grid, metrics, cfg, attr_pred=attr_pred)
    report.results["sweep"] = curve
    return "; ".join(f"{k}: integral {v:.6g}" for k, v in curve.integral_per_metric.items())


def cmd_bootstrap(args, report):
    cfg = _config(args)
    seed = args.seed if args.seed is not None else _default_seed()
    report.config.update(cfg.to_dict())
    report.config.update({"metric": args.metric, "n_boot": args.n_boot, "confidence": args.confidence, "seed": seed})
    if args.metric == "ta":
        _check_ta_ack(args, report)
    truth, preds = _load_test(args, report)
    base = _load_base(args, report, truth)
    spec = MetricSpec(args.metric, task=_index_or_name(args.task),
                      group_a=_index_or_name(args.group_a), group_b=_index_or_name(args.group_b))
    est = bootstrap_ci(truth.dataset, preds, base, spec, args.n_boot, args.confidence, seed, cfg)
    report.intervals[args.metric] = est
    report.notes.append("interval method: percentile bootstrap over test examples, base correlations fixed")
    return f"{args.metric}: {est.point:.6g} [{est.lower:.6g}, {est.upper:.6g}] ({args.confidence:g} bootstrap)"


def cmd_scenario(args, report):
    if args.name == "list":
        report.results["scenarios"] = sorted(SCENARIOS) + ["painting-sweep"]
        return ", ".join(report.results["scenarios"])
    cfg = _config(args)
    report.config.update(cfg.to_dict())
    if args.name == "painting-sweep":
        table = fig2_sweep(cfg=cfg)
        report.results["painting-sweep"] = table
        return "painting sweep over x = 0, 1/40, ..., 1"
    if args.name not in SCENARIOS:
        raise InputError(f"unknown scenario {args.name!r}; try 'scenario list'")
    bundle = SCENARIOS[args.name]()
    checks = evaluate_bundle(bundle, cfg)
    report.results["scenario"] = {"name": bundle.name, "description": bundle.description, "checks": checks}
    report.results["metrics"] = {
        "mals": biasamp_mals(bundle.base, bundle.test_preds, cfg),
        "at": biasamp_directional("A_to_T", bundle.base, bundle.test_truth, bundle.test_preds, cfg),
        "ta": biasamp_directional("T_to_A", bundle.base, bundle.test_truth, bundle.test_preds, cfg),
    }
    if args.export:
        report.results["exported"] = bio.export_bundle(bundle, args.export)
    summary = "; ".join(
        f"{k} {v['value']:.4f} (expected {v['expected']:.4f}) {'ok' if v['ok'] else 'FAIL'}"
        for k, v in checks.items()
    )
    code = EXIT_OK if all(v["ok"] for v in checks.values()) else EXIT_EXPECTATION
    return f"{bundle.name}: {summary}", code


def cmd_oracle_check(args, report):
    cfg = _config(args)
    seed = args.seed if args.seed is not None else _default_seed()
    report.config.update(cfg.to_dict())
    report.config.update({"n": args.n, "seed": seed})
    result = differential_check(args.n, seed, cfg=cfg)
    report.results["oracle_check"] = result
    code = EXIT_OK if result["passed"] else EXIT_EXPECTATION
    return f"{result['checks']} checks, {len(result['failures'])} failures", code


def _index_or_name(value):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        return value


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasamp", description=__doc__.splitlines()[0])
    parser.add_argument("--out", help="write the JSON report here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="marginal, joint and conditional probabilities of a table")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("biasamp", help="bias amplification (mals, at or ta)")
    p.add_argument("--metric", choices=["mals", "at", "ta"], default="at")
    _add_base(p)
    _add_test(p, truth_required=False)
    _add_metric_config(p)
    p.add_argument("--acknowledge-attribute-prediction", action="store_true")
    p.set_defaults(func=cmd_biasamp)

    p = sub.add_parser("classic", help="FPR/TPR/accuracy differences and mean subgroup accuracy")
    _add_test(p)
    p.add_argument("--metrics", help="comma-separated subset of " + ",".join(CLASSIC_METRICS))
    p.add_argument("--task", default="0")
    p.add_argument("--group-a", default="0")
    p.add_argument("--group-b", default="1")
    _add_metric_config(p)
    p.set_defaults(func=cmd_classic)

    p = sub.add_parser("calibrate", help="thresholds matching target positive rates")
    p.add_argument("--scores", required=True, help="table with score_task: columns")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--target-rate", type=float)
    g.add_argument("--train", help="estimate per-task target rates from this training table")
    p.add_argument("--apply-out", help="also write thresholded pred_task: columns to this file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="metrics as a function of the decision threshold")
    _add_base(p)
    p.add_argument("--test-truth", required=True)
    p.add_argument("--scores", help="table with score_task: columns (default: --test-truth)")
    p.add_argument("--test-pred", help="table with pred_attr: columns, for mals/ta")
    p.add_argument("--grid", default="0.05:0.95:0.05", help="start:stop:step or comma list")
    p.add_argument("--metrics", default="at,fpr_difference")
    p.add_argument("--acknowledge-attribute-prediction", action="store_true")
    _add_metric_config(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bootstrap", help="percentile bootstrap interval for one metric")
    p.add_argument("--metric", default="at", choices=["mals", "at", "ta", *CLASSIC_METRICS])
    _add_base(p)
    _add_test(p)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--task", default="0")
    p.add_argument("--group-a", default="0")
    p.add_argument("--group-b", default="1")
    p.add_argument("--acknowledge-attribute-prediction", action="store_true")
    _add_metric_config(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("scenario", help="run a built-in worked example ('list' to enumerate)")
    p.add_argument("name")
    p.add_argument("--export", help="directory to write the bundle's tables into")
    _add_metric_config(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("oracle-check", help="randomized comparison against the counting oracle")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
    _add_metric_config(p)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT

    report = bio.ReportDocument(command=args.command)
    try:
        summary = args.func(args, report)
    except (InputError, bio.TableError, UndefinedMetricError, DegradedEstimateError,
            ValueError, KeyError, IndexError, OSError) as exc:
        print(f"biasamp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    code = EXIT_OK
    if isinstance(summary, tuple):
        summary, code = summary
    print(summary, file=sys.stderr)
    return code


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
