"""Bias amplification and group-fairness metrics for classifier outputs."""

from .core import (
    BaseCorrelations,
    BaseSource,
    CorrelationStats,
    IndicatorDataset,
    PredictionKind,
    PredictionSet,
    compute_stats,
    dataset_stats,
    independence_gap,
)
from .metrics import (
    BiasAmpResult,
    DeltaBaseline,
    Direction,
    MetricConfig,
    MetricKind,
    MetricSpec,
    UndefinedMetricError,
    UndefinedPolicy,
    accuracy_difference,
    biasamp_directional,
    biasamp_mals,
    delta_pair,
    evaluate_metric,
    fpr_difference,
    mean_subgroup_accuracy,
    tpr_difference,
)
from .calibration import (
    SweepCurve,
    ThresholdChoice,
    apply_threshold,
    calibrate_columns,
    calibrate_threshold,
    threshold_sweep,
)
from .resampling import (
    DegradedEstimateError,
    IntervalEstimate,
    IntervalMethod,
    bootstrap_ci,
    intervals_overlap,
    multirun_ci,
    replicate_weights,
)
from .oracle import counting_oracle

__version__ = "0.1.0"
