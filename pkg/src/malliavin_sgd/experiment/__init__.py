"""Convergence studies: configuration, execution, reporting."""

from .config import ExperimentConfig, MethodConfig, ScheduleBand, StrikeBand, load_config, parse_config, to_ini
from .report import emit, read_aggregate_csv, read_trials_csv
from .study import (
    ConvergenceReport,
    ErrorSeries,
    FitResult,
    TrialRow,
    aggregate_rows,
    compute_references,
    derive_seed,
    error_metric,
    fit_order,
    run_study,
)
