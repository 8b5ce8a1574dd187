"""Equation-free forecasting of multivariate wave-encounter records.

Fits a best-fit linear operator between successive snapshots of a measured
record (optionally augmented with time derivatives and delayed copies),
extracts its modes and continuous frequencies, clamps growing modes, and
forecasts future states from the modal expansion.  A statistical harness
sweeps the full factorial of window lengths and augmentations over randomly
sampled windows and reports metric distributions, best setups, and modal
statistics.
"""

__version__ = "0.1.0"

from .augmentation import AugmentationSpec, SnapshotPair, build_snapshots, derivative, hankel_shifts
from .dmd import (
    DmdModel,
    amplitudes,
    eigendecompose,
    fit,
    fit_model,
    forecast,
    load_model,
    one_step_matrix_forecast,
    save_model,
    stabilize,
)
from .errors import WavedmdError
from .experiment import BoxSummary, ExperimentConfig, ExperimentReport, best_setup, run
from .metrics import MetricReport, aam, evaluate, nammae, nrmse, pearson
from .modal import ModeStatistics, aggregate, participation, sort_modes
from .synthetic import generate
from .timeseries import (
    StandardizationRecord,
    TimeSeries,
    WindowSpec,
    destandardize,
    extract_window,
    read_csv,
    sample_windows,
    standardize,
    write_csv,
)

__all__ = [
    "AugmentationSpec",
    "BoxSummary",
    "DmdModel",
    "ExperimentConfig",
    "ExperimentReport",
    "MetricReport",
    "ModeStatistics",
    "SnapshotPair",
    "StandardizationRecord",
    "TimeSeries",
    "WavedmdError",
    "WindowSpec",
    "aam",
    "aggregate",
    "amplitudes",
    "best_setup",
    "build_snapshots",
    "derivative",
    "destandardize",
    "eigendecompose",
    "evaluate",
    "extract_window",
    "fit",
    "fit_model",
    "forecast",
    "generate",
    "hankel_shifts",
    "load_model",
    "nammae",
    "nrmse",
    "one_step_matrix_forecast",
    "participation",
    "pearson",
    "read_csv",
    "run",
    "sample_windows",
    "save_model",
    "sort_modes",
    "stabilize",
    "standardize",
    "write_csv",
]
