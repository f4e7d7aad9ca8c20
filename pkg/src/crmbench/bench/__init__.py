"""Benchmark harness: datasets, suite runs, metrics, scaling fits, reports."""

from .dataset import CATEGORIES, QueryRecord, dataset_hash, load_dataset
from .metrics import (
    HumanVerdict,
    MetricsReport,
    brute_force_reliability,
    compute_metrics,
    load_verdicts,
    percent,
    reliability_percent,
)
from .runner import RunCell, RunMatrix, load_run_dir, run_suite
from .scaling import ScalingFit, fit_scaling, growth_percent
from .report import emit_report, write_report_files
from .figures import render_figures

__all__ = [
    "CATEGORIES",
    "QueryRecord",
    "dataset_hash",
    "load_dataset",
    "HumanVerdict",
    "MetricsReport",
    "brute_force_reliability",
    "compute_metrics",
    "load_verdicts",
    "percent",
    "reliability_percent",
    "RunCell",
    "RunMatrix",
    "load_run_dir",
    "run_suite",
    "ScalingFit",
    "fit_scaling",
    "growth_percent",
    "emit_report",
    "write_report_files",
    "render_figures",
]
