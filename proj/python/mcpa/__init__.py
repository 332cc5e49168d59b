"""Trace-driven critical path analysis for mobile app traffic."""

from _mcpa import (
    McpaError,
    classify_domain,
    compute_tdi,
    compute_tdt,
    cpa_report,
    metrics_file,
    partition_file,
    pvalue_test,
    simulate_report,
    waterfall_file,
)

__all__ = [
    "McpaError",
    "classify_domain",
    "compute_tdi",
    "compute_tdt",
    "cpa_report",
    "metrics_file",
    "partition_file",
    "pvalue_test",
    "simulate_report",
    "waterfall_file",
]
