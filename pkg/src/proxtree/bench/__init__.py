"""Benchmark harness: datasets, quality measures, experiment sweeps and the ``bench`` CLI."""
from .data import DataError, format_csv, generate, ingest_csv, jl_project, write_csv
from .experiment import (
    BENCH_FORMAT,
    ConfigError,
    ExperimentConfig,
    ResultRow,
    load_config,
    parse_config,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    write_results,
)
from .metrics import rank_ratio, recall_at_k, true_ranks
