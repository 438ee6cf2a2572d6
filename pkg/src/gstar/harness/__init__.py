"""Experiment configuration, synthetic instances, the audit runner and reports."""

from .config import ALGORITHMS, CONFIG_SCHEMA, INSTANCE_KINDS, AlgorithmSpec, ConfigError, ExperimentConfig, load_config, parse_config
from .instances import Instance, build_instance, fixtures, generate_ce_instance, generate_lp_instance
from .report import COLUMNS, SCHEMA_VERSION, AggregateAudit, ExperimentReport, ReportRow, emit_report, load_report, report_csv, report_json
from .runner import TraceAudit, audit_trace, run_cell, run_experiment, thread_cap

__all__ = [
    "ALGORITHMS", "CONFIG_SCHEMA", "INSTANCE_KINDS", "AlgorithmSpec", "ConfigError", "ExperimentConfig",
    "load_config", "parse_config", "Instance", "build_instance", "fixtures", "generate_ce_instance",
    "generate_lp_instance", "COLUMNS", "SCHEMA_VERSION", "AggregateAudit", "ExperimentReport", "ReportRow",
    "emit_report", "load_report", "report_csv", "report_json", "TraceAudit", "audit_trace", "run_cell",
    "run_experiment", "thread_cap",
]
