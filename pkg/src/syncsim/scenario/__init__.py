"""Scenario configuration, execution, and reporting."""

from .config import ScenarioConfig, load_config, parse_config, parse_time_ns
from .report import canonical_bytes, report_sha256, write_csv_series, write_report
from .runner import RunResult, builtin_speed_example, builtin_table1, run_scenario

__all__ = [
    "ScenarioConfig",
    "RunResult",
    "builtin_speed_example",
    "builtin_table1",
    "canonical_bytes",
    "load_config",
    "parse_config",
    "parse_time_ns",
    "report_sha256",
    "run_scenario",
    "write_csv_series",
    "write_report",
]
