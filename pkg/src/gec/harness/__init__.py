"""Experiment harness: configs, batch runs, invariant suites and reports."""
from .checks import SUITES, SuiteReport, Verdict, check_suite
from .config import ExperimentConfig, load_config, parse_config
from .report import load_records, report, summary_text
from .runner import run_experiment, run_seed
