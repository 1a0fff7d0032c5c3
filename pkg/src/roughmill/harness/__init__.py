"""Configuration, CSV output, experiment suites and the command line."""
from .config import RunConfig, emit_config, load_run_config, parse_config
from .experiments import SUITES, run_experiment
