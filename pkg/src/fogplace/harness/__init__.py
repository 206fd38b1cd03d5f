from .cli import cli, main
from .experiment import (ExperimentConfig, ResultRow, build_network, build_workload, emit_csv, load_config,
                         normalise, run_experiment, summarise, write_sweep)
from .instances import tiny_instance
from .io import read_csv

__all__ = ["ExperimentConfig", "ResultRow", "build_network", "build_workload", "cli", "emit_csv",
           "load_config", "main", "normalise", "read_csv", "run_experiment", "summarise", "tiny_instance",
           "write_sweep"]
