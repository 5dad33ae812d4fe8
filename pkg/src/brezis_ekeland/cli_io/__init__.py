"""Configuration, run orchestration and serialization for the command line."""

from .config import RunConfig, config_to_dict, parse_config, serialize_config
from .main import main
from .runs import (build_problem, run_check_potential, run_compare, run_solve, run_sweep,
                   sweep_config)

__all__ = ["RunConfig", "build_problem", "config_to_dict", "main", "parse_config",
           "run_check_potential", "run_compare", "run_solve", "run_sweep", "serialize_config",
           "sweep_config"]
