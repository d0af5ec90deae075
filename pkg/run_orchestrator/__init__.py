"""
InvarLab - Run Orchestrator Module
Config loading, check execution, report writing and the built-in property suites
"""

__version__ = '1.0.0'

from .run_config import ConfigError, RunConfig, load_default_tolerances, config_digest, CHECK_NAMES
from .check_runner import CheckRunner, run_check_command, dump_report, atomic_write, EXIT_CONFIG_ERROR
from .ops_verifier import OpsVerifier, SUITE_NAMES

__all__ = [
    'RunConfig',
    'CheckRunner',
    'OpsVerifier',
    'ConfigError',
    'load_default_tolerances',
    'config_digest',
    'run_check_command',
    'dump_report',
    'atomic_write',
    'CHECK_NAMES',
    'SUITE_NAMES',
    'EXIT_CONFIG_ERROR',
]
