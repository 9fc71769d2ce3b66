"""
biodelay Config Package

Run-configuration fields and schema.
"""

from .fields import ValidationError
from .schema import RunConfig, config_hash, load_run_config

__all__ = ["RunConfig", "ValidationError", "config_hash", "load_run_config"]
