"""
biodelay CLI Commands Package

Contains all CLI command implementations.
"""

from . import fit, regions, simulate, stability

__all__ = [
    "fit",
    "regions",
    "simulate",
    "stability",
]
