"""
biodelay Output Utilities

Helpers that place command outputs in the output directory and stamp each
file with the metadata block (tool version, configuration hash).
"""

import logging
from pathlib import Path
from typing import Any, Dict, Union

from ... import __version__
from ...config.schema import RunConfig, config_hash
from ...core.export import dumps
from ...core.utils import ensure_directory, write_text_atomic

logger = logging.getLogger(__name__)

TOOL_NAME = "biodelay"


def run_metadata(config: RunConfig) -> Dict[str, Any]:
    """
    Metadata block written into every output.

    Example:
        >>> run_metadata(config)["tool"]
        'biodelay'
    """
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "command": config.command,
        "config_sha256": config_hash(config),
    }


def prepare_output_dir(out_dir: Union[str, Path]) -> Path:
    path = ensure_directory(out_dir)
    logger.info(f"Output directory: {path}")
    return path


def write_json_output(
    out_dir: Path, name: str, payload: Dict[str, Any], metadata: Dict[str, Any]
) -> Path:
    """Write payload with a top-level "metadata" key."""
    document = {"metadata": metadata, **payload}
    return write_text_atomic(out_dir / name, dumps(document))


def write_csv_output(out_dir: Path, name: str, csv_text: str, metadata: Dict[str, Any]) -> Path:
    """Write CSV text behind a single '# ' comment line carrying the metadata."""
    header = (
        f"# {metadata['tool']} {metadata['version']} "
        f"command={metadata['command']} config_sha256={metadata['config_sha256']}\n"
    )
    return write_text_atomic(out_dir / name, header + csv_text)
