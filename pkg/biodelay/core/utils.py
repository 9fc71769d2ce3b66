"""
Text I/O and hashing helpers for biodelay inputs and outputs
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_text(path: PathLike) -> str:
    """
    Read a UTF-8 configuration or data file.

    Raises:
        IOError: If the file is missing or unreadable
    """
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        logger.error(f"Could not read {path}: {e}")
        raise IOError(f"Cannot read {path}: {e}") from e


def ensure_directory(directory: PathLike) -> Path:
    """
    Output directory, created with its parents when absent.

    Raises:
        OSError: If it cannot be created
    """
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Could not create output directory {path}: {e}")
        raise OSError(f"Cannot create output directory {path}: {e}") from e
    return path


def write_text_atomic(path: PathLike, text: str) -> Path:
    """
    Replace path with text in one step; readers never see a partial output.

    The text goes to a sibling temporary file which is then renamed over
    the target, so an interrupted run leaves the previous output intact.

    Raises:
        IOError: If the output cannot be written
    """
    target = Path(path)
    ensure_directory(target.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, target)
    except OSError as e:
        Path(tmp_name).unlink(missing_ok=True)
        logger.error(f"Could not write {target}: {e}")
        raise IOError(f"Cannot write {target}: {e}") from e
    logger.debug(f"Wrote {len(text)} characters to {target}")
    return target


def canonical_json(data: Any) -> str:
    """Sorted keys, compact separators: identical data gives identical text."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
