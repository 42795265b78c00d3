"""File utility functions for run directories and reproducibility checksums."""

import hashlib
import logging
import os

import orjson

from utils.errors import ProsodyIOError

logger = logging.getLogger(__name__)


def ensure_dir(path: str) -> str:
    """Create ``path`` (and parents) if missing.

    Raises:
        ProsodyIOError: If the directory cannot be created
    """
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ProsodyIOError(f"Cannot create directory {path}: {e}") from e
    return path


def file_sha256(file_path: str) -> str:
    """Hex SHA-256 of a file's bytes.

    Args:
        file_path: Path to the file

    Returns:
        64-character lowercase hex digest
    """
    if not os.path.exists(file_path):
        raise ProsodyIOError(f"File does not exist: {file_path}")
    h = hashlib.sha256()
    with open(file_path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_json(path: str, payload: dict) -> None:
    """Write ``payload`` as indented JSON with sorted keys (byte-stable across reruns)."""
    try:
        with open(path, "wb") as f:
            f.write(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY))
    except OSError as e:
        raise ProsodyIOError(f"Could not write {path}: {e}") from e
    logger.debug(f"Wrote JSON file: {path}")
