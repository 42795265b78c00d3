"""Model file format.

Layout:
    4 bytes   magic b"PRSM"
    uint32    format version (little-endian)
    uint32    header length in bytes
    header    UTF-8 JSON {"version", "name", "tensors": [{"name", "shape", "offset", "nbytes"}], "meta"}
    blobs     raw little-endian float32 tensors, offsets relative to the end of the header

Round trips are bit-exact because parameters are stored as float32 in memory.
"""
from __future__ import annotations

import logging
import struct
from typing import Any, Dict, Optional, Tuple

import numpy as np
import orjson

from config.settings import MODEL_FORMAT_VERSION, MODEL_MAGIC
from utils.errors import InvalidSpecError, ProsodyIOError
from utils.optim import ParamStore

logger = logging.getLogger(__name__)

__all__ = ["save_params", "load_params"]

_PREFIX = struct.Struct("<4sII")


def save_params(path: str, store: ParamStore, name: str, meta: Optional[Dict[str, Any]] = None) -> None:
    tensors = []
    blobs = []
    offset = 0
    for pname, value in store.items():
        blob = np.ascontiguousarray(value, dtype="<f4").tobytes()
        tensors.append({"name": pname, "shape": list(value.shape), "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = orjson.dumps(
        {"version": MODEL_FORMAT_VERSION, "name": name, "tensors": tensors, "meta": meta or {}},
        option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY,
    )
    try:
        with open(path, "wb") as f:
            f.write(_PREFIX.pack(MODEL_MAGIC, MODEL_FORMAT_VERSION, len(header)))
            f.write(header)
            for blob in blobs:
                f.write(blob)
    except OSError as e:
        raise ProsodyIOError(f"Could not write model file {path}: {e}") from e
    logger.info(f"[serialization] saved model={name} tensors={len(tensors)} bytes={offset} path={path}")


def load_params(path: str) -> Tuple[ParamStore, str, Dict[str, Any]]:
    """Returns (store, model name, meta)."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise ProsodyIOError(f"Could not read model file {path}: {e}") from e
    if len(raw) < _PREFIX.size:
        raise InvalidSpecError(f"{path}: truncated model file")
    magic, version, header_len = _PREFIX.unpack_from(raw, 0)
    if magic != MODEL_MAGIC:
        raise InvalidSpecError(f"{path}: not a model file (bad magic)")
    if version != MODEL_FORMAT_VERSION:
        raise InvalidSpecError(f"{path}: unsupported model format version {version}")
    start = _PREFIX.size + header_len
    if len(raw) < start:
        raise InvalidSpecError(f"{path}: truncated header")
    header = orjson.loads(raw[_PREFIX.size:start])

    store = ParamStore()
    for t in header["tensors"]:
        begin = start + int(t["offset"])
        end = begin + int(t["nbytes"])
        if end > len(raw):
            raise InvalidSpecError(f"{path}: tensor '{t['name']}' runs past end of file")
        arr = np.frombuffer(raw[begin:end], dtype="<f4").reshape(t["shape"])
        store.add(t["name"], arr.astype(np.float32))
    return store, header.get("name", ""), header.get("meta", {})
