# Input validation utilities for the prosody toolkit.
# Parses flat key=value overrides against a pydantic config model and checks simplex vectors.

from typing import Any, Dict, Iterable, Sequence, Type, TypeVar

import numpy as np
from pydantic import BaseModel

from config.settings import EMOTIONS, SIMPLEX_TOL

M = TypeVar("M", bound=BaseModel)


class OverrideError(ValueError):
    """Malformed or unknown ``key=value`` override (a usage error at the CLI)."""


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """Split ``key=value`` strings; later keys win."""
    out: Dict[str, str] = {}
    for raw in pairs:
        if "=" not in raw:
            raise OverrideError(f"override '{raw}' is not of the form key=value")
        key, value = raw.split("=", 1)
        key = key.strip()
        if not key:
            raise OverrideError(f"override '{raw}' has an empty key")
        out[key] = value.strip()
    return out


def _coerce(raw: str, current: Any) -> Any:
    """Convert ``raw`` to the type of the field's current value."""
    if isinstance(current, bool):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise OverrideError(f"expected a boolean, got '{raw}'")
    if isinstance(current, tuple):
        parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
        elem = current[0] if current else 0.0
        return tuple(_coerce(p.strip(), elem) for p in parts)
    try:
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError as e:
        raise OverrideError(f"cannot parse '{raw}': {e}") from e
    return raw


def apply_overrides(model: M, overrides: Dict[str, str]) -> M:
    """Return a copy of ``model`` with the matching overrides applied and re-validated.

    Keys not present on the model are ignored here; use ``unknown_keys`` to report them.
    """
    base = model.model_dump()
    update: Dict[str, Any] = {}
    for key, raw in overrides.items():
        if key in base and not isinstance(base[key], dict):
            update[key] = _coerce(raw, base[key])
    if not update:
        return model
    return type(model).model_validate({**base, **update})


def unknown_keys(overrides: Dict[str, str], models: Sequence[Type[BaseModel]], extra: Iterable[str] = ()) -> list[str]:
    known = set(extra)
    for m in models:
        known.update(m.model_fields.keys())
    return sorted(k for k in overrides if k not in known)


def parse_emotion(name: str) -> int:
    """Map an emotion name (case-insensitive) to its class index."""
    key = name.strip().lower()
    if key not in EMOTIONS:
        raise OverrideError(f"unknown emotion '{name}' (choose from {', '.join(EMOTIONS)})")
    return EMOTIONS.index(key)


def is_simplex(v: np.ndarray, tol: float = SIMPLEX_TOL) -> bool:
    arr = np.asarray(v, dtype=np.float64)
    return bool(arr.ndim == 1 and np.all(arr >= -tol) and abs(arr.sum() - 1.0) <= tol)
