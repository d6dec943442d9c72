from __future__ import annotations

from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray


def db(value: ArrayLike) -> Any:
    """Linear power ratio to decibels, 10*log10(x)."""
    return 10.0 * np.log10(value)


def from_db(value_db: ArrayLike) -> Any:
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def as_vector(values: ArrayLike, *, name: str) -> NDArray[np.float64]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}.")
    if arr.size == 0:
        raise ValueError(f"{name} must not be empty.")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries.")
    return arr


def format_number(value: Any) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def parse_number(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
