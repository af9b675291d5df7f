import math
from typing import Any


def finite_number(value: Any) -> float:
    """
    Accepts int/float (not bool) with a finite value.
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("must be a number")
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return float(value)


def non_negative_id(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError("must be an integer")
    if value < 0:
        raise ValueError("must be non-negative")
    return value


def strict_text(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError("must be a string")
    return value
