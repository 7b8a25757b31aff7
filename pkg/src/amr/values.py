"""Runtime value domain shared by the language, tuple spaces, and codec.

Agent-visible values map onto plain Python data:

    Null    -> None
    Boolean -> bool
    Number  -> float (IEEE-754 double; integers are integral floats)
    String  -> str
    Array   -> list
    Record  -> dict (insertion ordered)
    Function-> Closure (see amr.abl.interp)

Every helper here treats numbers as doubles and never raises on NaN/Inf.
"""

from __future__ import annotations

import math
from typing import Any

Value = Any

INT53 = 2**53


def is_number(v: Value) -> bool:
    return isinstance(v, float) or (isinstance(v, int) and not isinstance(v, bool))


def as_number(v: Value) -> float:
    return float(v)


def number_text(x: float) -> str:
    """Shortest round-trip decimal; integral doubles print without a point."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    if x.is_integer() and abs(x) < INT53:
        return str(int(x))
    return repr(x)


def value_text(v: Value) -> str:
    """Human-readable rendering used by log() and string()."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if is_number(v):
        return number_text(float(v))
    if isinstance(v, str):
        return v
    if isinstance(v, list):
        return "[" + ",".join(quoted_text(e) for e in v) + "]"
    if isinstance(v, dict):
        return "{" + ",".join(f"{k}:{quoted_text(e)}" for k, e in v.items()) + "}"
    return str(v)


def quoted_text(v: Value) -> str:
    if isinstance(v, str):
        return "'" + v + "'"
    return value_text(v)


def truthy(v: Value) -> bool:
    """Nulls, false, 0, NaN, and '' are falsy; containers are always truthy."""
    if v is None or v is False:
        return False
    if v is True:
        return True
    if is_number(v):
        x = float(v)
        return not (x == 0.0 or math.isnan(x))
    if isinstance(v, str):
        return len(v) > 0
    return True


def deep_equal(a: Value, b: Value) -> bool:
    """Structural equality; numbers compare by ==, so NaN never equals."""
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if is_number(a) and is_number(b):
        return float(a) == float(b)
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(deep_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        if len(a) != len(b) or a.keys() != b.keys():
            return False
        return all(deep_equal(a[k], b[k]) for k in a)
    return a is b


def deep_copy(v: Value) -> Value:
    if isinstance(v, list):
        return [deep_copy(e) for e in v]
    if isinstance(v, dict):
        return {k: deep_copy(e) for k, e in v.items()}
    return v


def contains_function(v: Value) -> bool:
    """True if any nested element is a non-data value (callable code)."""
    if isinstance(v, list):
        return any(contains_function(e) for e in v)
    if isinstance(v, dict):
        return any(contains_function(e) for e in v.values())
    if v is None or isinstance(v, (bool, str)) or is_number(v):
        return False
    return True
