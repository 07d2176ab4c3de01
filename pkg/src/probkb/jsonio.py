"""Compact JSON with floats at 10 significant digits.

All machine-readable output goes through here so identical runs serialize
byte-identically.
"""

from __future__ import annotations

import json


def format_float(x: float) -> str:
    return f"{x:.10g}"


def dumps(obj) -> str:
    if obj is None or isinstance(obj, (bool, int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
