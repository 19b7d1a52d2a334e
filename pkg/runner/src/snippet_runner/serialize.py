"""Render variable bindings as JSON-safe values with bounded size.

Everything reported here ends up as model-visible feedback, so values are
capped: floats to 8 significant digits, strings and sequences to 100
elements with an ellipsis marker, nesting to a fixed depth. Values with no
JSON shape — functions, modules, arbitrary objects — become type-tagged
summaries like "<function>". Sets are emitted sorted by repr so that runs in
different processes (with different hash seeds) report identical bindings.
"""

from __future__ import annotations

import math

MAX_ELEMENTS = 100
MAX_DEPTH = 8
ELLIPSIS_MARKER = "..."


def serialize_bindings(namespace: dict) -> dict:
    """Top-level non-underscore names, in assignment order."""
    return {
        name: serialize_value(value)
        for name, value in namespace.items()
        if not name.startswith("_")
    }


def serialize_value(value, depth: int = 0):
    if depth >= MAX_DEPTH:
        return _tag(value)
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            return _tag(value)
        return float(format(value, ".8g"))
    if isinstance(value, str):
        if len(value) > MAX_ELEMENTS:
            return value[:MAX_ELEMENTS] + ELLIPSIS_MARKER
        return value
    if isinstance(value, (list, tuple)):
        items = [serialize_value(v, depth + 1) for v in value[:MAX_ELEMENTS]]
        if len(value) > MAX_ELEMENTS:
            items.append(ELLIPSIS_MARKER)
        return items
    if isinstance(value, (set, frozenset)):
        members = sorted(value, key=repr)
        items = [serialize_value(v, depth + 1) for v in members[:MAX_ELEMENTS]]
        if len(members) > MAX_ELEMENTS:
            items.append(ELLIPSIS_MARKER)
        return items
    if isinstance(value, dict):
        out = {}
        for i, (key, val) in enumerate(value.items()):
            if i == MAX_ELEMENTS:
                out[ELLIPSIS_MARKER] = ELLIPSIS_MARKER
                break
            out[str(key)] = serialize_value(val, depth + 1)
        return out
    return _tag(value)


def _tag(value) -> str:
    return f"<{type(value).__name__}>"
