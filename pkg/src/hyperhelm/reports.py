"""Check results and the JSON report schema shared by every module."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and callable(x.item):
        return _clean(x.item())
    return x


@dataclass
class BoundReport:
    """Outcome of one numerical check."""

    check: str
    passed: bool
    worst_location: float | None
    worst_value: float
    tolerance: float
    details: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "check": self.check,
            "pass": bool(self.passed),
            "worst_location": self.worst_location,
            "worst_value": self.worst_value,
            "tolerance": self.tolerance,
        }
        if self.details:
            out["details"] = self.details
        return _clean(out)

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def __bool__(self):
        return bool(self.passed)


def dumps(obj) -> str:
    """Serialize with the report conventions: UTF-8 text, stable key order."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, ensure_ascii=False)
