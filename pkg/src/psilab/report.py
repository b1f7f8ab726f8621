"""Check entries and verification reports with deterministic JSON output."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

PLUMBING = "plumbing"


def _clean(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, (np.complexfloating, complex)):
        return [_clean(value.real), _clean(value.imag)]
    return value


@dataclass
class CheckEntry:
    """One named check.

    ``margin`` is signed so that ``margin >= 0`` means the inequality holds;
    ``tolerance`` is the slack that was allowed when deciding ``passed``.
    """

    name: str
    reference: str
    margin: float
    tolerance: float
    passed: bool
    witness: Optional[dict] = None

    def __post_init__(self):
        if not self.reference:
            raise ValueError("check entries need a nonempty reference string")
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "reference": self.reference,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }
        if self.witness is not None:
            d["witness"] = self.witness
        return _clean(d)


@dataclass
class VerificationReport:
    entries: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, entry: CheckEntry) -> CheckEntry:
        self.entries.append(entry)
        return entry

    def extend(self, entries) -> None:
        for e in entries:
            self.add(e)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return _clean({
            "environment": self.environment,
            "entries": [e.to_dict() for e in self.entries],
            "pass": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
