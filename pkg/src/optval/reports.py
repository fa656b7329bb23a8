"""Machine-readable check verdicts and their JSON encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["CheckReport", "Verdict", "to_jsonable", "dumps", "combine_verdicts"]


class Verdict:
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
    SKIPPED = "skipped"

    ALL = (PASS, FAIL, INCONCLUSIVE, SKIPPED)


def combine_verdicts(verdicts) -> str:
    """fail dominates, then inconclusive; skipped entries are ignored."""
    vs = [v for v in verdicts if v != Verdict.SKIPPED]
    if not vs:
        return Verdict.SKIPPED
    if Verdict.FAIL in vs:
        return Verdict.FAIL
    if Verdict.INCONCLUSIVE in vs:
        return Verdict.INCONCLUSIVE
    return Verdict.PASS


@dataclass
class CheckReport:
    check: str
    spec: str
    verdict: str
    inputs: dict = field(default_factory=dict)
    residuals: Any = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    witnesses: Any = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in Verdict.ALL:
            raise ValueError(f"bad verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "check": self.check,
                "spec": self.spec,
                "inputs": self.inputs,
                "verdict": self.verdict,
                "residuals": self.residuals,
                "tolerances": self.tolerances,
                "witnesses": self.witnesses,
                "notes": self.notes,
            }
        )


def _float(v: float):
    v = float(v)
    if math.isfinite(v):
        return v
    if math.isnan(v):
        return "nan"
    return "inf" if v > 0 else "-inf"


def to_jsonable(obj):
    """Convert numpy scalars/arrays and dataclass-like records to plain JSON types.

    Non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    if isinstance(obj, CheckReport):
        return obj.to_dict()
    if hasattr(obj, "to_dict") and callable(obj.to_dict):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, shortest round-trip float repr."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
