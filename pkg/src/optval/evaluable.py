"""Candidate functions ``w(u)`` that the checks can be run against."""

from __future__ import annotations

import re
from typing import Optional

import numpy as np

from .expr import evaluate, parse
from .problem import BoxDomain, ProblemSpec, as_point
from .solver import ValueFunction

__all__ = ["OracleFunction", "ExprFunction", "Shifted", "TentPerturbation", "candidate"]


class OracleFunction:
    kind = "oracle"

    def __init__(self, spec: ProblemSpec):
        if spec.oracle is None:
            raise ValueError(f"{spec.name} has no closed-form oracle")
        self.spec = spec
        self.domain = spec.U_stencil

    def __call__(self, u) -> float:
        return float(self.spec.oracle.value(as_point(u, self.spec.m)))

    def describe(self) -> str:
        return "oracle"


class ExprFunction:
    """A user expression in ``u1..um`` used as a candidate ``w``."""

    kind = "expr"

    def __init__(self, source: str, m: int, domain: Optional[BoxDomain] = None):
        self.expr = parse(source, 0, m)
        self.m = m
        self.domain = domain

    def __call__(self, u) -> float:
        return evaluate(self.expr, (), as_point(u, self.m))

    def describe(self) -> str:
        return f"expr:{self.expr}"


class Shifted:
    kind = "shifted"

    def __init__(self, base, shift: float):
        self.base = base
        self.shift = float(shift)
        self.domain = getattr(base, "domain", None)

    def __call__(self, u) -> float:
        return self.base(u) + self.shift

    def describe(self) -> str:
        return f"{_describe(self.base)}{self.shift:+g}"


class TentPerturbation:
    """``base + eps * max(0, 1 - |u - center| / radius)``: a hat bump with a concave peak."""

    kind = "tent"

    def __init__(self, base, eps: float, center, radius: float):
        self.base = base
        self.eps = float(eps)
        self.center = as_point(center)
        self.radius = float(radius)
        self.domain = getattr(base, "domain", None)

    def bump(self, u) -> float:
        r = float(np.linalg.norm(as_point(u) - self.center))
        return max(0.0, 1.0 - r / self.radius)

    def __call__(self, u) -> float:
        return self.base(u) + self.eps * self.bump(u)

    def describe(self) -> str:
        return f"{_describe(self.base)}+{self.eps:g}*tent({self.center.tolist()},{self.radius:g})"


def _describe(w) -> str:
    return w.describe() if hasattr(w, "describe") else repr(w)


_CAND_RE = re.compile(r"^\s*(vhat|oracle)\s*(?:([+-])\s*([0-9.eE+-]+))?\s*$")


def candidate(text: str, spec: ProblemSpec, vf: Optional[ValueFunction] = None):
    """Build a candidate from ``vhat``, ``oracle``, ``vhat-0.1``, ``oracle+1e-2`` or an expression in u."""
    mt = _CAND_RE.match(text)
    if mt:
        base = (vf or ValueFunction(spec)) if mt.group(1) == "vhat" else OracleFunction(spec)
        if mt.group(2):
            shift = float(mt.group(3)) * (1 if mt.group(2) == "+" else -1)
            return Shifted(base, shift)
        return base
    source = text[5:] if text.startswith("expr:") else text
    return ExprFunction(source, spec.m, spec.U_stencil)
