"""Parametric problem instances: boxes, constraint cones and the problem tuple."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .expr import Expr, parse

__all__ = [
    "BoxDomain",
    "Cone",
    "ConstraintSet",
    "Oracle",
    "ProblemSpec",
    "Feasibility",
    "feasible",
    "feasibility_margins",
    "as_point",
    "unit",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
]


def as_point(u, dim: Optional[int] = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
    if dim is not None and arr.shape != (dim,):
        raise ValueError(f"expected a point in R^{dim}, got shape {arr.shape}")
    return arr


def unit(d) -> np.ndarray:
    """Normalize ``d`` to unit Euclidean length."""
    d = as_point(d)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("direction must be non-zero")
    return d / norm


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must have equal, non-zero length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"box needs lo < hi componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_array(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def center(self) -> np.ndarray:
        return (self.lo_array + self.hi_array) / 2

    @property
    def width(self) -> np.ndarray:
        return self.hi_array - self.lo_array

    def contains(self, p, margin: float = 0.0, slack: float = 1e-12) -> bool:
        p = as_point(p, self.dim)
        return bool(
            np.all(p >= self.lo_array + margin - slack) and np.all(p <= self.hi_array - margin + slack)
        )

    def contains_box(self, other: "BoxDomain", strict: bool = False) -> bool:
        lo, hi = other.lo_array, other.hi_array
        if strict:
            return bool(np.all(lo > self.lo_array) and np.all(hi < self.hi_array))
        return bool(np.all(lo >= self.lo_array) and np.all(hi <= self.hi_array))

    def shrink(self, margin: float) -> "BoxDomain":
        return BoxDomain(tuple(self.lo_array + margin), tuple(self.hi_array - margin))

    def axes(self, resolution) -> list:
        res = _per_axis(resolution, self.dim)
        return [np.linspace(a, b, r) for a, b, r in zip(self.lo, self.hi, res)]

    def grid(self, resolution) -> np.ndarray:
        """Tensor grid as an array of shape ``(count, dim)`` in C order."""
        mesh = np.meshgrid(*self.axes(resolution), indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def boundary_mask(self, resolution) -> np.ndarray:
        res = _per_axis(resolution, self.dim)
        idx = np.meshgrid(*[np.arange(r) for r in res], indexing="ij")
        mask = np.zeros(idx[0].shape, dtype=bool)
        for k, r in zip(idx, res):
            mask |= (k == 0) | (k == r - 1)
        return mask.reshape(-1)

    def corners(self) -> np.ndarray:
        mesh = np.meshgrid(*[(a, b) for a, b in zip(self.lo, self.hi)], indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, data: dict) -> "BoxDomain":
        return cls(tuple(data["lo"]), tuple(data["hi"]))

    @classmethod
    def parse(cls, text: str) -> "BoxDomain":
        """Parse ``"a:b"`` or ``"a:b,c:d"``."""
        lo, hi = [], []
        for part in text.split(","):
            a, b = part.split(":")
            lo.append(float(a))
            hi.append(float(b))
        return cls(tuple(lo), tuple(hi))


def _per_axis(resolution, dim: int) -> tuple:
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * dim
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != dim:
        raise ValueError(f"need {dim} resolutions, got {res}")
    if any(r < 2 for r in res):
        raise ValueError("grid resolution must be at least 2 per axis")
    return res


@dataclass(frozen=True)
class Cone:
    """Closed target set ``K`` with a closed-form interior distance.

    ``sdist`` is positive on the interior, zero on the boundary and
    negative outside.
    """

    kind: str  # nonneg | nonpos | box | ball
    lo: tuple = ()
    hi: tuple = ()
    center: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("nonneg", "nonpos", "box", "ball"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "box" and (len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi))):
            raise ValueError("box K needs lo < hi")
        if self.kind == "ball" and not self.radius > 0:
            raise ValueError("ball K needs a positive radius (non-empty interior)")

    def sdist(self, z) -> np.ndarray:
        """Interior distance of ``z`` (shape ``(k, ...)``)."""
        z = np.asarray(z, dtype=float)
        if self.kind == "nonneg":
            return np.min(z, axis=0)
        if self.kind == "nonpos":
            return np.min(-z, axis=0)
        if self.kind == "box":
            lo = np.asarray(self.lo).reshape((-1,) + (1,) * (z.ndim - 1))
            hi = np.asarray(self.hi).reshape((-1,) + (1,) * (z.ndim - 1))
            return np.min(np.minimum(z - lo, hi - z), axis=0)
        c = np.asarray(self.center).reshape((-1,) + (1,) * (z.ndim - 1))
        return self.radius - np.sqrt(np.sum((z - c) ** 2, axis=0))

    def sdist_scalar(self, z: Sequence[float]) -> float:
        if self.kind == "nonneg":
            return min(z)
        if self.kind == "nonpos":
            return -max(z)
        if self.kind == "box":
            return min(min(zi - a, b - zi) for zi, a, b in zip(z, self.lo, self.hi))
        return self.radius - math.sqrt(sum((zi - c) ** 2 for zi, c in zip(z, self.center)))

    def to_dict(self) -> dict:
        out: dict = {"type": self.kind}
        if self.kind == "box":
            out.update(lo=list(self.lo), hi=list(self.hi))
        if self.kind == "ball":
            out.update(center=list(self.center), radius=self.radius)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Cone":
        kind = data["type"]
        return cls(
            kind,
            lo=tuple(data.get("lo", ())),
            hi=tuple(data.get("hi", ())),
            center=tuple(data.get("center", ())),
            radius=float(data.get("radius", 0.0)),
        )


@dataclass(frozen=True)
class ConstraintSet:
    kind: str = "fixed"  # fixed | mapped
    G: tuple = ()
    K: Optional[Cone] = None

    def __post_init__(self):
        if self.kind not in ("fixed", "mapped"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "mapped":
            if not self.G or self.K is None:
                raise ValueError("mapped constraints need at least one G component and a K")
            if self.K.kind in ("box",) and len(self.K.lo) != len(self.G):
                raise ValueError("box K dimension must match G")
            if self.K.kind == "ball" and len(self.K.center) != len(self.G):
                raise ValueError("ball K dimension must match G")

    @property
    def fixed(self) -> bool:
        return self.kind == "fixed"


@dataclass(frozen=True)
class Oracle:
    """Closed-form ground truth for a catalog entry."""

    value: Callable[[np.ndarray], float]
    argmin: Optional[Callable[[np.ndarray], list]] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    clarke: dict = field(default_factory=dict)  # kink point tuple -> hull vertices


@dataclass(frozen=True)
class ProblemSpec:
    """The problem ``inf_{x in Phi(u)} f(x, u)`` on a box of parameters.

    ``search_window`` marks an ``X`` box that only bounds the grid search
    for an otherwise unconstrained variable; when False the box itself is
    part of the feasible set.
    """

    name: str
    n: int
    m: int
    f: Expr
    X: BoxDomain
    U: BoxDomain
    constraints: ConstraintSet = ConstraintSet()
    oracle: Optional[Oracle] = field(default=None, compare=False)
    search_window: bool = False
    stencil_slack: float = 1e-5
    description: str = ""

    def __post_init__(self):
        if self.X.dim != self.n or self.U.dim != self.m:
            raise ValueError("box dimensions must match n and m")
        if (self.f.n, self.f.m) != (self.n, self.m):
            raise ValueError("objective declared with different dimensions")
        for g in self.constraints.G:
            if (g.n, g.m) != (self.n, self.m):
                raise ValueError("constraint declared with different dimensions")

    @property
    def U_stencil(self) -> BoxDomain:
        """U widened by a small slack so difference stencils at boundary grid points stay evaluable."""
        return self.U.shrink(-self.stencil_slack)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    margin: float

    def __bool__(self) -> bool:
        return self.feasible


def feasibility_margins(spec: ProblemSpec, xs: np.ndarray, u) -> np.ndarray:
    """Interior distance ``sdist(G(x, u))`` for each row of ``xs`` (``+inf`` when fixed)."""
    xs = np.asarray(xs, dtype=float)
    if spec.constraints.fixed:
        return np.full(xs.shape[0], np.inf)
    u = as_point(u, spec.m)
    cols = [xs[:, i] for i in range(spec.n)]
    z = np.stack([g.evaluate_array(cols, u) for g in spec.constraints.G])
    return spec.constraints.K.sdist(z)


def feasible(spec: ProblemSpec, x, u) -> Feasibility:
    """Membership of ``x`` in ``Phi(u)`` with its interior-distance margin."""
    x = as_point(x, spec.n)
    u = as_point(u, spec.m)
    if not spec.X.contains(x):
        return Feasibility(False, -math.inf)
    if spec.constraints.fixed:
        return Feasibility(True, math.inf)
    z = np.array([g(x, u) for g in spec.constraints.G])
    margin = float(spec.constraints.K.sdist(z))
    return Feasibility(margin >= 0.0, margin)


# --------------------------------------------------------------------------
# JSON problem configs


def problem_to_dict(spec: ProblemSpec) -> dict:
    cons: dict[str, Any] = {"type": spec.constraints.kind}
    if not spec.constraints.fixed:
        cons["G"] = [g.source or str(g) for g in spec.constraints.G]
        cons["K"] = spec.constraints.K.to_dict()
    return {
        "name": spec.name,
        "n": spec.n,
        "m": spec.m,
        "f": spec.f.source or str(spec.f),
        "constraints": cons,
        "X": spec.X.to_dict(),
        "U": spec.U.to_dict(),
        "search_window": spec.search_window,
        "stencil_slack": spec.stencil_slack,
    }


def problem_from_dict(data: dict) -> ProblemSpec:
    n, m = int(data["n"]), int(data["m"])
    cons = data.get("constraints", {"type": "fixed"})
    if cons.get("type", "fixed") == "fixed":
        constraints = ConstraintSet()
    else:
        constraints = ConstraintSet(
            "mapped",
            tuple(parse(g, n, m) for g in cons["G"]),
            Cone.from_dict(cons["K"]),
        )
    return ProblemSpec(
        name=data.get("name", "user"),
        n=n,
        m=m,
        f=parse(data["f"], n, m),
        X=BoxDomain.from_dict(data["X"]),
        U=BoxDomain.from_dict(data["U"]),
        constraints=constraints,
        search_window=bool(data.get("search_window", False)),
        stencil_slack=float(data.get("stencil_slack", 1e-5)),
    )


def load_problem(path) -> ProblemSpec:
    with open(Path(path), encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))
