"""Directional derivatives in the parameter, the Hamiltonian and the constant C0."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import eval_dual_array
from .problem import ProblemSpec, as_point, feasibility_margins
from .solver import GridConfig, SolutionSet, SolverConfig, ValueFunction, _x_grid

__all__ = [
    "directions",
    "dir_deriv",
    "dir_derivs",
    "grad_u",
    "richardson_forward",
    "HamiltonianValue",
    "hamiltonian",
    "hamiltonian_feasible",
    "C0Estimate",
    "estimate_C0",
]

FD_STEPS = (1e-3, 5e-4, 2.5e-4)


def directions(m: int, count: Optional[int] = None) -> np.ndarray:
    """Deterministic net of unit directions in R^m, shape ``(D, m)``.

    m=1 gives {+1, -1}; m=2 equally spaced angles (64 by default);
    m=3 a Fibonacci sphere lattice (256 by default).
    """
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        k = count or 64
        theta = 2 * np.pi * np.arange(k) / k
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if m == 3:
        k = count or 256
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        r = np.sqrt(1 - z * z)
        phi = np.pi * (3 - np.sqrt(5)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    k = count or 64 * m
    pts = np.random.default_rng(0).standard_normal((k, m))
    return np.vstack([np.eye(m), -np.eye(m), pts / np.linalg.norm(pts, axis=1, keepdims=True)])


def richardson_forward(fn, h_steps=FD_STEPS) -> float:
    """Two-level Richardson extrapolation of forward quotients ``fn(h)`` at h, h/2, h/4."""
    q = [fn(h) for h in h_steps]
    r1 = [2 * q[1] - q[0], 2 * q[2] - q[1]]
    return (4 * r1[1] - r1[0]) / 3


def dir_derivs(spec: ProblemSpec, xs, u, d) -> np.ndarray:
    """``D_d f_x(u)`` for every row of ``xs``.

    Exact forward-mode values away from kinks; forward differences with
    Richardson extrapolation where a nonsmooth primitive sits at its kink.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, spec.n)
    u = as_point(u, spec.m)
    d = as_point(d, spec.m)
    cols = [xs[:, i] for i in range(spec.n)]
    zeros = [np.zeros(1)] * spec.n
    _, der, kink = eval_dual_array(spec.f, cols, u, zeros, d)
    der = np.array(der, dtype=float)
    if kink.any():
        idx = np.flatnonzero(kink)
        sub = [c[idx] for c in cols]
        base = spec.f.evaluate_array(sub, u)
        der[idx] = richardson_forward(lambda h: (spec.f.evaluate_array(sub, u + h * d) - base) / h)
    return der


def dir_deriv(spec: ProblemSpec, x, u, d) -> float:
    return float(dir_derivs(spec, as_point(x, spec.n)[None, :], u, d)[0])


def grad_u(spec: ProblemSpec, x, u) -> np.ndarray:
    """Parameter gradient of ``f`` at ``(x, u)`` (forward derivatives along the axes)."""
    eye = np.eye(spec.m)
    return np.array([dir_deriv(spec, x, u, e) for e in eye])


@dataclass(frozen=True)
class HamiltonianValue:
    u: np.ndarray
    d: np.ndarray
    value: float
    minimizer_rep: np.ndarray
    over: str  # "S(u)" or "Phi(u)"

    def to_dict(self) -> dict:
        return {"u": self.u, "d": self.d, "value": self.value, "minimizer_rep": self.minimizer_rep, "over": self.over}


def hamiltonian(spec: ProblemSpec, sol: SolutionSet, d) -> HamiltonianValue:
    """``inf_{x in S(u)} D_d f_x(u)`` over the solution representatives."""
    if sol.reps.shape[0] == 0:
        raise ValueError("solution set has no representatives")
    vals = dir_derivs(spec, sol.reps, sol.u, d)
    k = int(np.argmin(vals))
    return HamiltonianValue(sol.u, as_point(d), float(vals[k]), sol.reps[k].copy(), "S(u)")


def hamiltonian_feasible(spec: ProblemSpec, u, d, cfg: Optional[SolverConfig] = None) -> HamiltonianValue:
    """``inf_{x in Phi(u)} D_d f_x(u)`` over the feasible X grid."""
    cfg = cfg or SolverConfig()
    u = as_point(u, spec.m)
    pts, _, _ = _x_grid(spec.X.lo, spec.X.hi, cfg.x_resolution(spec.n))
    mask = feasibility_margins(spec, pts, u) >= 0
    if not mask.any():
        raise ValueError(f"no feasible point at u = {u.tolist()}")
    xs = pts[mask]
    vals = dir_derivs(spec, xs, u, d)
    k = int(np.argmin(vals))
    return HamiltonianValue(u, as_point(d), float(vals[k]), xs[k].copy(), "Phi(u)")


@dataclass(frozen=True)
class C0Estimate:
    value: float
    argmax_u: np.ndarray
    argmax_d: np.ndarray
    margin: float

    @property
    def bound(self) -> float:
        return self.value + self.margin

    def to_dict(self) -> dict:
        return {"value": self.value, "argmax_u": self.argmax_u, "argmax_d": self.argmax_d, "margin": self.margin}


def estimate_C0(
    spec: ProblemSpec,
    grid_cfg: Optional[GridConfig] = None,
    dir_count: Optional[int] = None,
    vf: Optional[ValueFunction] = None,
    rel_margin: float = 0.05,
) -> C0Estimate:
    """Largest ``-H(u, d)`` over the grid and the direction net, with a 5% margin."""
    grid_cfg = grid_cfg or GridConfig()
    vf = vf or ValueFunction(spec)
    dirs = directions(spec.m, dir_count)
    worst, arg_u, arg_d = -math.inf, None, None
    for u in grid_cfg.points(spec):
        sol = vf.solve(u)
        for d in dirs:
            h = hamiltonian(spec, sol, d).value
            if -h > worst:
                worst, arg_u, arg_d = -h, u.copy(), d.copy()
    value = max(0.0, worst)
    return C0Estimate(value, arg_u, arg_d, rel_margin * value + 1e-9)
