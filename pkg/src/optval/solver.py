"""Inner solver: global grid search over X with golden-section polish.

``solve_at`` returns the computed optimal value together with a clustered
picture of the optimal set: one polished representative per cluster of
near-optimal grid points, plus the corners of each cluster's bounding box
so that downstream infima over ``S(u)`` see the extreme points of
continuum solution sets.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .problem import BoxDomain, ProblemSpec, as_point, feasibility_margins
from .reports import CheckReport, Verdict

__all__ = [
    "SolverConfig",
    "GridConfig",
    "Extent",
    "SolutionSet",
    "ValueSurface",
    "ValueFunction",
    "InfeasibleError",
    "OutsideDomainError",
    "solve_at",
    "solve_surface",
    "audit_inf_compactness",
    "golden_section",
    "surface_to_csv",
    "surface_from_csv",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleError(RuntimeError):
    """No feasible grid point: Phi(u) is empty, so v is not continuous there."""


class OutsideDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    resolution: Optional[int] = None
    golden_iters: int = 60
    sweeps: int = 3
    cluster_factor: float = 10.0
    tol_abs: float = 1e-8
    tol_rel: float = 1e-6

    def x_resolution(self, n: int) -> int:
        if self.resolution is not None:
            return int(self.resolution)
        return 2001 if n == 1 else 201

    def tol_sol(self, value: float) -> float:
        return self.tol_abs + self.tol_rel * abs(value)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "golden_iters": self.golden_iters,
            "sweeps": self.sweeps,
            "cluster_factor": self.cluster_factor,
            "tol_abs": self.tol_abs,
            "tol_rel": self.tol_rel,
        }


@dataclass(frozen=True)
class GridConfig:
    """Tensor grid over a parameter box (defaults to the problem's U)."""

    resolution: object = 101
    box: Optional[BoxDomain] = None

    def points(self, spec: ProblemSpec) -> np.ndarray:
        box = self.box or spec.U
        if not spec.U.contains_box(box):
            raise ValueError(f"grid box {box} is not inside U = {spec.U}")
        res = self.resolution
        res_t = (int(res),) * spec.m if isinstance(res, (int, np.integer)) else tuple(res)
        if any(r < 3 for r in res_t):
            raise ValueError("grid resolution must be at least 3 per axis")
        return box.grid(res_t)

    def shape(self, spec: ProblemSpec) -> tuple:
        res = self.resolution
        return (int(res),) * spec.m if isinstance(res, (int, np.integer)) else tuple(int(r) for r in res)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution if isinstance(self.resolution, int) else list(self.resolution),
            "box": None if self.box is None else self.box.to_dict(),
        }


@dataclass(frozen=True)
class Extent:
    """Closed (possibly degenerate) bounding box of a solution cluster."""

    lo: tuple
    hi: tuple

    def corners(self) -> np.ndarray:
        axes = [sorted({a, b}) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class SolutionSet:
    u: np.ndarray
    value: float
    reps: np.ndarray  # (R, n); the first `polished` rows are polished cluster representatives
    extents: tuple
    tol_sol: float
    polished: int = 1
    grid_min: float = math.nan

    def to_dict(self) -> dict:
        return {
            "u": self.u.tolist(),
            "value": self.value,
            "reps": self.reps.tolist(),
            "extents": [e.to_dict() for e in self.extents],
            "tol_sol": self.tol_sol,
        }


@lru_cache(maxsize=32)
def _x_grid(lo: tuple, hi: tuple, res: int):
    box = BoxDomain(lo, hi)
    axes = box.axes(res)
    steps = np.array([a[1] - a[0] for a in axes])
    pts = box.grid(res)
    pts.setflags(write=False)
    return pts, (res,) * box.dim, steps


def golden_section(fn, a: float, b: float, iters: int = 60, start: Optional[float] = None):
    """Minimize ``fn`` on ``[a, b]``; returns the best evaluated ``(t, value)``.

    Tolerates ``inf`` values (infeasible points): the best feasible point
    seen is returned, never a bracket midpoint.
    """
    best_t, best_v = (start, fn(start)) if start is not None else (None, math.inf)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for t, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_t, best_v = t, v
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fn(c)
            if fc < best_v:
                best_t, best_v = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fn(d)
            if fd < best_v:
                best_t, best_v = d, fd
    if best_t is None:
        best_t = (a + b) / 2
    return best_t, best_v


def _objective(spec: ProblemSpec, u: np.ndarray):
    f = spec.f._scalar
    us = tuple(float(v) for v in u)
    lo, hi = spec.X.lo, spec.X.hi
    cons = spec.constraints
    gs = [g._scalar for g in cons.G]
    K = cons.K

    def obj(xs: tuple) -> float:
        for xi, a, b in zip(xs, lo, hi):
            if xi < a or xi > b:
                return math.inf
        try:
            if gs and K.sdist_scalar([g(xs, us) for g in gs]) < 0:
                return math.inf
            val = f(xs, us)
        except (ZeroDivisionError, ValueError, OverflowError):
            return math.inf
        return val if math.isfinite(val) else math.inf

    return obj


def _polish(spec, x0: np.ndarray, u: np.ndarray, steps: np.ndarray, cfg: SolverConfig):
    obj = _objective(spec, u)
    x = [float(v) for v in x0]
    value = obj(tuple(x))
    for _ in range(cfg.sweeps):
        for i in range(spec.n):
            a = max(spec.X.lo[i], x[i] - steps[i])
            b = min(spec.X.hi[i], x[i] + steps[i])

            def along(t, i=i):
                trial = list(x)
                trial[i] = t
                return obj(tuple(trial))

            t, v = golden_section(along, a, b, cfg.golden_iters, start=x[i])
            if v <= value:
                x[i], value = t, v
    return np.array(x), value


def _clusters(mask: np.ndarray, shape: tuple, gap: float) -> tuple:
    """Label candidate grid points; points within ``gap`` index steps share a label."""
    labels = np.zeros(mask.size, dtype=int)
    if len(shape) == 1:
        idx = np.flatnonzero(mask)
        splits = np.flatnonzero(np.diff(idx) > gap) + 1
        for k, group in enumerate(np.split(idx, splits), start=1):
            labels[group] = k
        return labels, len(splits) + 1
    from scipy import ndimage

    grid_mask = mask.reshape(shape)
    radius = max(1, int(gap // 2))
    structure = np.ones((2 * radius + 1,) * len(shape), dtype=bool)
    grown = ndimage.binary_dilation(grid_mask, structure=structure)
    lab, count = ndimage.label(grown, structure=np.ones((3,) * len(shape), dtype=bool))
    labels = np.where(mask, lab.reshape(-1), 0)
    return labels, count


def _neighbor_variation(Fm: np.ndarray, shape: tuple, i0: int) -> float:
    pos = np.unravel_index(i0, shape)
    vg = Fm[i0]
    worst = 0.0
    for axis in range(len(shape)):
        for step in (-1, 1):
            q = list(pos)
            q[axis] += step
            if 0 <= q[axis] < shape[axis]:
                val = Fm[np.ravel_multi_index(q, shape)]
                if math.isfinite(val):
                    worst = max(worst, abs(val - vg))
    return worst


def solve_at(spec: ProblemSpec, u, cfg: Optional[SolverConfig] = None) -> SolutionSet:
    """Compute ``v(u)`` and a clustered optimal set at a single parameter."""
    cfg = cfg or SolverConfig()
    u = as_point(u, spec.m)
    if not spec.U_stencil.contains(u):
        raise OutsideDomainError(f"u = {u.tolist()} is outside U = {spec.U}")
    pts, shape, steps = _x_grid(spec.X.lo, spec.X.hi, cfg.x_resolution(spec.n))
    F = spec.f.evaluate_array([pts[:, i] for i in range(spec.n)], u)
    feas = feasibility_margins(spec, pts, u) >= 0
    if not feas.any():
        raise InfeasibleError(
            f"{spec.name}: no feasible point at u = {u.tolist()}; "
            "the feasible set must be non-empty for v to be continuous"
        )
    Fm = np.where(feas, F, np.inf)
    i0 = int(np.argmin(Fm))
    vg = float(Fm[i0])
    tau = cfg.tol_sol(vg) + 2.0 * _neighbor_variation(Fm, shape, i0)
    cand = Fm <= vg + tau
    labels, count = _clusters(cand, shape, cfg.cluster_factor)

    polished = []
    for k in range(1, count + 1):
        members = np.flatnonzero(labels == k)
        if members.size == 0:
            continue
        seed = members[np.argmin(Fm[members])]
        x, val = _polish(spec, pts[seed], u, steps, cfg)
        if val > Fm[seed]:
            x, val = pts[seed].copy(), float(Fm[seed])
        polished.append((x, val, members))

    vhat = min(vg, min(val for _, val, _ in polished))
    tol = cfg.tol_sol(vhat)
    obj = _objective(spec, u)
    reps, extents, corner_pts = [], [], []
    for x, val, members in polished:
        if val > vhat + tol:
            continue
        opt = members[Fm[members] <= vhat + tol]
        cloud = np.vstack([pts[opt], x[None, :]]) if opt.size else x[None, :]
        if np.all(np.ptp(cloud, axis=0) <= steps * (1 + 1e-9)):
            # narrower than the grid resolves: neighbours of a curved minimum, not a continuum of optima
            cloud = x[None, :]
        ext = Extent(tuple(float(c) for c in cloud.min(axis=0)), tuple(float(c) for c in cloud.max(axis=0)))
        reps.append(x)
        extents.append(ext)
        for c in ext.corners():
            if obj(tuple(c)) <= vhat + tol:
                corner_pts.append(c)
    n_pol = len(reps)
    for c in corner_pts:
        if not any(np.allclose(c, r, rtol=0.0, atol=1e-12) for r in reps):
            reps.append(c)
    return SolutionSet(
        u=u,
        value=float(vhat),
        reps=np.array(reps, dtype=float).reshape(-1, spec.n),
        extents=tuple(extents),
        tol_sol=tol,
        polished=n_pol,
        grid_min=vg,
    )


class ValueFunction:
    """The computed value function as a cached callable ``u -> v(u)``."""

    kind = "vhat"

    def __init__(self, spec: ProblemSpec, cfg: Optional[SolverConfig] = None):
        self.spec = spec
        self.cfg = cfg or SolverConfig()
        self.domain = spec.U_stencil
        self._cache: dict = {}

    def solve(self, u) -> SolutionSet:
        key = tuple(float(v) for v in as_point(u, self.spec.m))
        sol = self._cache.get(key)
        if sol is None:
            sol = solve_at(self.spec, key, self.cfg)
            self._cache[key] = sol
        return sol

    def __call__(self, u) -> float:
        return self.solve(u).value

    def describe(self) -> str:
        return "vhat"


@dataclass
class ValueSurface:
    grid: np.ndarray  # (P, m)
    values: np.ndarray  # (P,)
    solutions: list = field(default_factory=list)
    shape: tuple = ()

    def __len__(self) -> int:
        return len(self.values)


def solve_surface(
    spec: ProblemSpec,
    grid_cfg: Optional[GridConfig] = None,
    cfg: Optional[SolverConfig] = None,
    vf: Optional[ValueFunction] = None,
) -> ValueSurface:
    """Solve on every point of the tensor grid, in C order."""
    grid_cfg = grid_cfg or GridConfig()
    vf = vf or ValueFunction(spec, cfg)
    pts = grid_cfg.points(spec)
    sols = [vf.solve(p) for p in pts]
    return ValueSurface(pts, np.array([s.value for s in sols]), sols, grid_cfg.shape(spec))


def surface_to_csv(surface: ValueSurface) -> str:
    m = surface.grid.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"u_{j + 1}" for j in range(m)] + ["v", "rep_count"])
    for p, v, s in zip(surface.grid, surface.values, surface.solutions):
        writer.writerow([f"{c:.17g}" for c in p] + [f"{v:.17g}", len(s.reps)])
    return buf.getvalue()


def surface_from_csv(text: str):
    """Parse surface CSV text into ``(grid, values, rep_counts)``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    m = len(header) - 2
    grid = np.array([[float(c) for c in r[:m]] for r in body]).reshape(-1, m)
    values = np.array([float(r[m]) for r in body])
    counts = np.array([int(r[m + 1]) for r in body])
    return grid, values, counts


def audit_inf_compactness(
    spec: ProblemSpec,
    u,
    alpha_offset: float,
    cfg: Optional[SolverConfig] = None,
    stencil_step: float = 1e-2,
) -> CheckReport:
    """Check that the level-``v(u)+alpha`` sublevel sets near ``u`` are non-empty and bounded.

    When ``X`` is only a search window, a sublevel set reaching the window's
    edge may continue outside it, so the verdict is inconclusive.
    """
    cfg = cfg or SolverConfig()
    u = as_point(u, spec.m)
    sol = solve_at(spec, u, cfg)
    alpha = sol.value + alpha_offset
    pts, shape, steps = _x_grid(spec.X.lo, spec.X.hi, cfg.x_resolution(spec.n))
    stencil = [u.copy()]
    if spec.m == 1:
        stencil += [u + k * stencil_step for k in (-2, -1, 1, 2)]
    else:
        for j in range(spec.m):
            for s in (-1, 1):
                e = np.zeros(spec.m)
                e[j] = s * stencil_step
                stencil.append(u + e)
    stencil = [np.clip(p, spec.U.lo_array, spec.U.hi_array) for p in stencil]
    witnesses, verdict = [], Verdict.PASS
    for up in stencil:
        F = spec.f.evaluate_array([pts[:, i] for i in range(spec.n)], up)
        feas = feasibility_margins(spec, pts, up) >= 0
        level = feas & (F <= alpha)
        if not level.any():
            witnesses.append({"u": up, "empty": True})
            verdict = Verdict.FAIL
            continue
        sub = pts[level]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        gap = np.minimum(lo - spec.X.lo_array, spec.X.hi_array - hi)
        touches = bool(np.any(gap < steps - 1e-12))
        witnesses.append({"u": up, "sublevel_lo": lo, "sublevel_hi": hi, "edge_gap": gap, "touches_edge": touches})
        if touches and spec.search_window and verdict == Verdict.PASS:
            verdict = Verdict.INCONCLUSIVE
    return CheckReport(
        check="inf_compactness",
        spec=spec.name,
        verdict=verdict,
        inputs={"u": u, "alpha_offset": alpha_offset, "stencil_step": stencil_step},
        residuals={"level": alpha},
        tolerances={"edge_margin": steps},
        witnesses=witnesses,
        notes=["X box is a search window" if spec.search_window else "X box is part of the feasible set"],
    )
