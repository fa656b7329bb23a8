"""Optimality and non-optimality certificates, and audits of the standing assumptions.

Certified statuses are claims about discretized checks at recorded
tolerances; they are not mathematical proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .derivatives import directions, estimate_C0, grad_u, hamiltonian, hamiltonian_feasible
from .hj import REPORT_TOL, check_viscosity
from .nonsmooth import numeric_gradient
from .problem import BoxDomain, ProblemSpec, as_point, feasible
from .reports import CheckReport, Verdict, combine_verdicts
from .solver import GridConfig, ValueFunction, ValueSurface

__all__ = [
    "Status",
    "Certificate",
    "necessary_test",
    "certify_optimal",
    "certify_not_optimal",
    "AuditBundle",
    "audit_assumptions",
    "exit_code",
    "CERT_TOL",
    "STRICT_MARGIN",
]

CERT_TOL = 1e-6
STRICT_MARGIN = 1e-6
CAVEAT = ("certificate covers the discretized checks only; the continuity hypothesis on H used by "
          "the comparison argument is checked diagnostically, not proven")


class Status:
    OPTIMAL = "certified-optimal"
    NOT_OPTIMAL = "certified-not-optimal"
    REJECTED = "rejected-by-necessary-condition"
    INCONCLUSIVE = "inconclusive"


_EXIT = {Status.OPTIMAL: 0, Status.INCONCLUSIVE: 3, Status.NOT_OPTIMAL: 4, Status.REJECTED: 4}


def exit_code(status: str) -> int:
    return _EXIT[status]


@dataclass
class Certificate:
    u0: np.ndarray
    x0: np.ndarray
    N: Optional[BoxDomain]
    witness: str
    status: str
    evidence: list  # CheckReports
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("a certificate needs at least one piece of evidence")

    @property
    def exit_code(self) -> int:
        return exit_code(self.status)

    def to_dict(self) -> dict:
        from .reports import to_jsonable

        return to_jsonable({
            "u0": self.u0,
            "x0": self.x0,
            "N": None if self.N is None else self.N.to_dict(),
            "witness": self.witness,
            "status": self.status,
            "evidence": [e.to_dict() for e in self.evidence],
            "notes": self.notes,
        })


def _describe(w) -> str:
    return w.describe() if hasattr(w, "describe") else repr(w)


def _require_feasible(spec: ProblemSpec, x0, u0):
    fz = feasible(spec, x0, u0)
    if not fz:
        raise ValueError(f"x0 = {np.asarray(x0).tolist()} is not feasible at u0 = {np.asarray(u0).tolist()}")


def _f(spec: ProblemSpec, x0, u) -> float:
    return spec.f(x0, u)


def necessary_test(
    spec: ProblemSpec,
    u0,
    x0,
    dirs=None,
    vf: Optional[ValueFunction] = None,
    tol: float = REPORT_TOL,
) -> Certificate:
    """``f(x0, .)`` must be a subsolution at u0 if x0 is optimal; a violation rejects x0."""
    u0 = as_point(u0, spec.m)
    x0 = as_point(x0, spec.n)
    _require_feasible(spec, x0, u0)
    vf = vf or ValueFunction(spec)
    dirs = directions(spec.m) if dirs is None else np.atleast_2d(np.asarray(dirs, dtype=float))
    g = grad_u(spec, x0, u0)
    sol = vf.solve(u0)
    rows = []
    for d in dirs:
        H = hamiltonian(spec, sol, d).value
        rows.append({"d": d, "H": H, "residual": float(-g @ d + H)})
    bad = [r for r in rows if r["residual"] > tol]
    rep = CheckReport(
        "necessary",
        "f(x0, .) is a subsolution at u0",
        Verdict.FAIL if bad else Verdict.PASS,
        {"problem": spec.name, "u0": u0, "x0": x0, "grad_u_f": g},
        {"per_direction": rows, "max_residual": max(r["residual"] for r in rows)},
        {"residual": tol},
        bad,
    )
    status = Status.REJECTED if bad else Status.INCONCLUSIVE
    notes = [] if bad else ["necessary condition holds; it is not sufficient for optimality"]
    return Certificate(u0, x0, None, f"f(x0, u) with x0 = {x0.tolist()}", status, [rep], notes)


def _check_box(spec: ProblemSpec, N: BoxDomain, u0):
    if not spec.U.contains_box(N, strict=True):
        raise ValueError(f"N = {N} must be compactly contained in U = {spec.U}")
    if not N.contains(u0):
        raise ValueError(f"u0 = {np.asarray(u0).tolist()} is not in N = {N}")


def _n_grid(spec: ProblemSpec, N: BoxDomain, grid_cfg: Optional[GridConfig]):
    res = grid_cfg.resolution if grid_cfg is not None else (11 if spec.m == 1 else 5)
    cfg = GridConfig(res, N)
    pts = cfg.points(spec)
    return pts, N.boundary_mask(cfg.shape(spec)), cfg


def _viscosity_report(spec, w, pts, role: str, vf, dirs, hamiltonian_fn=None, label="") -> CheckReport:
    rows, bad, verdicts = [], [], []
    for u in pts:
        rep = check_viscosity(spec, w, u, dirs, vf=vf, hamiltonian_fn=hamiltonian_fn)
        v = rep.sub_verdict if role == "sub" else rep.super_verdict
        verdicts.append(v)
        row = {"u": u, "verdict": v, "max_abs_residual": rep.max_abs_residual(), "differentiable": rep.differentiable}
        rows.append(row)
        if v != Verdict.PASS:
            bad.append(row)
    name = "subsolution" if role == "sub" else "supersolution"
    return CheckReport(f"{name}-in-N", f"w is a viscosity {name} in N{label}", combine_verdicts(verdicts) if verdicts
                       else Verdict.INCONCLUSIVE, {"points": len(pts)}, {"points": rows}, {"residual": REPORT_TOL}, bad)


def certify_optimal(
    spec: ProblemSpec,
    u0,
    x0,
    N: BoxDomain,
    w,
    grid_cfg: Optional[GridConfig] = None,
    vf: Optional[ValueFunction] = None,
    dirs=None,
    tol: float = CERT_TOL,
) -> Certificate:
    """Sufficient optimality: w subsolution in N, ``w <= vhat`` on the boundary, ``w >= f(x0, .)`` on N."""
    u0 = as_point(u0, spec.m)
    x0 = as_point(x0, spec.n)
    _check_box(spec, N, u0)
    _require_feasible(spec, x0, u0)
    vf = vf or ValueFunction(spec)
    pts, bmask, cfg = _n_grid(spec, N, grid_cfg)

    a = _viscosity_report(spec, w, pts[~bmask], "sub", vf, dirs)

    bpts = pts[bmask]
    bgap = np.array([w(u) - vf(u) for u in bpts])
    kb = int(np.argmax(bgap))
    b = CheckReport("boundary-below-value", "w <= vhat on the boundary of N",
                    Verdict.FAIL if bgap[kb] > tol else Verdict.PASS, {"points": len(bpts)},
                    {"max_w_minus_v": float(bgap[kb]), "argmax": bpts[kb]}, {"value": tol},
                    [{"u": bpts[kb], "w_minus_v": float(bgap[kb])}] if bgap[kb] > tol else [])

    cpts = np.vstack([pts, u0[None, :]])
    cgap = np.array([_f(spec, x0, u) - w(u) for u in cpts])
    kc = int(np.argmax(cgap))
    c = CheckReport("above-candidate", "w >= f(x0, .) on N", Verdict.FAIL if cgap[kc] > tol else Verdict.PASS,
                    {"points": len(cpts)}, {"max_f_minus_w": float(cgap[kc]), "argmax": cpts[kc]}, {"value": tol},
                    [{"u": cpts[kc], "f_minus_w": float(cgap[kc])}] if cgap[kc] > tol else [])

    evidence = [a, b, c]
    ok = all(e.verdict == Verdict.PASS for e in evidence)
    status = Status.OPTIMAL if ok else Status.INCONCLUSIVE
    notes = [CAVEAT, f"witness: {_describe(w)}; grid {cfg.to_dict()}"]
    if not ok:
        notes.append("not certified: " + ", ".join(e.check for e in evidence if e.verdict != Verdict.PASS))
    return Certificate(u0, x0, N, _describe(w), status, evidence, notes)


def certify_not_optimal(
    spec: ProblemSpec,
    u0,
    x0,
    N: BoxDomain,
    w,
    grid_cfg: Optional[GridConfig] = None,
    vf: Optional[ValueFunction] = None,
    dirs=None,
    tol: float = CERT_TOL,
    feasible_hamiltonian: bool = False,
) -> Certificate:
    """Sufficient non-optimality: w supersolution in N, ``w >= vhat`` on the boundary, ``w(u0) < f(x0, u0)``.

    With ``feasible_hamiltonian`` the supersolution test uses the infimum over
    the whole feasible set instead of the optimal set; it is stronger and
    needs no solution set.
    """
    u0 = as_point(u0, spec.m)
    x0 = as_point(x0, spec.n)
    _check_box(spec, N, u0)
    _require_feasible(spec, x0, u0)
    vf = vf or ValueFunction(spec)
    pts, bmask, cfg = _n_grid(spec, N, grid_cfg)

    hfn = None
    if feasible_hamiltonian:
        hfn = lambda u, d: hamiltonian_feasible(spec, u, d, vf.cfg).value  # noqa: E731
    a = _viscosity_report(spec, w, pts[~bmask], "super", vf, dirs, hfn,
                          " (feasible-set Hamiltonian)" if feasible_hamiltonian else "")

    bpts = pts[bmask]
    bgap = np.array([vf(u) - w(u) for u in bpts])
    kb = int(np.argmax(bgap))
    b = CheckReport("boundary-above-value", "w >= vhat on the boundary of N",
                    Verdict.FAIL if bgap[kb] > tol else Verdict.PASS, {"points": len(bpts)},
                    {"max_v_minus_w": float(bgap[kb]), "argmax": bpts[kb]}, {"value": tol},
                    [{"u": bpts[kb], "v_minus_w": float(bgap[kb])}] if bgap[kb] > tol else [])

    w0 = float(w(u0))
    f0 = _f(spec, x0, u0)
    strict = w0 < f0 - STRICT_MARGIN
    c = CheckReport("strict-gap", "w(u0) < f(x0, u0)", Verdict.PASS if strict else Verdict.FAIL,
                    {"u0": u0, "x0": x0}, {"w_u0": w0, "f_x0_u0": f0, "gap": f0 - w0}, {"strict_margin": STRICT_MARGIN})

    evidence = [a, b, c]
    ok = all(e.verdict == Verdict.PASS for e in evidence)
    status = Status.NOT_OPTIMAL if ok else Status.INCONCLUSIVE
    notes = [CAVEAT, f"witness: {_describe(w)}; grid {cfg.to_dict()}"]
    if not ok:
        notes.append("not certified: " + ", ".join(e.check for e in evidence if e.verdict != Verdict.PASS))
    return Certificate(u0, x0, N, _describe(w), status, evidence, notes)


# -- assumption audits -----------------------------------------------------------


@dataclass
class AuditBundle:
    problem: str
    reports: list

    @property
    def verdict(self) -> str:
        return combine_verdicts(r.verdict for r in self.reports)

    def get(self, check: str) -> CheckReport:
        for r in self.reports:
            if r.check == check:
                return r
        raise KeyError(check)

    def to_report(self) -> CheckReport:
        failing = [r.check for r in self.reports if r.verdict == Verdict.FAIL]
        notes = [f"FAILED: {', '.join(failing)}"] if failing else []
        return CheckReport("assumptions", "assumption audits", self.verdict, {"problem": self.problem},
                           {r.check: r.to_dict() for r in self.reports}, {}, failing, notes)


def _audit_b2(spec: ProblemSpec, surface: ValueSurface) -> CheckReport:
    if spec.constraints.fixed:
        return CheckReport("B2", "constraints inactive at optimal points", Verdict.PASS, {"constraints": "fixed"},
                           notes=["fixed feasible set: condition holds automatically"])
    worst, where = np.inf, None
    cons = spec.constraints
    for u, sol in zip(surface.grid, surface.solutions):
        for x in sol.reps:
            z = np.array([g(x, u) for g in cons.G])
            s = cons.K.sdist_scalar(z)
            if s < worst:
                worst, where = s, {"u": u, "x": x, "G": z}
    ok = worst > 1e-6
    return CheckReport("B2", "constraints inactive at optimal points", Verdict.PASS if ok else Verdict.FAIL,
                       {"constraints": "mapped", "points": len(surface.grid)}, {"min_interior_distance": float(worst)},
                       {"interior_distance": 1e-6}, [] if ok else [where],
                       [] if ok else ["constraint active at an optimal point: the Slater-like condition fails"])


def _audit_convexity(spec: ProblemSpec, vf: ValueFunction, pairs: int, seed: int) -> CheckReport:
    rng = np.random.default_rng(seed)
    inner = spec.U
    lo, hi = inner.lo_array, inner.hi_array
    A = lo + (hi - lo) * rng.random((pairs, spec.m))
    B = lo + (hi - lo) * rng.random((pairs, spec.m))
    worst, arg = -np.inf, None
    for a, b in zip(A, B):
        gap = vf(0.5 * (a + b)) - 0.5 * (vf(a) + vf(b))
        if gap > worst:
            worst, arg = gap, {"u": a, "u_prime": b, "gap": gap}
    ok = worst <= 1e-6
    return CheckReport("convexity", "midpoint convexity of vhat", Verdict.PASS if ok else Verdict.FAIL,
                       {"pairs": pairs, "seed": seed}, {"max_midpoint_gap": float(worst)}, {"midpoint": 1e-6},
                       [] if ok else [arg])


def _interior_points(surface: ValueSurface) -> np.ndarray:
    shape = surface.shape or (len(surface.grid),)
    mask = np.zeros(shape, dtype=bool)
    mask[tuple(slice(1, -1) for _ in shape)] = True
    return surface.grid[mask.ravel()]


def _grid_step(surface: ValueSurface) -> float:
    span = surface.grid.max(axis=0) - surface.grid.min(axis=0)
    shape = surface.shape or (len(surface.grid),)
    return float(np.min(span / (np.array(shape) - 1)))


def _audit_differentiability(vf, surface: ValueSurface) -> CheckReport:
    pts = _interior_points(surface)
    bad = []
    for u in pts:
        g, ok = numeric_gradient(vf, u)
        if g is None or not ok:
            bad.append({"u": u})
    return CheckReport("differentiability", "vhat differentiable at interior grid points",
                       Verdict.FAIL if bad else Verdict.PASS, {"points": len(pts)},
                       {"non_differentiable": len(bad)}, {"asymmetry": 1e-3}, bad)


def _audit_c1(vf, surface: ValueSurface, m: int, tol: float = 5e-2) -> CheckReport:
    pts = _interior_points(surface)
    delta = min(_grid_step(surface), 1e-2)
    worst, arg = 0.0, None
    for u in pts:
        g0, _ = numeric_gradient(vf, u)
        for i in range(m):
            for s in (-1.0, 1.0):
                v = u.copy()
                v[i] += s * delta
                g1, _ = numeric_gradient(vf, v)
                if g0 is None or g1 is None:
                    continue
                jump = float(np.linalg.norm(g1 - g0))
                if jump > worst:
                    worst, arg = jump, {"u": u, "neighbour": v, "jump": jump}
    ok = worst <= tol
    return CheckReport("gradient-continuity", "numeric gradient of vhat continuous", Verdict.PASS if ok else Verdict.FAIL,
                       {"points": len(pts), "probe_offset": delta}, {"max_jump": worst}, {"jump": tol},
                       [] if ok else [arg])


def audit_assumptions(
    spec: ProblemSpec,
    surface: ValueSurface,
    vf: Optional[ValueFunction] = None,
    grid_cfg: Optional[GridConfig] = None,
    pairs: int = 500,
    seed: int = 0,
) -> AuditBundle:
    """A4 (finite C0), B2 (constraints inactive at optima), convexity and, for convex vhat, C1 regularity."""
    vf = vf or ValueFunction(spec)
    reports = []
    c0 = estimate_C0(spec, grid_cfg, vf=vf)
    finite = np.isfinite(c0.value)
    reports.append(CheckReport("A4", "directional derivatives bounded below on S(u)",
                               Verdict.PASS if finite else Verdict.FAIL, {"problem": spec.name},
                               {"C0": c0.to_dict()}, {"margin": c0.margin}))
    reports.append(_audit_b2(spec, surface))
    conv = _audit_convexity(spec, vf, pairs, seed)
    reports.append(conv)
    if conv.verdict == Verdict.PASS:
        reports.append(_audit_differentiability(vf, surface))
        reports.append(_audit_c1(vf, surface, spec.m))
    else:
        note = ["vhat not convex on the probe; convex-case corollaries do not apply"]
        reports.append(CheckReport("differentiability", "vhat differentiable at interior grid points",
                                   Verdict.SKIPPED, notes=note))
        reports.append(CheckReport("gradient-continuity", "numeric gradient of vhat continuous", Verdict.SKIPPED,
                                   notes=note))
    return AuditBundle(spec.name, reports)
