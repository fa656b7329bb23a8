"""Checks of the first-order equation  -grad w . d + H(u, d) = 0  in the viscosity sense.

Residuals use ``R = -p.d + H(u0, d)`` with ``H(u, d) = inf_{x in S(u)} D_d f_x(u)``.
A subsolution needs ``R <= tol`` for every superjet member p, a
supersolution ``R >= -tol`` for every subjet member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .derivatives import C0Estimate, dir_derivs, directions, estimate_C0, hamiltonian
from .evaluable import TentPerturbation
from .nonsmooth import (
    SUB,
    SUPER,
    ClarkeConfig,
    JetConfig,
    clarke_gradient,
    jet_interval_1d,
    jet_members,
    jet_samples,
    numeric_gradient,
)
from .problem import BoxDomain, ProblemSpec, as_point
from .reports import CheckReport, Verdict, combine_verdicts
from .solver import GridConfig, SolutionSet, ValueFunction, ValueSurface

__all__ = [
    "REPORT_TOL",
    "GRAD_TOL",
    "ResidualReport",
    "check_viscosity",
    "check_viscosity_grid",
    "check_comparison",
    "check_uniqueness",
    "LipschitzReport",
    "estimate_lipschitz",
    "check_envelope",
    "check_ae_formula",
    "default_subbox",
    "jet_candidates",
]

REPORT_TOL = 5e-2
GRAD_TOL = 1e-3
AE_TOL = 5e-3
COMPARE_TOL = 1e-6
JET_CANDIDATE_STEP = 0.05


@dataclass
class ResidualReport:
    u0: np.ndarray
    records: list  # {d, role, p_source, p, residual}
    sub_verdict: str
    super_verdict: str
    tol: float
    differentiable: bool
    notes: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return combine_verdicts([self.sub_verdict, self.super_verdict])

    def max_abs_residual(self) -> float:
        return max((abs(r["residual"]) for r in self.records), default=0.0)

    def to_report(self, spec_name: str = "") -> CheckReport:
        bad = [r for r in self.records if (r["role"] == "sub" and r["residual"] > self.tol)
               or (r["role"] == "super" and r["residual"] < -self.tol)]
        return CheckReport(
            "hj-check",
            "viscosity sub/supersolution",
            self.verdict,
            {"problem": spec_name, "u0": self.u0},
            {"records": self.records, "sub": self.sub_verdict, "super": self.super_verdict,
             "differentiable": self.differentiable},
            {"residual": self.tol},
            bad,
            list(self.notes),
        )


def _side_verdict(residuals, role: str, tol: float, inconclusive_res=()) -> str:
    bad = (lambda r: r > tol) if role == "sub" else (lambda r: r < -tol)
    if any(bad(r) for r in residuals):
        return Verdict.FAIL
    if any(bad(r) for r in inconclusive_res):
        return Verdict.INCONCLUSIVE
    return Verdict.PASS


def jet_candidates(w, u0, clarke_cfg: Optional[ClarkeConfig]) -> tuple:
    """Square lattice (step 0.05) over the Clarke hull's bounding box widened by 0.1."""
    cs = clarke_gradient(w, u0, clarke_cfg)
    if cs.hull_vertices.shape[0] == 0:
        return None, cs
    lo, hi = cs.bbox()
    axes = [np.arange(math.floor((a - 0.1) / JET_CANDIDATE_STEP), math.ceil((b + 0.1) / JET_CANDIDATE_STEP) + 1)
            * JET_CANDIDATE_STEP for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1), cs


def check_viscosity(
    spec: ProblemSpec,
    w,
    u0,
    dirs=None,
    jets_cfg: Optional[JetConfig] = None,
    vf: Optional[ValueFunction] = None,
    tol: float = REPORT_TOL,
    clarke_cfg: Optional[ClarkeConfig] = None,
    hamiltonian_fn=None,
) -> ResidualReport:
    """Sub- and supersolution verdicts for ``w`` at ``u0``.

    At numerically differentiable points both use ``p = grad w(u0)``;
    elsewhere the certified jet members are used (an uncertified jet makes
    that side pass vacuously).  ``hamiltonian_fn(u, d)`` overrides the
    Hamiltonian, e.g. with the feasible-set variant.
    """
    u0 = as_point(u0, spec.m)
    vf = vf or ValueFunction(spec)
    dirs = directions(spec.m) if dirs is None else np.atleast_2d(np.asarray(dirs, dtype=float))
    if hamiltonian_fn is None:
        sol = vf.solve(u0)
        Hs = [hamiltonian(spec, sol, d).value for d in dirs]
    else:
        Hs = [hamiltonian_fn(u0, d) for d in dirs]
    notes: list = []
    g, ok = numeric_gradient(w, u0, 1e-6, GRAD_TOL)
    records = []
    if g is not None and ok:
        for d, H in zip(dirs, Hs):
            R = float(-g @ d + H)
            records.append({"d": d, "role": "sub", "p_source": "numeric-gradient", "p": g, "residual": R})
            records.append({"d": d, "role": "super", "p_source": "numeric-gradient", "p": g, "residual": R})
        res = [r["residual"] for r in records[::2]]
        return ResidualReport(u0, records, _side_verdict(res, "sub", tol), _side_verdict(res, "super", tol),
                              tol, True, notes)

    notes.append("not numerically differentiable; using certified jet members")
    jets_cfg = jets_cfg or JetConfig()
    samples = jet_samples(w, u0, jets_cfg)
    if spec.m == 1:
        jp, jm = jet_interval_1d(w, u0, jets_cfg, samples)
    else:
        cands, cs = jet_candidates(w, u0, clarke_cfg)
        if cands is None:
            notes.append("no Clarke samples to seed jet candidates")
            return ResidualReport(u0, [], Verdict.INCONCLUSIVE, Verdict.INCONCLUSIVE, tol, False, notes)
        jp = jet_members(w, u0, cands, SUPER, jets_cfg, samples)
        jm = jet_members(w, u0, cands, SUB, jets_cfg, samples)
    notes += jp.notes
    verdicts = {}
    for role, jet in (("sub", jp), ("super", jm)):
        res, unc = [], []
        for p in jet.certified_members:
            for d, H in zip(dirs, Hs):
                R = float(-p @ d + H)
                res.append(R)
                records.append({"d": d, "role": role, "p_source": "jet-member", "p": p, "residual": R})
        for p in jet.inconclusive:
            unc += [float(-p @ d + H) for d, H in zip(dirs, Hs)]
        verdicts[role] = _side_verdict(res, role, tol, unc)
        if jet.empty:
            notes.append(f"no {'superjet' if role == 'sub' else 'subjet'} member certified; "
                         f"{'sub' if role == 'sub' else 'super'}solution condition holds vacuously")
    return ResidualReport(u0, records, verdicts["sub"], verdicts["super"], tol, False, notes)


def check_viscosity_grid(
    spec: ProblemSpec,
    w,
    grid_cfg: Optional[GridConfig] = None,
    dirs=None,
    vf: Optional[ValueFunction] = None,
    tol: float = REPORT_TOL,
    min_fraction: float = 0.95,
) -> CheckReport:
    """check_viscosity at every grid point; pass iff >= 95% pass and smooth points have |R| <= tol."""
    grid_cfg = grid_cfg or GridConfig()
    vf = vf or ValueFunction(spec)
    pts = grid_cfg.points(spec)
    rows, failing = [], []
    n_pass = 0
    smooth_ok = True
    for u in pts:
        rep = check_viscosity(spec, w, u, dirs, vf=vf, tol=tol)
        passed = rep.verdict == Verdict.PASS
        n_pass += passed
        if rep.differentiable and rep.max_abs_residual() > tol:
            smooth_ok = False
        row = {"u": u, "sub": rep.sub_verdict, "super": rep.super_verdict, "differentiable": rep.differentiable,
               "max_abs_residual": rep.max_abs_residual()}
        rows.append(row)
        if not passed:
            failing.append(row)
    frac = n_pass / len(pts)
    verdict = Verdict.PASS if frac >= min_fraction and smooth_ok else Verdict.FAIL
    return CheckReport(
        "hj-check",
        "viscosity sub/supersolution over the grid",
        verdict,
        {"problem": spec.name, "grid": grid_cfg.to_dict(), "w": _describe(w)},
        {"pass_fraction": frac, "points": rows},
        {"residual": tol, "min_fraction": min_fraction},
        failing,
    )


def _describe(w) -> str:
    return w.describe() if hasattr(w, "describe") else repr(w)


def default_subbox(spec: ProblemSpec) -> BoxDomain:
    """The central half of U."""
    c, wd = spec.U.center, spec.U.width
    return BoxDomain(tuple(c - wd / 4), tuple(c + wd / 4))


def _subgrid(spec: ProblemSpec, U1: BoxDomain, resolution) -> tuple:
    cfg = GridConfig(resolution, U1)
    pts = cfg.points(spec)
    return pts, U1.boundary_mask(cfg.shape(spec)), cfg


def check_comparison(
    spec: ProblemSpec,
    w1,
    w2,
    U1: Optional[BoxDomain] = None,
    grid_cfg: Optional[GridConfig] = None,
    vf: Optional[ValueFunction] = None,
    dirs=None,
    tol: float = COMPARE_TOL,
    residual_tol: float = REPORT_TOL,
) -> CheckReport:
    """If ``w1 <= w2`` on the boundary of ``U1``, w1 is a subsolution and w2 a supersolution, then ``w1 <= w2`` inside.

    Hypotheses are checked on the grid first; when one fails the report says
    so and no interior verdict is issued.
    """
    U1 = U1 or default_subbox(spec)
    vf = vf or ValueFunction(spec)
    res = (grid_cfg.resolution if grid_cfg else (21 if spec.m == 1 else 7))
    pts, bmask, cfg = _subgrid(spec, U1, res)
    inputs = {"problem": spec.name, "U1": U1.to_dict(), "grid": cfg.to_dict(), "w1": _describe(w1), "w2": _describe(w2)}
    tols = {"comparison": tol, "residual": residual_tol}
    d1 = np.array([w1(u) for u in pts])
    d2 = np.array([w2(u) for u in pts])
    gap = d1 - d2
    bgap = gap[bmask]
    kb = int(np.argmax(bgap))
    residuals = {"boundary_max_violation": float(bgap[kb]), "boundary_argmax": pts[bmask][kb]}
    if bgap[kb] > tol:
        return CheckReport("comparison", "comparison principle", Verdict.INCONCLUSIVE, inputs, residuals, tols,
                           [{"u": pts[bmask][kb], "w1_minus_w2": float(bgap[kb])}],
                           ["hypotheses not met: w1 > w2 on the boundary of U1"])
    hyp_fail = []
    for u in pts[~bmask]:
        r1 = check_viscosity(spec, w1, u, dirs, vf=vf, tol=residual_tol)
        r2 = check_viscosity(spec, w2, u, dirs, vf=vf, tol=residual_tol)
        if r1.sub_verdict != Verdict.PASS:
            hyp_fail.append({"u": u, "which": "w1 subsolution", "verdict": r1.sub_verdict})
        if r2.super_verdict != Verdict.PASS:
            hyp_fail.append({"u": u, "which": "w2 supersolution", "verdict": r2.super_verdict})
    residuals["H_continuity"] = _h_continuity(spec, vf, pts, cfg.shape(spec), dirs)
    notes = ["H continuity along grid neighbours is a diagnostic only, not a verified hypothesis"]
    if hyp_fail:
        return CheckReport("comparison", "comparison principle", Verdict.INCONCLUSIVE, inputs, residuals, tols,
                           hyp_fail, ["hypotheses not met: sub/supersolution check failed at interior samples"] + notes)
    igap = gap[~bmask]
    ki = int(np.argmax(igap))
    residuals.update({"interior_max_violation": float(igap[ki]), "interior_argmax": pts[~bmask][ki]})
    verdict = Verdict.FAIL if igap[ki] > tol else Verdict.PASS
    wit = [{"u": pts[~bmask][ki], "w1_minus_w2": float(igap[ki])}] if verdict == Verdict.FAIL else []
    return CheckReport("comparison", "comparison principle", verdict, inputs, residuals, tols, wit, notes)


def _h_continuity(spec, vf, pts, shape, dirs) -> float:
    dirs = directions(spec.m) if dirs is None else np.atleast_2d(np.asarray(dirs, dtype=float))
    H = np.array([[hamiltonian(spec, vf.solve(u), d).value for d in dirs] for u in pts]).reshape(*shape, len(dirs))
    worst = 0.0
    for ax in range(spec.m):
        if shape[ax] > 1:
            worst = max(worst, float(np.max(np.abs(np.diff(H, axis=ax)))))
    return worst


def check_uniqueness(
    spec: ProblemSpec,
    U1: Optional[BoxDomain] = None,
    eps_list=(1e-1, 1e-2),
    centers=None,
    radius: float = 0.1,
    vf: Optional[ValueFunction] = None,
    dirs=None,
    tol: float = REPORT_TOL,
) -> CheckReport:
    """Tent bumps ``vhat + eps*phi`` keep the boundary data but must violate the equation at the peak."""
    U1 = U1 or default_subbox(spec)
    vf = vf or ValueFunction(spec)
    centers = [U1.center] if centers is None else [as_point(c, spec.m) for c in centers]
    rows, bad = [], []
    pts, bmask, _ = _subgrid(spec, U1, 21 if spec.m == 1 else 7)
    for c in centers:
        if not U1.contains(c, margin=radius):
            raise ValueError(f"bump at {c.tolist()} with radius {radius} does not vanish on the boundary of U1")
        for eps in eps_list:
            w = TentPerturbation(vf, eps, c, radius)
            bdiff = max(abs(w(u) - vf(u)) for u in pts[bmask])
            rep = check_viscosity(spec, w, c, dirs, vf=vf, tol=tol)
            fails_eq = rep.verdict == Verdict.FAIL
            row = {"center": c, "eps": eps, "boundary_diff": bdiff, "sub": rep.sub_verdict,
                   "super": rep.super_verdict, "fails_equation": fails_eq}
            if eps == 0:
                row["degenerate"] = True
                ok = rep.verdict == Verdict.PASS
            else:
                ok = fails_eq and bdiff <= COMPARE_TOL
            rows.append(row)
            if not ok:
                bad.append(row)
    verdict = Verdict.FAIL if bad else Verdict.PASS
    return CheckReport("uniqueness", "bump competitors violate the equation", verdict,
                       {"problem": spec.name, "U1": U1.to_dict(), "eps": list(eps_list), "radius": radius},
                       {"perturbations": rows}, {"residual": tol, "boundary": COMPARE_TOL}, bad)


@dataclass
class LipschitzReport:
    local: list
    global_empirical: float
    C0: C0Estimate
    theory_bound: float
    C1: float
    lambda_: float = 1.0
    Lambda: float = 1.0
    margin: float = 0.05

    @property
    def verdict(self) -> str:
        return Verdict.PASS if self.global_empirical <= self.theory_bound else Verdict.FAIL

    def to_report(self, spec_name: str = "") -> CheckReport:
        return CheckReport(
            "lipschitz",
            "local Lipschitz bound",
            self.verdict,
            {"problem": spec_name, "lambda": self.lambda_, "Lambda": self.Lambda},
            {"global_empirical": self.global_empirical, "theory_bound": self.theory_bound, "C0": self.C0.to_dict(),
             "C1": self.C1, "local": self.local},
            {"margin": self.margin},
        )


def _pairwise_max_quotient(pts: np.ndarray, vals: np.ndarray) -> float:
    diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    dv = np.abs(vals[:, None] - vals[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(diff > 0, dv / diff, 0.0)
    return float(q.max()) if q.size else 0.0


def estimate_lipschitz(
    spec: ProblemSpec,
    surface: ValueSurface,
    c0: Optional[C0Estimate] = None,
    radius: Optional[float] = None,
    margin: float = 0.05,
    local_stride: int = 10,
) -> LipschitzReport:
    """Empirical constants from grid pairs, against ``(1 + C0) * (1 + margin)``."""
    pts, vals = surface.grid, surface.values
    if c0 is None:
        c0 = estimate_C0(spec)
    radius = radius or float(0.1 * np.min(pts.max(axis=0) - pts.min(axis=0)))
    if len(pts) <= 4000:
        glob = _pairwise_max_quotient(pts, vals)
    else:
        glob = max(_pairwise_max_quotient(pts[i:i + 2000], vals[i:i + 2000]) for i in range(0, len(pts), 1000))
    local = []
    for i in range(0, len(pts), max(1, local_stride)):
        near = np.linalg.norm(pts - pts[i], axis=1) <= radius
        local.append({"u0": pts[i], "radius": radius, "empirical": _pairwise_max_quotient(pts[near], vals[near])})
    bound = (1 + c0.value) * (1 + margin)
    return LipschitzReport(local, glob, c0, bound, (1 + c0.value) / 1.0 + margin, margin=margin)


def check_envelope(
    spec: ProblemSpec,
    sol: SolutionSet,
    w=None,
    dirs=None,
    tol: float = GRAD_TOL,
) -> CheckReport:
    """grad v(u) = grad_u f(x, u) for every optimal x, at a differentiable u."""
    w = w or ValueFunction(spec)
    u = sol.u
    dirs = directions(spec.m) if dirs is None else np.atleast_2d(np.asarray(dirs, dtype=float))
    inputs = {"problem": spec.name, "u": u, "reps": sol.reps}
    tols = {"spread": tol, "gradient": tol}
    g, ok = numeric_gradient(w, u, 1e-6, GRAD_TOL)
    if g is None or not ok:
        return CheckReport("envelope", "envelope formula", Verdict.SKIPPED, inputs, tolerances=tols,
                           notes=["not numerically differentiable at u; envelope formula not applicable"])
    spreads = []
    for d in dirs:
        vals = dir_derivs(spec, sol.reps, u, d)
        spreads.append(float(vals.max() - vals.min()))
    eye = np.eye(spec.m)
    grads_f = np.stack([dir_derivs(spec, sol.reps, u, e) for e in eye], axis=1)  # (R, m)
    errs = np.linalg.norm(grads_f - g[None, :], axis=1)
    spread = max(spreads)
    err = float(errs.max())
    verdict = Verdict.PASS if spread <= tol and err <= tol else Verdict.FAIL
    return CheckReport("envelope", "envelope formula", verdict, inputs,
                       {"spread": spread, "gradient_error": err, "grad_v": g, "grad_u_f": grads_f}, tols)


def check_ae_formula(
    spec: ProblemSpec,
    surface: ValueSurface,
    dirs=None,
    w=None,
    vf: Optional[ValueFunction] = None,
    tol: float = AE_TOL,
    min_fraction: float = 0.95,
) -> CheckReport:
    """Fraction of grid points where w is differentiable and grad w . d = H(u, d) for every d."""
    vf = vf or ValueFunction(spec)
    w = w or vf
    dirs = directions(spec.m) if dirs is None else np.atleast_2d(np.asarray(dirs, dtype=float))
    rows, bad = [], []
    for u, sol in zip(surface.grid, surface.solutions):
        g, ok = numeric_gradient(w, u, 1e-6, GRAD_TOL)
        if g is None or not ok:
            row = {"u": u, "differentiable": False, "max_error": None}
        else:
            errs = [abs(float(g @ d) - hamiltonian(spec, sol, d).value) for d in dirs]
            row = {"u": u, "differentiable": True, "max_error": max(errs)}
        row["pass"] = row["differentiable"] and row["max_error"] <= tol
        rows.append(row)
        if not row["pass"]:
            bad.append(row)
    frac = sum(r["pass"] for r in rows) / len(rows)
    verdict = Verdict.PASS if frac >= min_fraction else Verdict.FAIL
    return CheckReport("ae-check", "a.e. gradient formula", verdict, {"problem": spec.name, "points": len(rows)},
                       {"pass_fraction": frac, "points": rows}, {"error": tol, "min_fraction": min_fraction}, bad)
