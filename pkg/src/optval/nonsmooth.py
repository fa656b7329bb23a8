"""Viscosity jets, the Clarke generalized gradient and the tests built on them.

Everything here works for any evaluable ``w``: a callable ``u -> float``
that may carry a ``domain`` box (the computed value function, a closed-form
oracle or a user expression).  Jets and hulls are numerical verdicts with
tolerance bands, never exact sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .derivatives import directions, hamiltonian
from .hull import convex_hull, hull_distance
from .problem import ProblemSpec, as_point
from .reports import CheckReport, Verdict

__all__ = [
    "JetConfig",
    "JetSamples",
    "JetMembership",
    "JetEstimate",
    "jet_samples",
    "jet_membership",
    "jet_members",
    "jet_interval_1d",
    "ClarkeConfig",
    "ClarkeSet",
    "numeric_gradient",
    "clarke_gradient",
    "directional_quotients",
    "generalized_directional",
    "check_inclusion",
    "generalized_solution_test",
    "SUPER",
    "SUB",
]

SUPER = "super"
SUB = "sub"


def _in_domain(w, u) -> bool:
    dom = getattr(w, "domain", None)
    return dom is None or dom.contains(u)


# -- jets ---------------------------------------------------------------------


# Denser than the default net: a covector at distance delta from J+ across a kink
# line survives when |grad| * sin(half spacing) > delta, so 2-D needs ~0.35 degree half spacing.
JET_DIR_COUNT = {2: 512}


@dataclass(frozen=True)
class JetConfig:
    radii: tuple = tuple(0.1 * 2.0**-k for k in range(9))
    dir_count: Optional[int] = None
    tol_base: float = 1e-2
    scan_step: float = 1e-2

    def tol(self, p) -> float:
        return self.tol_base * (1.0 + float(np.linalg.norm(np.atleast_1d(p))))

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "dir_count": self.dir_count,
            "tol_base": self.tol_base,
            "scan_step": self.scan_step,
        }


@dataclass(frozen=True)
class JetSamples:
    """Values of ``w`` on the shells ``u0 + r_k * d``; reused for every covector tested."""

    u0: np.ndarray
    w0: float
    radii: np.ndarray  # (K,)
    dirs: np.ndarray  # (D, m)
    values: np.ndarray  # (K, D)
    truncated: int  # outer shells dropped because they left the domain

    def quotients(self, ps) -> np.ndarray:
        """Remainder quotients for covectors ``ps`` (N, m); shape (N, K, D)."""
        ps = np.atleast_2d(np.asarray(ps, dtype=float))
        lin = ps @ self.dirs.T  # (N, D)
        return (self.values[None, :, :] - self.w0) / self.radii[None, :, None] - lin[:, None, :]

    def local_lipschitz(self) -> float:
        return float(np.max(np.abs(self.values - self.w0) / self.radii[:, None]))


def jet_samples(w, u0, cfg: Optional[JetConfig] = None) -> JetSamples:
    cfg = cfg or JetConfig()
    u0 = as_point(u0)
    dirs = directions(u0.size, cfg.dir_count or JET_DIR_COUNT.get(u0.size))
    kept, rows, dropped = [], [], 0
    for r in cfg.radii:
        pts = u0 + r * dirs
        if not all(_in_domain(w, p) for p in pts):
            dropped += 1
            continue
        kept.append(r)
        rows.append([w(p) for p in pts])
    return JetSamples(
        u0=u0,
        w0=float(w(u0)),
        radii=np.array(kept, dtype=float),
        dirs=dirs,
        values=np.array(rows, dtype=float).reshape(len(kept), len(dirs)),
        truncated=dropped,
    )


@dataclass(frozen=True)
class JetMembership:
    p: np.ndarray
    kind: str
    verdict: str  # certified | rejected | inconclusive
    shell_values: np.ndarray  # per-shell max (super) or min (sub) of the quotient
    tol: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "kind": self.kind,
            "verdict": self.verdict,
            "shell_values": self.shell_values,
            "tol": self.tol,
            "reason": self.reason,
        }


def _classify(shell: np.ndarray, tol: float) -> tuple:
    """Verdict from a per-shell trace already oriented so that ``<= tol`` means member."""
    if shell.size < 2:
        return "inconclusive", "fewer than two shells inside the domain"
    steps = np.diff(shell)
    if np.any(steps > tol) and np.any(steps < -tol):
        return "inconclusive", "non-monotone shell trend"
    a, b = shell[-2], shell[-1]
    if a <= tol and b <= tol:
        return "certified", ""
    if a > tol and b > tol:
        return "rejected", ""
    return "inconclusive", "innermost shells disagree"


def _memberships(samples: JetSamples, ps, kind: str, cfg: JetConfig) -> list:
    ps = np.atleast_2d(np.asarray(ps, dtype=float))
    q = samples.quotients(ps)
    if kind == SUPER:
        shells = q.max(axis=2)
        oriented = shells
    elif kind == SUB:
        shells = q.min(axis=2)
        oriented = -shells
    else:
        raise ValueError(f"kind must be {SUPER!r} or {SUB!r}")
    out = []
    for p, tr, tr_or in zip(ps, shells, oriented):
        tol = cfg.tol(p)
        verdict, reason = _classify(tr_or, tol)
        out.append(JetMembership(p.copy(), kind, verdict, tr, tol, reason))
    return out


def jet_membership(w, u0, p, kind: str = SUPER, cfg: Optional[JetConfig] = None, samples=None) -> JetMembership:
    """Is ``p`` in the super- (``kind='super'``) or subjet of ``w`` at ``u0``?"""
    cfg = cfg or JetConfig()
    samples = samples or jet_samples(w, u0, cfg)
    return _memberships(samples, as_point(p, samples.u0.size)[None, :], kind, cfg)[0]


@dataclass
class JetEstimate:
    u0: np.ndarray
    kind: str
    certified_members: np.ndarray  # (k, m)
    rejected: np.ndarray
    inconclusive: np.ndarray
    tol_jet: float
    radius_schedule: list
    inner_box: Optional[tuple] = None
    outer_box: Optional[tuple] = None
    truncated: int = 0
    notes: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        """No candidate certified on the scan grid (not a proof of emptiness)."""
        return self.certified_members.shape[0] == 0

    def to_dict(self) -> dict:
        return {
            "u0": self.u0,
            "kind": self.kind,
            "members": self.certified_members,
            "rejected_count": int(self.rejected.shape[0]),
            "inconclusive": self.inconclusive,
            "inner_box": self.inner_box,
            "outer_box": self.outer_box,
            "tolerances": {"tol_jet": self.tol_jet},
            "radius_schedule": self.radius_schedule,
            "truncated_shells": self.truncated,
            "notes": self.notes,
        }


def jet_members(w, u0, candidates, kind: str, cfg: Optional[JetConfig] = None, samples=None) -> JetEstimate:
    """Certify/reject every candidate covector in ``candidates`` (N, m)."""
    cfg = cfg or JetConfig()
    samples = samples or jet_samples(w, u0, cfg)
    m = samples.u0.size
    cands = np.asarray(candidates, dtype=float).reshape(-1, m)
    res = _memberships(samples, cands, kind, cfg)
    pick = lambda tag: np.array([r.p for r in res if r.verdict == tag]).reshape(-1, m)  # noqa: E731
    notes = []
    if samples.truncated:
        notes.append(f"{samples.truncated} outer shells dropped near the domain boundary")
    tol_jet = max((r.tol for r in res), default=cfg.tol_base)
    return JetEstimate(
        u0=samples.u0,
        kind=kind,
        certified_members=pick("certified"),
        rejected=pick("rejected"),
        inconclusive=pick("inconclusive"),
        tol_jet=tol_jet,
        radius_schedule=samples.radii.tolist(),
        truncated=samples.truncated,
        notes=notes,
    )


def jet_interval_1d(w, u0, cfg: Optional[JetConfig] = None, samples=None) -> tuple:
    """Scan ``p`` on a 1e-2 lattice over ``[-P, P]`` and bracket both jets.

    Returns ``(J_plus, J_minus)``.  ``inner_box`` is the hull of certified
    points, ``outer_box`` the hull of non-rejected points widened by one step.
    """
    cfg = cfg or JetConfig()
    u0 = as_point(u0, 1)
    samples = samples or jet_samples(w, u0, cfg)
    P = samples.local_lipschitz() + 1.0
    k = int(math.ceil(P / cfg.scan_step))
    ps = (np.arange(-k, k + 1) * cfg.scan_step)[:, None]
    out = []
    for kind in (SUPER, SUB):
        est = jet_members(w, u0, ps, kind, cfg, samples)
        est.tol_jet = cfg.tol(P)
        c = est.certified_members[:, 0]
        if c.size:
            est.inner_box = (float(c.min()), float(c.max()))
        alive = np.concatenate([c, est.inconclusive[:, 0]])
        if alive.size:
            est.outer_box = (float(alive.min() - cfg.scan_step), float(alive.max() + cfg.scan_step))
        est.notes.append(f"scan over [-{P:.6g}, {P:.6g}] at step {cfg.scan_step:g}")
        out.append(est)
    return tuple(out)


# -- Clarke generalized gradient ---------------------------------------------


@dataclass(frozen=True)
class ClarkeConfig:
    radii: tuple = (1e-2, 5e-3, 2.5e-3)
    samples_per_dim: int = 64
    h: float = 1e-6
    asym_tol: float = 1e-3
    cluster_tol: float = 1e-2
    min_valid: int = 8
    seed: int = 0
    lipschitz_cap: float = 1e6

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "samples_per_dim": self.samples_per_dim,
            "h": self.h,
            "asym_tol": self.asym_tol,
            "cluster_tol": self.cluster_tol,
            "min_valid": self.min_valid,
            "seed": self.seed,
        }


def numeric_gradient(w, u, h: float = 1e-6, asym_tol: float = 1e-3):
    """Central-difference gradient and whether every axis passed the asymmetry test.

    The test is ``|forward - backward| <= asym_tol * (1 + |forward|)`` per axis.
    Returns ``(grad, ok)``; ``grad`` is None if a stencil point leaves the domain.
    """
    u = as_point(u)
    w0 = w(u)
    g = np.empty(u.size)
    ok = True
    for i in range(u.size):
        e = np.zeros(u.size)
        e[i] = h
        if not (_in_domain(w, u + e) and _in_domain(w, u - e)):
            return None, False
        fwd = (w(u + e) - w0) / h
        bwd = (w0 - w(u - e)) / h
        ok = ok and abs(fwd - bwd) <= asym_tol * (1 + abs(fwd))
        g[i] = 0.5 * (fwd + bwd)
    return g, ok


@dataclass
class ClarkeSet:
    u0: np.ndarray
    sampled_gradients: np.ndarray  # valid gradients at the innermost radius
    hull_vertices: np.ndarray
    radius: float
    sample_count: int
    seed: int
    status: str = "ok"  # ok | inconclusive
    valid_counts: dict = field(default_factory=dict)
    clusters: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def bbox(self) -> tuple:
        return self.hull_vertices.min(axis=0), self.hull_vertices.max(axis=0)

    def to_dict(self) -> dict:
        return {
            "u0": self.u0,
            "kind": "clarke",
            "members": self.clusters,
            "hull": self.hull_vertices,
            "radius": self.radius,
            "sample_count": self.sample_count,
            "valid_counts": self.valid_counts,
            "seed": self.seed,
            "status": self.status,
            "notes": self.notes,
        }


def _ball_samples(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    """Uniform points in the unit ball of R^m."""
    z = rng.standard_normal((count, m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * rng.random((count, 1)) ** (1.0 / m)


def _greedy_clusters(points: np.ndarray, tol: float) -> np.ndarray:
    centers: list = []
    members: list = []
    for g in points:
        for k, c in enumerate(centers):
            if np.linalg.norm(g - c) <= tol:
                members[k].append(g)
                centers[k] = np.mean(members[k], axis=0)
                break
        else:
            centers.append(g.copy())
            members.append([g])
    return np.array(centers).reshape(-1, points.shape[1])


def clarke_gradient(w, u0, cfg: Optional[ClarkeConfig] = None) -> ClarkeSet:
    """Convex hull of clustered gradients sampled near ``u0`` on shrinking balls."""
    cfg = cfg or ClarkeConfig()
    u0 = as_point(u0)
    m = u0.size
    count = cfg.samples_per_dim * m
    rng = np.random.default_rng(cfg.seed)
    notes: list = []
    w0 = w(u0)
    valid_counts = {}
    innermost = np.empty((0, m))
    max_quot = 0.0
    for r in cfg.radii:
        pts = u0 + r * _ball_samples(rng, count, m)
        grads = []
        for p in pts:
            if not _in_domain(w, p):
                continue
            dist = np.linalg.norm(p - u0)
            if dist > 0:
                max_quot = max(max_quot, abs(w(p) - w0) / dist)
            g, ok = numeric_gradient(w, p, cfg.h, cfg.asym_tol)
            if g is not None and ok:
                grads.append(g)
        valid_counts[f"{r:g}"] = len(grads)
        innermost = np.array(grads).reshape(-1, m)
    status = "ok"
    if not math.isfinite(max_quot) or max_quot > cfg.lipschitz_cap:
        status = "inconclusive"
        notes.append(f"difference quotients near u0 look unbounded ({max_quot:.3g})")
    if innermost.shape[0] < cfg.min_valid:
        status = "inconclusive"
        notes.append(f"only {innermost.shape[0]} valid gradient samples at the innermost radius")
    if innermost.shape[0]:
        clusters = _greedy_clusters(innermost, cfg.cluster_tol)
        hull = convex_hull(clusters)
    else:
        clusters = np.empty((0, m))
        hull = np.empty((0, m))
    return ClarkeSet(
        u0=u0,
        sampled_gradients=innermost,
        hull_vertices=hull,
        radius=cfg.radii[-1],
        sample_count=count,
        seed=cfg.seed,
        status=status,
        valid_counts=valid_counts,
        clusters=clusters,
        notes=notes,
    )


# -- generalized directional derivative ---------------------------------------

GD_STEPS = (1e-3, 5e-4, 2.5e-4)


def directional_quotients(w, u0, y, steps: Sequence[float] = GD_STEPS, ball_factor: float = 5.0,
                          count: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """Max of ``(w(u + h y) - w(u)) / h`` over a jittered ball of radius ``ball_factor * h``, per step."""
    u0 = as_point(u0)
    y = as_point(y, u0.size)
    m = u0.size
    z = _ball_samples(np.random.default_rng(seed), count or 64 * m, m)
    z = np.vstack([np.zeros((1, m)), z])
    if m == 1:
        z = np.vstack([z, np.linspace(-1, 1, 21)[:, None]])
    out = []
    for h in steps:
        best = -math.inf
        for zz in z:
            u = u0 + ball_factor * h * zz
            if not (_in_domain(w, u) and _in_domain(w, u + h * y)):
                continue
            best = max(best, (w(u + h * y) - w(u)) / h)
        out.append(best)
    return np.array(out)


def generalized_directional(w, u0, y, steps: Sequence[float] = GD_STEPS, ball_factor: float = 5.0,
                            count: Optional[int] = None, seed: int = 0) -> float:
    """Estimate of the Clarke derivative ``D0 w(u0) y``.

    The sampled max at step h is biased by O(h) (the ball also shrinks with
    h); two Richardson levels over h, h/2, h/4 remove the first two orders.
    """
    M = directional_quotients(w, u0, y, steps, ball_factor, count, seed)
    if len(M) != 3:
        return float(M.max())
    return float((M[0] - 6 * M[1] + 8 * M[2]) / 3)


# -- tests built on jets and hulls ---------------------------------------------

INCLUSION_TOL = 5e-2
GENERALIZED_TOL = 5e-2


def check_inclusion(jets, clarke: ClarkeSet, tol: float = INCLUSION_TOL) -> CheckReport:
    """Every certified jet member must lie within ``tol`` of the Clarke hull."""
    jets = [jets] if isinstance(jets, JetEstimate) else list(jets)
    inputs = {"u0": clarke.u0, "hull": clarke.hull_vertices, "jets": [j.kind for j in jets]}
    if not clarke.ok or clarke.hull_vertices.shape[0] == 0:
        return CheckReport("inclusion", "jets within generalized gradient", Verdict.INCONCLUSIVE, inputs,
                           tolerances={"distance": tol}, notes=list(clarke.notes))
    residuals, bad = [], []
    for j in jets:
        for p in j.certified_members:
            dist = hull_distance(p, clarke.hull_vertices)
            residuals.append({"kind": j.kind, "p": p, "distance": dist})
            if dist > tol:
                bad.append({"kind": j.kind, "p": p, "distance": dist})
    verdict = Verdict.FAIL if bad else Verdict.PASS
    notes = [] if residuals else ["no certified jet members; inclusion holds vacuously"]
    return CheckReport("inclusion", "jets within generalized gradient", verdict, inputs,
                       {"max_distance": max((r["distance"] for r in residuals), default=0.0), "members": residuals},
                       {"distance": tol}, bad, notes)


def generalized_solution_test(spec: ProblemSpec, sol_provider, clarke: ClarkeSet, dirs=None,
                              tol: float = GENERALIZED_TOL) -> CheckReport:
    """``max_{p in hull} (-p.d + H(u0, d))`` must vanish for every sampled ``d``.

    The residual is affine in p so its max over the hull sits at a vertex.
    """
    dirs = directions(spec.m) if dirs is None else np.atleast_2d(np.asarray(dirs, dtype=float))
    inputs = {"problem": spec.name, "u0": clarke.u0, "hull": clarke.hull_vertices, "dir_count": len(dirs)}
    if not clarke.ok or clarke.hull_vertices.shape[0] == 0:
        return CheckReport("generalized-solution", "max over generalized gradient vanishes", Verdict.INCONCLUSIVE,
                           inputs, tolerances={"residual": tol}, notes=list(clarke.notes))
    sol = sol_provider.solve(clarke.u0)
    rows, bad = [], []
    for d in dirs:
        H = hamiltonian(spec, sol, d).value
        res = -clarke.hull_vertices @ d + H
        k = int(np.argmax(res))
        row = {"d": d, "H": H, "max_residual": float(res[k]), "argmax_p": clarke.hull_vertices[k]}
        rows.append(row)
        if abs(res[k]) > tol:
            bad.append(row)
    verdict = Verdict.FAIL if bad else Verdict.PASS
    worst = max((abs(r["max_residual"]) for r in rows), default=0.0)
    return CheckReport("generalized-solution", "max over generalized gradient vanishes", verdict, inputs,
                       {"max_abs_residual": worst, "per_direction": rows}, {"residual": tol}, bad)
