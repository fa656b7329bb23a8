"""Command-line front end: ``optval <command> [options]``.

Every analysis command writes a run directory through the report store and
prints one verdict line.  Exit codes: 0 pass/certified, 3 inconclusive,
4 fail/not-optimal/rejected, 1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .catalog import catalog, get_problem
from .certify import Status, audit_assumptions, certify_not_optimal, certify_optimal, necessary_test
from .derivatives import directions, estimate_C0
from .evaluable import candidate
from .expr import ExprError
from .hj import (
    check_ae_formula,
    check_comparison,
    check_envelope,
    check_uniqueness,
    check_viscosity,
    check_viscosity_grid,
    estimate_lipschitz,
    jet_candidates,
)
from .nonsmooth import (
    SUB,
    SUPER,
    ClarkeConfig,
    JetConfig,
    check_inclusion,
    clarke_gradient,
    generalized_directional,
    generalized_solution_test,
    jet_interval_1d,
    jet_members,
    jet_samples,
)
from .problem import BoxDomain, ProblemSpec, as_point, load_problem, problem_from_dict, problem_to_dict
from .reports import CheckReport, Verdict, combine_verdicts, dumps
from .solver import GridConfig, ValueFunction, solve_surface, surface_to_csv
from .store import StoreError, default_root, new_manifest, save

EXIT = {Verdict.PASS: 0, Verdict.INCONCLUSIVE: 3, Verdict.FAIL: 4, Verdict.SKIPPED: 3}
STATUS_VERDICT = {
    Status.OPTIMAL: Verdict.PASS,
    Status.NOT_OPTIMAL: Verdict.FAIL,
    Status.REJECTED: Verdict.FAIL,
    Status.INCONCLUSIVE: Verdict.INCONCLUSIVE,
}
TOL_KEYS = ("residual", "gradient", "ae", "compare", "cert", "jet", "inclusion", "generalized")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    problem: object = "P3"  # catalog name, config path or inline dict
    grid: Optional[tuple] = None
    dirs: Optional[int] = None
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        if self.grid is not None and any(int(r) < 3 for r in self.grid):
            raise UsageError("grid resolutions must be at least 3 per axis")
        bad = set(self.tolerances) - set(TOL_KEYS)
        if bad:
            raise UsageError(f"unknown tolerance keys: {', '.join(sorted(bad))}")

    def resolve_problem(self) -> ProblemSpec:
        if isinstance(self.problem, dict):
            return problem_from_dict(self.problem)
        name = str(self.problem)
        if Path(name).suffix == ".json" or Path(name).is_file():
            return load_problem(name)
        try:
            return get_problem(name)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc

    def grid_cfg(self, spec: ProblemSpec, default_1d: int = 101, default_nd: int = 11, box=None) -> GridConfig:
        if self.grid is None:
            res = default_1d if spec.m == 1 else default_nd
        elif len(self.grid) == 1:
            res = int(self.grid[0])
        elif len(self.grid) == spec.m:
            res = tuple(int(r) for r in self.grid)
        else:
            raise UsageError(f"--grid needs 1 or {spec.m} resolutions")
        return GridConfig(res, box)

    def dirs_for(self, spec: ProblemSpec) -> np.ndarray:
        return directions(spec.m, self.dirs)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "grid": None if self.grid is None else list(self.grid),
            "dirs": self.dirs,
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
        }


# -- argument parsing -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _grid(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.lower().replace(",", "x").split("x"))
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}; use 101 or 21x21") from exc


def _box(text: str) -> BoxDomain:
    try:
        return BoxDomain.parse(text)
    except ValueError as exc:
        raise UsageError(f"bad box {text!r}; use lo:hi[,lo:hi]") from exc


def _tol_pairs(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--tol expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", help="catalog name (bilinear-box), label (P3) or JSON problem file")
    common.add_argument("--config", help="JSON run config (problem, grid, dirs, tolerances, seed, out)")
    common.add_argument("--grid", help="per-axis grid resolution, e.g. 101 or 21x21")
    common.add_argument("--dirs", type=int, help="direction-net size for m >= 2")
    common.add_argument("--seed", type=int, help="seed for sampling (default 0)")
    common.add_argument("--out", help="output root (default $OPTVAL_OUT or ./optval-out)")
    common.add_argument("--tol", action="append", metavar="KEY=VALUE", help=f"tolerance override; keys: {', '.join(TOL_KEYS)}")

    parser = _Parser(prog="optval", description="Numerical checks for optimal value functions of parametric problems.")
    parser.add_argument("--version", action="version", version=f"optval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, *args):
        p = sub.add_parser(name, parents=[common], help=help_)
        for a in args:
            a(p)
        return p

    u0 = lambda p, req=True: p.add_argument("--u0", required=req, help="parameter point, e.g. 0 or 0,0")  # noqa: E731
    x0 = lambda p: p.add_argument("--x0", required=True, help="candidate decision point")  # noqa: E731
    box = lambda p, req=True: p.add_argument("--box", required=req, help="box lo:hi[,lo:hi]")  # noqa: E731
    w = lambda p: p.add_argument("--w", help="candidate: vhat, oracle, vhat-0.1, or an expression in u1..um")  # noqa: E731

    sub.add_parser("list-problems", help="list the catalog", parents=[common])
    add("surface", "solve on the grid and write surface.csv")
    add("hj-check", "sub/supersolution residuals over the grid (or at --u0)", lambda p: u0(p, False), w)
    add("jets", "super- and subjet estimates at --u0", u0, w)
    add("clarke", "Clarke generalized gradient at --u0 with inclusion and generalized-solution tests", u0, w)
    add("lipschitz", "empirical Lipschitz constant vs the theoretical bound")
    add("envelope", "envelope formula at --u0 or over the grid", lambda p: u0(p, False))
    add("ae-check", "a.e. gradient formula over the grid")
    add("compare", "comparison principle for --w1 <= --w2 on --box",
        lambda p: p.add_argument("--w1", required=True), lambda p: p.add_argument("--w2", required=True),
        lambda p: box(p, False))
    add("uniqueness", "tent-bump competitors on --box", lambda p: box(p, False),
        lambda p: p.add_argument("--center", help="bump centre (default: box centre)"),
        lambda p: p.add_argument("--eps", default="0.1,0.01", help="bump heights"),
        lambda p: p.add_argument("--radius", type=float, default=0.1, help="bump radius"))
    add("certify-opt", "sufficient optimality certificate", u0, x0, box, w)
    add("certify-nonopt", "sufficient non-optimality certificate", u0, x0, box, w,
        lambda p: p.add_argument("--feasible-hamiltonian", action="store_true",
                                 help="use the infimum over the feasible set (needs no S(u))"))
    add("necessary", "necessary condition for x0 at u0", u0, x0)
    add("assumptions", "audit A4, B2, convexity and regularity")
    return parser


def run_config(args) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    tols = dict(data.get("tolerances", {}))
    tols.update(_tol_pairs(args.tol))
    grid = data.get("grid")
    if isinstance(grid, int):
        grid = (grid,)
    if args.grid:
        grid = _grid(args.grid)
    return RunConfig(
        problem=args.problem or data.get("problem", "P3"),
        grid=tuple(grid) if grid is not None else None,
        dirs=args.dirs if args.dirs is not None else data.get("dirs"),
        tolerances=tols,
        seed=args.seed if args.seed is not None else int(data.get("seed", 0)),
        out=args.out or data.get("out"),
    )


# -- commands ---------------------------------------------------------------------


@dataclass
class Outcome:
    report: CheckReport
    artifacts: dict = field(default_factory=dict)
    summary: str = ""
    exit_code: Optional[int] = None


def _witness(text: Optional[str], spec: ProblemSpec, vf: ValueFunction, default: str = "vhat"):
    return candidate(text or default, spec, vf)


def _point(text: str, dim: int, what: str) -> np.ndarray:
    vals = _floats(text)
    if len(vals) != dim:
        raise UsageError(f"{what} needs {dim} coordinates, got {len(vals)}")
    return np.array(vals)


def cmd_surface(spec, cfg: RunConfig, args, vf) -> Outcome:
    grid = cfg.grid_cfg(spec, 101, 21)
    surf = solve_surface(spec, grid, vf=vf)
    res, verdict = {"points": len(surf)}, Verdict.PASS
    if spec.oracle is not None:
        err = float(max(abs(v - spec.oracle.value(u)) for u, v in zip(surf.grid, surf.values)))
        res["max_oracle_error"] = err
        verdict = Verdict.PASS if err <= 1e-5 else Verdict.FAIL
    res["min"], res["max"] = float(surf.values.min()), float(surf.values.max())
    rep = CheckReport("surface", "value surface", verdict, {"problem": spec.name, "grid": grid.to_dict()}, res,
                      {"oracle": 1e-5})
    return Outcome(rep, {"surface.csv": surface_to_csv(surf)}, f"{len(surf)} points")


def cmd_hj_check(spec, cfg, args, vf) -> Outcome:
    w = _witness(args.w, spec, vf)
    tol = cfg.tol("residual", 5e-2)
    if args.u0:
        rr = check_viscosity(spec, w, _point(args.u0, spec.m, "--u0"), cfg.dirs_for(spec), vf=vf, tol=tol)
        return Outcome(rr.to_report(spec.name), summary=f"sub {rr.sub_verdict}, super {rr.super_verdict}")
    rep = check_viscosity_grid(spec, w, cfg.grid_cfg(spec), cfg.dirs_for(spec), vf=vf, tol=tol)
    return Outcome(rep, summary=f"{rep.residuals['pass_fraction']:.4f} of grid points pass")


def _jets(spec, w, u0, cfg: RunConfig):
    jcfg = JetConfig(dir_count=cfg.dirs, tol_base=cfg.tol("jet", 1e-2))
    samples = jet_samples(w, u0, jcfg)
    if spec.m == 1:
        return jet_interval_1d(w, u0, jcfg, samples)
    cands, _ = jet_candidates(w, u0, ClarkeConfig(seed=cfg.seed))
    if cands is None:
        raise RuntimeError("no valid Clarke samples to seed jet candidates")
    return jet_members(w, u0, cands, SUPER, jcfg, samples), jet_members(w, u0, cands, SUB, jcfg, samples)


def cmd_jets(spec, cfg, args, vf) -> Outcome:
    w = _witness(args.w, spec, vf)
    u0 = _point(args.u0, spec.m, "--u0")
    jp, jm = _jets(spec, w, u0, cfg)
    verdict = Verdict.INCONCLUSIVE if len(jp.radius_schedule) < 2 else Verdict.PASS
    rep = CheckReport("jets", "super/subjet estimates", verdict,
                      {"problem": spec.name, "u0": u0, "w": getattr(w, "describe", lambda: "w")(), "seed": cfg.seed},
                      {"J_plus": jp.to_dict(), "J_minus": jm.to_dict()}, {"tol_jet": max(jp.tol_jet, jm.tol_jet)},
                      notes=["an empty candidate list means no member was certified on the scan grid"])
    desc = lambda j: "none certified" if j.empty else (f"[{j.inner_box[0]:g}, {j.inner_box[1]:g}]"  # noqa: E731
                                                       if j.inner_box else f"{len(j.certified_members)} members")
    return Outcome(rep, summary=f"J+ {desc(jp)}, J- {desc(jm)}")


def cmd_clarke(spec, cfg, args, vf) -> Outcome:
    w = _witness(args.w, spec, vf)
    u0 = _point(args.u0, spec.m, "--u0")
    cs = clarke_gradient(w, u0, ClarkeConfig(seed=cfg.seed))
    jets = _jets(spec, w, u0, cfg)
    inc = check_inclusion(jets, cs, cfg.tol("inclusion", 5e-2))
    gen = generalized_solution_test(spec, vf, cs, cfg.dirs_for(spec), cfg.tol("generalized", 5e-2))
    d0 = {str(list(d)): generalized_directional(w, u0, d, seed=cfg.seed) for d in np.eye(spec.m)}
    verdict = Verdict.INCONCLUSIVE if not cs.ok else combine_verdicts([inc.verdict, gen.verdict])
    rep = CheckReport("clarke", "generalized gradient", verdict,
                      {"problem": spec.name, "u0": u0, "seed": cfg.seed, "w": getattr(w, "describe", lambda: "w")()},
                      {"clarke": cs.to_dict(), "inclusion": inc.to_dict(), "generalized_solution": gen.to_dict(),
                       "D0_axes": d0},
                      {"inclusion": inc.tolerances.get("distance"), "generalized": gen.tolerances.get("residual")},
                      notes=list(cs.notes))
    hull = np.round(cs.hull_vertices, 6).tolist()
    return Outcome(rep, summary=f"hull {hull}")


def _surface(spec, cfg, vf):
    grid = cfg.grid_cfg(spec)
    return grid, solve_surface(spec, grid, vf=vf)


def cmd_lipschitz(spec, cfg, args, vf) -> Outcome:
    grid, surf = _surface(spec, cfg, vf)
    c0 = estimate_C0(spec, grid, cfg.dirs, vf)
    lr = estimate_lipschitz(spec, surf, c0)
    rep = lr.to_report(spec.name)
    rep.inputs["grid"] = grid.to_dict()
    return Outcome(rep, {"surface.csv": surface_to_csv(surf)},
                   f"empirical {lr.global_empirical:.6g} vs bound {lr.theory_bound:.6g}")


def cmd_envelope(spec, cfg, args, vf) -> Outcome:
    tol = cfg.tol("gradient", 1e-3)
    if args.u0:
        rep = check_envelope(spec, vf.solve(_point(args.u0, spec.m, "--u0")), vf, cfg.dirs_for(spec), tol)
        return Outcome(rep)
    grid, surf = _surface(spec, cfg, vf)
    reports = [check_envelope(spec, s, vf, cfg.dirs_for(spec), tol) for s in surf.solutions]
    verdict = combine_verdicts(r.verdict for r in reports)
    checked = [r for r in reports if r.verdict != Verdict.SKIPPED]
    rep = CheckReport("envelope", "envelope formula over the grid", verdict,
                      {"problem": spec.name, "grid": grid.to_dict()},
                      {"checked": len(checked), "skipped": len(reports) - len(checked),
                       "max_spread": max((r.residuals["spread"] for r in checked), default=0.0),
                       "max_gradient_error": max((r.residuals["gradient_error"] for r in checked), default=0.0)},
                      {"spread": tol, "gradient": tol},
                      [r.inputs["u"] for r in reports if r.verdict == Verdict.FAIL])
    return Outcome(rep, summary=f"{len(checked)} differentiable points checked")


def cmd_ae_check(spec, cfg, args, vf) -> Outcome:
    _, surf = _surface(spec, cfg, vf)
    rep = check_ae_formula(spec, surf, cfg.dirs_for(spec), vf=vf, tol=cfg.tol("ae", 5e-3))
    return Outcome(rep, summary=f"{rep.residuals['pass_fraction']:.4f} of grid points pass")


def cmd_compare(spec, cfg, args, vf) -> Outcome:
    w1, w2 = _witness(args.w1, spec, vf), _witness(args.w2, spec, vf)
    U1 = _box(args.box) if args.box else None
    grid = GridConfig(cfg.grid[0]) if cfg.grid else None
    rep = check_comparison(spec, w1, w2, U1, grid, vf, cfg.dirs_for(spec), cfg.tol("compare", 1e-6),
                           cfg.tol("residual", 5e-2))
    return Outcome(rep, summary=rep.notes[0] if rep.verdict == Verdict.INCONCLUSIVE else "")


def cmd_uniqueness(spec, cfg, args, vf) -> Outcome:
    U1 = _box(args.box) if args.box else None
    centers = [_point(args.center, spec.m, "--center")] if args.center else None
    rep = check_uniqueness(spec, U1, tuple(_floats(args.eps)), centers, args.radius, vf, cfg.dirs_for(spec),
                           cfg.tol("residual", 5e-2))
    return Outcome(rep)


def _cert_outcome(cert, check: str) -> Outcome:
    rep = CheckReport(check, "certificate", STATUS_VERDICT[cert.status], {"u0": cert.u0, "x0": cert.x0,
                      "N": None if cert.N is None else cert.N.to_dict(), "witness": cert.witness},
                      {"status": cert.status, "certificate": cert.to_dict()}, {}, notes=list(cert.notes))
    return Outcome(rep, exit_code=cert.exit_code)


def _default_w(spec) -> str:
    return "oracle" if spec.oracle is not None else "vhat"


def cmd_certify_opt(spec, cfg, args, vf) -> Outcome:
    w = _witness(args.w, spec, vf, _default_w(spec))
    grid = GridConfig(cfg.grid[0]) if cfg.grid else None
    cert = certify_optimal(spec, _point(args.u0, spec.m, "--u0"), _point(args.x0, spec.n, "--x0"), _box(args.box),
                           w, grid, vf, cfg.dirs_for(spec), cfg.tol("cert", 1e-6))
    return _cert_outcome(cert, "certify-opt")


def cmd_certify_nonopt(spec, cfg, args, vf) -> Outcome:
    w = _witness(args.w, spec, vf, _default_w(spec))
    grid = GridConfig(cfg.grid[0]) if cfg.grid else None
    cert = certify_not_optimal(spec, _point(args.u0, spec.m, "--u0"), _point(args.x0, spec.n, "--x0"),
                               _box(args.box), w, grid, vf, cfg.dirs_for(spec), cfg.tol("cert", 1e-6),
                               args.feasible_hamiltonian)
    return _cert_outcome(cert, "certify-nonopt")


def cmd_necessary(spec, cfg, args, vf) -> Outcome:
    cert = necessary_test(spec, _point(args.u0, spec.m, "--u0"), _point(args.x0, spec.n, "--x0"),
                          cfg.dirs_for(spec), vf, cfg.tol("residual", 5e-2))
    return _cert_outcome(cert, "necessary")


def cmd_assumptions(spec, cfg, args, vf) -> Outcome:
    grid, surf = _surface(spec, cfg, vf)
    bundle = audit_assumptions(spec, surf, vf, grid, seed=cfg.seed)
    rep = bundle.to_report()
    rep.inputs.update({"grid": grid.to_dict(), "seed": cfg.seed})
    failing = rep.witnesses
    return Outcome(rep, {"surface.csv": surface_to_csv(surf)},
                   "all audits pass" if not failing else f"FAILED {', '.join(failing)}")


COMMANDS = {
    "surface": cmd_surface,
    "hj-check": cmd_hj_check,
    "jets": cmd_jets,
    "clarke": cmd_clarke,
    "lipschitz": cmd_lipschitz,
    "envelope": cmd_envelope,
    "ae-check": cmd_ae_check,
    "compare": cmd_compare,
    "uniqueness": cmd_uniqueness,
    "certify-opt": cmd_certify_opt,
    "certify-nonopt": cmd_certify_nonopt,
    "necessary": cmd_necessary,
    "assumptions": cmd_assumptions,
}

_RUN_KEYS = ("problem", "config", "grid", "dirs", "seed", "out", "tol", "command")


def _command_args(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _RUN_KEYS}


def list_problems(out=None) -> int:
    out = out or sys.stdout
    for i, p in enumerate(catalog(), 1):
        tag = "fixed" if p.constraints.fixed else "mapped"
        out.write(f"P{i}  {p.name:<16} n={p.n} m={p.m} {tag:<6} f = {p.f}   {p.description}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-problems":
        return list_problems()
    try:
        cfg = run_config(args)
        spec = cfg.resolve_problem()
        vf = ValueFunction(spec)
        outcome = COMMANDS[args.command](spec, cfg, args, vf)
        rep = outcome.report
        rep.inputs.setdefault("seed", cfg.seed)
        inputs = {"command": args.command, "args": _command_args(args), "run": cfg.to_dict(),
                  "problem": problem_to_dict(spec)}
        manifest = new_manifest(inputs, cfg.seed)
        artifacts = dict(outcome.artifacts)
        artifacts[f"reports/{args.command}.json"] = dumps(rep.to_dict())
        path = save(manifest, artifacts, cfg.out if cfg.out else default_root())
    except UsageError as exc:
        sys.stderr.write(f"optval: error: {exc}\n")
        return 1
    except (ValueError, KeyError, ExprError, StoreError, RuntimeError, ArithmeticError) as exc:
        sys.stderr.write(f"optval: {args.command} failed: {exc}\n")
        return 1
    code = outcome.exit_code if outcome.exit_code is not None else EXIT[rep.verdict]
    status = rep.residuals.get("status", rep.verdict) if isinstance(rep.residuals, dict) else rep.verdict
    extra = f" ({outcome.summary})" if outcome.summary else ""
    print(f"{args.command} {spec.name}: {status}{extra} run={manifest.run_id} dir={path}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
