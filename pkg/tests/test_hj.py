import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LABELS, value_function
from optval.catalog import get_problem
from optval.derivatives import directions, estimate_C0, hamiltonian
from optval.evaluable import ExprFunction, Shifted
from optval.hj import (
    check_ae_formula,
    check_comparison,
    check_envelope,
    check_uniqueness,
    check_viscosity,
    check_viscosity_grid,
    estimate_lipschitz,
)
from optval.nonsmooth import clarke_gradient
from optval.problem import BoxDomain
from optval.reports import Verdict
from optval.solver import GridConfig, solve_surface


def test_viscosity_smooth_point():
    rep = check_viscosity(get_problem("P2"), value_function("P2"), [0.5], vf=value_function("P2"))
    assert rep.differentiable and rep.verdict == Verdict.PASS
    assert rep.max_abs_residual() < 1e-3


def test_viscosity_kink_uses_jets():
    rep = check_viscosity(get_problem("P3"), value_function("P3"), [0.0], vf=value_function("P3"))
    assert not rep.differentiable
    assert rep.sub_verdict == Verdict.PASS and rep.super_verdict == Verdict.PASS
    assert all(r["role"] == "sub" and r["p_source"] == "jet-member" for r in rep.records)
    assert any("vacuously" in n for n in rep.notes)


def test_viscosity_wrong_candidate():
    rep = check_viscosity(get_problem("P1"), ExprFunction("u1", 1), [0.0], vf=value_function("P1"))
    assert rep.sub_verdict == Verdict.FAIL
    worst = max(rep.records, key=lambda r: r["residual"])
    assert worst["d"][0] == pytest.approx(-1.0) and worst["residual"] == pytest.approx(1.0, abs=1e-3)


def test_viscosity_grid_p3():
    spec = get_problem("P3")
    rep = check_viscosity_grid(spec, value_function("P3"), GridConfig(41), vf=value_function("P3"))
    assert rep.verdict == Verdict.PASS and rep.residuals["pass_fraction"] == 1.0


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.9, 1.9), st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_subsolution_monotone_in_tolerance(u, t1, dt):
    spec, w = get_problem("P1"), ExprFunction("0.3*u1", 1)
    lo = check_viscosity(spec, w, [u], vf=value_function("P1"), tol=t1)
    hi = check_viscosity(spec, w, [u], vf=value_function("P1"), tol=t1 + dt)
    if lo.sub_verdict == Verdict.PASS:
        assert hi.sub_verdict == Verdict.PASS


def test_residual_vertex_max_dominates_hull():
    spec, vf = get_problem("P7"), value_function("P7")
    u0 = np.zeros(2)
    verts = clarke_gradient(vf, u0).hull_vertices
    sol = vf.solve(u0)
    rng = np.random.default_rng(7)
    for d in directions(2):
        H = hamiltonian(spec, sol, d).value
        vmax = max(-p @ d + H for p in verts)
        lam = rng.dirichlet(np.ones(len(verts)), size=100)
        pts = lam @ verts
        assert np.max(-pts @ d + H) <= vmax + 1e-12


def test_comparison_examples():
    p2, v2 = get_problem("P2"), value_function("P2")
    U1 = BoxDomain((-0.5,), (0.5,))
    assert check_comparison(p2, Shifted(v2, -0.1), v2, U1, vf=v2).verdict == Verdict.PASS
    rep = check_comparison(get_problem("P3"), value_function("P3"), value_function("P3"), vf=value_function("P3"))
    assert rep.verdict == Verdict.PASS and rep.residuals["interior_max_violation"] == 0.0
    rep = check_comparison(p2, Shifted(v2, 0.1), v2, U1, vf=v2)
    assert rep.verdict == Verdict.INCONCLUSIVE and "hypotheses not met" in rep.notes[0]
    assert "interior_max_violation" not in rep.residuals


def test_comparison_reports_h_continuity():
    rep = check_comparison(get_problem("P2"), value_function("P2"), value_function("P2"), vf=value_function("P2"))
    assert rep.residuals["H_continuity"] >= 0.0
    assert any("diagnostic" in n for n in rep.notes)


@pytest.mark.slow
@pytest.mark.parametrize("label", [lab for lab in LABELS if lab != "P6"])
@pytest.mark.parametrize("c", [1e-3, 1e-2, 1e-1])
def test_comparison_shift_invariant(label, c):
    spec, vf = get_problem(label), value_function(label)
    assert check_comparison(spec, Shifted(vf, -c), vf, vf=vf).verdict == Verdict.PASS


def test_comparison_p6_hypotheses_fail():
    # the P6 value function is not a viscosity solution near the origin
    spec, vf = get_problem("P6"), value_function("P6")
    rep = check_comparison(spec, Shifted(vf, -1e-2), vf, vf=vf)
    assert rep.verdict == Verdict.INCONCLUSIVE and "hypotheses not met" in rep.notes[0]


def test_uniqueness_examples():
    p2, p3 = get_problem("P2"), get_problem("P3")
    rep = check_uniqueness(p2, vf=value_function("P2"), eps_list=(0.1, 0.01, 0.0))
    assert rep.verdict == Verdict.PASS
    rows = rep.residuals["perturbations"]
    assert [r["fails_equation"] for r in rows] == [True, True, False]
    assert rows[2]["degenerate"]
    rep = check_uniqueness(p3, U1=BoxDomain((0.0,), (1.0,)), centers=[[0.5]], eps_list=(0.1,),
                           vf=value_function("P3"))
    assert rep.verdict == Verdict.PASS


def test_uniqueness_rejects_bump_touching_boundary():
    with pytest.raises(ValueError):
        check_uniqueness(get_problem("P2"), centers=[[0.95]], vf=value_function("P2"))


def test_lipschitz_examples():
    p3 = get_problem("P3")
    rep = estimate_lipschitz(p3, solve_surface(p3, GridConfig(101), vf=value_function("P3")),
                             estimate_C0(p3, GridConfig(41), vf=value_function("P3")))
    assert rep.global_empirical == pytest.approx(1.0, abs=0.02)
    assert rep.theory_bound == pytest.approx(2.1, abs=1e-6) and rep.verdict == Verdict.PASS
    p1 = get_problem("P1")
    rep = estimate_lipschitz(p1, solve_surface(p1, GridConfig(41), vf=value_function("P1")),
                             estimate_C0(p1, GridConfig(21), vf=value_function("P1")))
    assert rep.global_empirical == pytest.approx(0.0, abs=1e-9) and rep.theory_bound >= 1.0
    p4, box = get_problem("P4"), BoxDomain((-1.0,), (1.0,))
    grid = GridConfig(101, box)
    rep = estimate_lipschitz(p4, solve_surface(p4, grid, vf=value_function("P4")),
                             estimate_C0(p4, grid, vf=value_function("P4")))
    assert rep.global_empirical == pytest.approx(1.5, abs=0.03)
    assert rep.theory_bound == pytest.approx(2.625, abs=1e-3) and rep.verdict == Verdict.PASS
    assert rep.lambda_ == rep.Lambda == 1.0


@pytest.mark.parametrize("label", ["P1", "P2", "P3", "P4", "P7"])
def test_lipschitz_bound_dominance(label):
    spec, vf = get_problem(label), value_function(label)
    res = 41 if spec.m == 1 else 9
    rep = estimate_lipschitz(spec, solve_surface(spec, GridConfig(res), vf=vf), estimate_C0(spec, GridConfig(res), vf=vf))
    assert rep.global_empirical <= rep.theory_bound


@pytest.mark.parametrize("label,u,want", [("P4", 1.0, 1.5), ("P2", 0.5, -1.0)])
def test_envelope_examples(label, u, want):
    spec, vf = get_problem(label), value_function(label)
    rep = check_envelope(spec, vf.solve([u]), vf)
    assert rep.verdict == Verdict.PASS
    assert rep.residuals["grad_v"][0] == pytest.approx(want, abs=1e-3)


def test_envelope_skipped_at_kink():
    vf = value_function("P3")
    rep = check_envelope(get_problem("P3"), vf.solve([0.0]), vf)
    assert rep.verdict == Verdict.SKIPPED and rep.notes


@pytest.mark.parametrize("label,want_pass", [("P3", 100), ("P1", 101), ("P2", 99)])
def test_ae_formula_examples(label, want_pass):
    spec, vf = get_problem(label), value_function(label)
    rep = check_ae_formula(spec, solve_surface(spec, GridConfig(101), vf=vf), vf=vf)
    n_pass = sum(r["pass"] for r in rep.residuals["points"])
    assert rep.verdict == Verdict.PASS and n_pass >= want_pass
    if label == "P3":
        assert [r["u"][0] for r in rep.witnesses] == [0.0]
