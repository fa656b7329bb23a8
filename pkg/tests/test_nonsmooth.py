import json

import numpy as np
import pytest

from conftest import value_function
from optval.catalog import get_problem
from optval.evaluable import ExprFunction, OracleFunction
from optval.nonsmooth import (
    SUB,
    SUPER,
    check_inclusion,
    clarke_gradient,
    generalized_directional,
    generalized_solution_test,
    jet_interval_1d,
    jet_membership,
)
from optval.reports import Verdict, dumps


@pytest.fixture(scope="module")
def p3_oracle():
    return OracleFunction(get_problem("P3"))


@pytest.mark.parametrize("p,kind,want", [(0.5, SUPER, "certified"), (1.5, SUPER, "rejected"), (0.0, SUB, "rejected")])
def test_jet_membership_examples(p3_oracle, p, kind, want):
    assert jet_membership(p3_oracle, [0.0], [p], kind).verdict == want


def test_jet_schedule_truncated_near_boundary(p3_oracle):
    r = jet_membership(p3_oracle, [1.95], [-1.0], SUPER)
    assert r.verdict == "certified"
    jp, _ = jet_interval_1d(p3_oracle, [1.95])
    assert jp.truncated > 0 and any("dropped" in n for n in jp.notes)


def test_jet_interval_examples():
    jp, jm = jet_interval_1d(value_function("P3"), [0.0])
    assert jp.inner_box[0] <= -0.95 and jp.inner_box[1] >= 0.95
    assert jp.outer_box[0] >= -1.05 and jp.outer_box[1] <= 1.05
    assert jm.empty
    jp, jm = jet_interval_1d(value_function("P2"), [0.5])
    for j in (jp, jm):  # scan grid points carry float noise of order 1e-16
        assert abs(j.inner_box[0] + 1) <= 0.02 + 1e-12 and abs(j.inner_box[1] + 1) <= 0.02 + 1e-12
    jp, jm = jet_interval_1d(ExprFunction("abs(u1)", 1), [0.0])
    assert jp.empty
    assert jm.inner_box[0] <= -0.95 and jm.inner_box[1] >= 0.95


@pytest.mark.parametrize("label,u0", [("P1", 0.3), ("P2", 0.5), ("P2", 1.0), ("P4", -0.7), ("P5", 0.2), ("P6", 0.4),
                                      ("P3", 0.0)])
def test_jet_sandwich_and_singleton_subjet(label, u0):
    jp, jm = jet_interval_1d(value_function(label), [u0])
    if not jm.empty:
        assert jm.inner_box[1] - jm.inner_box[0] <= 2 * jm.tol_jet
    if not jp.empty and not jm.empty:
        gap = max(abs(p - q) for p in jp.certified_members[:, 0] for q in jm.certified_members[:, 0])
        assert gap <= 2 * max(jp.tol_jet, jm.tol_jet)


def test_clarke_examples():
    c = clarke_gradient(value_function("P3"), [0.0])
    np.testing.assert_allclose(sorted(c.hull_vertices[:, 0]), [-1.0, 1.0], atol=5e-2)
    c = clarke_gradient(value_function("P3"), [0.5])
    np.testing.assert_allclose(c.hull_vertices, [[-1.0]], atol=5e-2)
    c = clarke_gradient(value_function("P7"), [0.0, 0.0])
    assert c.hull_vertices.shape == (2, 2)
    got = sorted(map(tuple, np.round(c.hull_vertices, 6)))
    np.testing.assert_allclose(got, [(-1.0, -2.0), (1.0, 2.0)], atol=5e-2)


def test_clarke_is_deterministic():
    a = clarke_gradient(value_function("P3"), [0.0])
    b = clarke_gradient(value_function("P3"), [0.0])
    assert dumps(a.to_dict()) == dumps(b.to_dict())


def test_clarke_too_few_samples_is_inconclusive():
    from optval.nonsmooth import ClarkeConfig

    c = clarke_gradient(value_function("P3"), [0.0], ClarkeConfig(samples_per_dim=4))
    assert c.status == "inconclusive"


@pytest.mark.parametrize("w,u0,y,want", [("P3", 0.0, 1.0, 1.0), ("abs", 0.0, 1.0, 1.0), ("P2", 0.5, 1.0, -1.0)])
def test_generalized_directional_examples(w, u0, y, want):
    fn = ExprFunction("abs(u1)", 1) if w == "abs" else value_function(w)
    assert generalized_directional(fn, [u0], [y]) == pytest.approx(want, abs=1e-3)


@pytest.mark.parametrize("u0", [-1.5, -0.4, 0.0, 0.9, 1.7])
def test_convex_case_matches_gradient(u0):
    vf = value_function("P4")
    for y in (1.0, -1.0):
        assert abs(generalized_directional(vf, [u0], [y]) - 1.5 * u0 * y) <= 1e-3


def test_inclusion_examples():
    v3, v2 = value_function("P3"), value_function("P2")
    c3 = clarke_gradient(v3, [0.0])
    assert check_inclusion(jet_interval_1d(v3, [0.0]), c3).verdict == Verdict.PASS
    c2 = clarke_gradient(v2, [0.5])
    assert check_inclusion(jet_interval_1d(v2, [0.5]), c2).verdict == Verdict.PASS
    bad = check_inclusion(jet_interval_1d(v3, [0.0]), c2)
    assert bad.verdict == Verdict.FAIL and bad.witnesses


def test_generalized_solution_examples():
    p3, v3 = get_problem("P3"), value_function("P3")
    rep = generalized_solution_test(p3, v3, clarke_gradient(v3, [0.0]))
    assert rep.verdict == Verdict.PASS
    rows = {r["d"][0]: r for r in rep.residuals["per_direction"]}
    assert rows[1.0]["argmax_p"][0] == pytest.approx(-1.0, abs=5e-2)
    assert rows[-1.0]["argmax_p"][0] == pytest.approx(1.0, abs=5e-2)
    p2, v2 = get_problem("P2"), value_function("P2")
    rep = generalized_solution_test(p2, v2, clarke_gradient(v2, [0.5]))
    assert rep.verdict == Verdict.PASS and rep.residuals["max_abs_residual"] < 1e-3


def test_json_export():
    v3 = value_function("P3")
    jp, _ = jet_interval_1d(v3, [0.0])
    data = json.loads(dumps(jp.to_dict()))
    assert {"u0", "kind", "members", "tolerances"} <= set(data)
    data = json.loads(dumps(clarke_gradient(v3, [0.0]).to_dict()))
    assert {"u0", "kind", "members", "hull", "seed"} <= set(data)
