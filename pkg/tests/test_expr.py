import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optval.expr import (
    BinOp,
    DomainError,
    ExprSyntaxError,
    Neg,
    UnknownIdentifierError,
    VariableIndexError,
    eval_dual,
    evaluate,
    parse,
    pretty,
)


def test_precedence_and_unary_minus():
    e = parse("-x1*u1", 1, 1)
    assert isinstance(e.root, Neg) and isinstance(e.root.arg, BinOp)
    assert evaluate(e, [2.0], [3.0]) == -6.0
    assert evaluate(parse("x1^2*3", 1, 0), [2.0], []) == 12.0
    assert evaluate(parse("1-2-3", 0, 0), [], []) == -4.0
    assert evaluate(parse("8/2/2", 0, 0), [], []) == 2.0


def test_functions():
    e = parse("max(x1, u1, 0) + min(x1, u1) + abs(-2) + exp(0) + log(1)", 1, 1)
    assert evaluate(e, [1.0], [-3.0]) == 1.0 + -3.0 + 2.0 + 1.0 + 0.0


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1-u1^", 1, 1)
    assert info.value.offset == 6


@pytest.mark.parametrize("src", ["y1", "sin(x1)", "foo"])
def test_unknown_identifier(src):
    with pytest.raises(UnknownIdentifierError):
        parse(src, 1, 1)


def test_variable_index():
    with pytest.raises(VariableIndexError):
        parse("x2", 1, 1)
    with pytest.raises(VariableIndexError):
        parse("u1", 1, 0)


def test_domain_error_names_subexpression():
    e = parse("log(x1-u1)", 1, 1)
    with pytest.raises(DomainError) as info:
        evaluate(e, [1.0], [1.0])
    assert "log" in info.value.subexpr
    with pytest.raises(DomainError):
        evaluate(parse("1/x1", 1, 0), [0.0], [])


def test_array_matches_scalar():
    e = parse("abs(x1-u1)^2 + max(x1, 0.5*u1) - exp(-x1^2)", 1, 1)
    xs = np.linspace(-2, 2, 41)
    got = e.evaluate_array([xs], np.array([0.3]))
    want = [evaluate(e, [x], [0.3]) for x in xs]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


def test_dual_exact_one_sided_at_kinks():
    e = parse("abs(u1)", 0, 1)
    assert eval_dual(e, [], [0.0], [], [1.0]).deriv == 1.0
    assert eval_dual(e, [], [0.0], [], [-1.0]).deriv == 1.0
    assert eval_dual(e, [], [0.0], [], [1.0]).kink_flag
    m = parse("-abs(u1)", 0, 1)
    assert eval_dual(m, [], [0.0], [], [1.0]).deriv == -1.0
    mx = parse("max(u1, -u1)", 0, 1)
    assert eval_dual(mx, [], [0.0], [], [-1.0]).deriv == 1.0
    with pytest.raises(ValueError):
        eval_dual(e, [], [0.0], [], [0.0])


# -- property tests ---------------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["x1", "x2", "u1"]),
    st.integers(0, 9).map(str),
    st.sampled_from(["0.5", "2.25", "1e-1"]),
)


def _combine(children):
    bin_ = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]}{t[1]}{t[2]})")
    neg = children.map(lambda c: f"-{c}")
    powr = st.tuples(children, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}")
    call = st.tuples(st.sampled_from(["abs", "min", "max"]), children, children).map(
        lambda t: f"{t[0]}({t[1]})" if t[0] == "abs" else f"{t[0]}({t[1]},{t[2]})")
    return st.one_of(bin_, neg, powr, call)


expressions = st.recursive(_leaf, _combine, max_leaves=12)
points = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=150, deadline=None)
@given(expressions, points)
def test_pretty_round_trip(src, pt):
    e = parse(src, 2, 1)
    again = parse(pretty(e.root), 2, 1)
    assert again.root == e.root
    a = evaluate(e, pt[:2], pt[2:])
    b = evaluate(again, pt[:2], pt[2:])
    assert a == b or (math.isnan(a) and math.isnan(b))


@settings(max_examples=150, deadline=None)
@given(expressions, points, st.floats(-1, 1).filter(lambda t: abs(t) > 0.1))
def test_dual_matches_finite_difference_away_from_kinks(src, pt, d):
    e = parse(src, 2, 1)
    x, u = pt[:2], pt[2:]
    dv = eval_dual(e, x, u, [0.0, 0.0], [d])
    if dv.kink_flag:
        return
    h = 1e-6
    f0 = evaluate(e, x, u)
    fwd = (evaluate(e, x, [u[0] + h * d]) - f0) / h
    bwd = (f0 - evaluate(e, x, [u[0] - h * d])) / h
    scale = 1 + abs(dv.deriv) + abs(dv.value)
    if abs(fwd - bwd) > 1e-3 * scale:  # a kink within h of the point
        return
    fd = 0.5 * (fwd + bwd)
    assert abs(fd - dv.deriv) <= 1e-4 * scale


# -- worked examples --------------------------------------------------------------

from optval.expr import Const, Pow, Var  # noqa: E402


def test_parse_examples():
    assert parse("(x1-u1)^2", 1, 1).root == Pow(BinOp("-", Var("x", 1), Var("u", 1)), 2)
    assert parse("-x1*u1", 1, 1).root == Neg(BinOp("*", Var("x", 1), Var("u", 1)))
    assert Const(2.0) == Const(2.0)


@pytest.mark.parametrize("src,x,u,want", [("(x1-u1)^2", [3], [1], 4.0), ("-x1*u1", [1], [-2], 2.0),
                                          ("abs(x1)", [-0.5], [0.0], 0.5)])
def test_eval_examples(src, x, u, want):
    assert evaluate(parse(src, 1, 1), x, u) == want


def test_eval_dual_examples():
    r = eval_dual(parse("x1^2-2*x1*u1", 1, 1), [0.5], [0.5], [0.0], [1.0])
    assert (r.value, r.deriv, r.kink_flag) == (-0.25, -1.0, False)
    r = eval_dual(parse("abs(u1)", 0, 1), [], [0.0], [], [1.0])
    assert (r.value, r.deriv, r.kink_flag) == (0.0, 1.0, True)
    assert eval_dual(parse("-x1*u1", 1, 1), [1.0], [0.0], [0.0], [-1.0]).deriv == 1.0


def test_catalog_smooth_dual_vs_richardson():
    from optval.catalog import catalog
    from optval.derivatives import richardson_forward

    rng = np.random.default_rng(7)
    exprs = [p.f for p in catalog() if "abs" not in str(p.f)]
    for e in exprs:
        for _ in range(200):
            x = rng.uniform(-1, 1, e.n)
            u = rng.uniform(-1, 1, e.m)
            d = rng.standard_normal(e.m)
            dv = eval_dual(e, x, u, np.zeros(e.n), d)
            base = evaluate(e, x, u)
            fd = richardson_forward(lambda h: (evaluate(e, x, u + h * d) - base) / h)
            assert abs(fd - dv.deriv) <= 1e-6 * max(1.0, abs(dv.deriv))


def test_eval_is_pure():
    e = parse("exp(x1)*log(2+u1) - max(x1, u1)^3", 1, 1)
    a = [evaluate(e, [0.123], [0.456]) for _ in range(5)]
    assert len({v.hex() for v in a}) == 1
