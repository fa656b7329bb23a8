"""Analytic catalog of parametric problems with closed-form value functions."""

from __future__ import annotations

import numpy as np

from .expr import parse
from .problem import BoxDomain, Cone, ConstraintSet, Oracle, ProblemSpec, as_point

__all__ = ["catalog", "get_problem", "problem_names"]


def _scalar(u) -> float:
    return float(as_point(u)[0])


# P1
def _p1_v(u):
    return 0.0


def _p1_s(u):
    return [as_point(u).copy()]


def _p1_grad(u):
    return np.zeros(1)


# P2
def _p2_v(u):
    t = _scalar(u)
    if abs(t) <= 1:
        return -t * t
    return 1 - 2 * abs(t)


def _p2_s(u):
    return [np.array([min(1.0, max(-1.0, _scalar(u)))])]


def _p2_grad(u):
    t = _scalar(u)
    return np.array([-2 * t if abs(t) <= 1 else -2.0 * np.sign(t)])


# P3
def _p3_v(u):
    return -abs(_scalar(u))


def _p3_s(u):
    t = _scalar(u)
    if t == 0:
        return [np.array([-1.0]), np.array([1.0])]
    return [np.array([np.sign(t)])]


def _p3_grad(u):
    return np.array([-np.sign(_scalar(u))])


# P4
def _p4_v(u):
    return 0.75 * _scalar(u) ** 2


def _p4_s(u):
    return [np.array([-_scalar(u) / 2])]


def _p4_grad(u):
    return np.array([1.5 * _scalar(u)])


# P6
def _p6_v(u):
    return _scalar(u) ** 2


def _p6_s(u):
    return [np.array([_scalar(u) ** 2])]


def _p6_grad(u):
    return np.array([2 * _scalar(u)])


# P7
def _p7_s_val(u):
    u = as_point(u, 2)
    return float(u[0] + 2 * u[1])


def _p7_v(u):
    return -abs(_p7_s_val(u))


def _p7_s(u):
    s = _p7_s_val(u)
    if s == 0:
        return [np.array([-1.0]), np.array([1.0])]
    return [np.array([np.sign(s)])]


def _p7_grad(u):
    return -np.sign(_p7_s_val(u)) * np.array([1.0, 2.0])


def catalog() -> list:
    """The seven analytic test problems, in catalog order."""
    return [
        ProblemSpec(
            name="quad-shift",
            n=1,
            m=1,
            f=parse("(x1-u1)^2", 1, 1),
            X=BoxDomain((-10.0,), (10.0,)),
            U=BoxDomain((-5.0,), (5.0,)),
            oracle=Oracle(_p1_v, _p1_s, _p1_grad),
            search_window=True,
            description="perfect fit x = u, v identically zero",
        ),
        ProblemSpec(
            name="boxed-linquad",
            n=1,
            m=1,
            f=parse("x1^2-2*x1*u1", 1, 1),
            X=BoxDomain((-1.0,), (1.0,)),
            U=BoxDomain((-2.0,), (2.0,)),
            oracle=Oracle(_p2_v, _p2_s, _p2_grad),
            description="v = -u^2 inside [-1, 1], affine outside; C1",
        ),
        ProblemSpec(
            name="bilinear-box",
            n=1,
            m=1,
            f=parse("-x1*u1", 1, 1),
            X=BoxDomain((-1.0,), (1.0,)),
            U=BoxDomain((-2.0,), (2.0,)),
            oracle=Oracle(_p3_v, _p3_s, _p3_grad, clarke={(0.0,): [[-1.0], [1.0]]}),
            description="v = -|u|, concave kink at 0 with S(0) = [-1, 1]",
        ),
        ProblemSpec(
            name="jointly-convex",
            n=1,
            m=1,
            f=parse("x1^2+x1*u1+u1^2", 1, 1),
            X=BoxDomain((-10.0,), (10.0,)),
            U=BoxDomain((-2.0,), (2.0,)),
            oracle=Oracle(_p4_v, _p4_s, _p4_grad),
            search_window=True,
            description="convex problem, v = 3u^2/4",
        ),
        ProblemSpec(
            name="slater-ok",
            n=1,
            m=1,
            f=parse("(x1-u1)^2", 1, 1),
            X=BoxDomain((-3.0,), (3.0,)),
            U=BoxDomain((-0.5,), (0.5,)),
            constraints=ConstraintSet("mapped", (parse("abs(x1)-2-u1", 1, 1),), Cone("nonpos")),
            oracle=Oracle(_p1_v, _p1_s, _p1_grad),
            search_window=True,
            description="constraint |x| <= 2 + u inactive at the optimum",
        ),
        ProblemSpec(
            name="slater-fail",
            n=1,
            m=1,
            f=parse("x1", 1, 1),
            X=BoxDomain((-1.0,), (3.0,)),
            U=BoxDomain((-1.5,), (1.5,)),
            constraints=ConstraintSet("mapped", (parse("x1-u1^2", 1, 1),), Cone("nonneg")),
            oracle=Oracle(_p6_v, _p6_s, _p6_grad),
            search_window=True,
            description="constraint x >= u^2 active at the optimum",
        ),
        ProblemSpec(
            name="bilinear-2d",
            n=1,
            m=2,
            f=parse("-x1*(u1+2*u2)", 1, 2),
            X=BoxDomain((-1.0,), (1.0,)),
            U=BoxDomain((-1.0, -1.0), (1.0, 1.0)),
            oracle=Oracle(_p7_v, _p7_s, _p7_grad, clarke={(0.0, 0.0): [[-1.0, -2.0], [1.0, 2.0]]}),
            description="v = -|u1 + 2 u2|, kink along a line",
        ),
    ]


_ALIASES = {"P1": 0, "P2": 1, "P3": 2, "P4": 3, "P5": 4, "P6": 5, "P7": 6}


def problem_names() -> list:
    return [p.name for p in catalog()]


def get_problem(name: str) -> ProblemSpec:
    """Look up a catalog entry by name (``bilinear-box``) or label (``P3``)."""
    entries = catalog()
    if name.upper() in _ALIASES:
        return entries[_ALIASES[name.upper()]]
    for p in entries:
        if p.name == name:
            return p
    raise KeyError(f"no catalog problem named {name!r}; known: {', '.join(problem_names())}")
