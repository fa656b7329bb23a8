"""Small expression language for objective and constraint functions.

Expressions are built over the decision variables ``x1..xn`` and the
parameters ``u1..um`` with ``+ - * /``, integer powers ``^``, and the
functions ``abs``, ``min``, ``max``, ``exp`` and ``log``.

Besides plain evaluation, :func:`eval_dual` runs a forward-mode pass that
returns the one-sided directional derivative along a direction in
``(x, u)`` space; at the kinks of ``abs``/``min``/``max`` it follows the
direction and raises a ``kink`` flag.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expr",
    "DualValue",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "VariableIndexError",
    "DomainError",
    "parse",
    "evaluate",
    "eval_dual",
    "pretty",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"syntax error at offset {offset}: {message}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class VariableIndexError(ExprError):
    def __init__(self, name: str, offset: int, limit: int):
        super().__init__(
            f"variable {name!r} at offset {offset} out of range (declared {limit})"
        )
        self.name = name
        self.offset = offset


class DomainError(ExprError, ArithmeticError):
    """Raised when a subexpression leaves its domain (x/0, log of x<=0, overflow)."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in {subexpr!r}")
        self.subexpr = subexpr


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "u"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Pow, Call]

FUNCTIONS = {"abs": (1, 1), "exp": (1, 1), "log": (1, 1), "min": (2, None), "max": (2, None)}


# --------------------------------------------------------------------------
# Tokenizer and parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(source):
        mt = _TOKEN_RE.match(source, pos)
        if mt is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = mt.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, mt.group(), pos))
        pos = mt.end()
    toks.append(_Tok("end", "", len(source)))
    return toks


_VAR_RE = re.compile(r"([xu])(\d+)$")

# binding powers; unary minus scopes over a whole product term
_BP_ADD = 10
_BP_MUL = 20
_BP_NEG = 15


class _Parser:
    def __init__(self, source: str, n: int, m: int):
        self.toks = _tokenize(source)
        self.i = 0
        self.n = n
        self.m = m

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind == "end":
            raise ExprSyntaxError(f"expected {text!r}", tok.offset)
        return self.next()

    def parse(self) -> Node:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.offset)
        return node

    def expression(self, rbp: int) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.next()
            left: Node = Neg(self.expression(_BP_NEG))
        else:
            left = self.power()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in "+-*/":
                return left
            bp = _BP_ADD if tok.text in "+-" else _BP_MUL
            if bp <= rbp:
                return left
            self.next()
            left = BinOp(tok.text, left, self.expression(bp))

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.next()
            sign = 1
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "-":
                self.next()
                sign = -1
                nxt = self.peek()
            if nxt.kind != "num" or not nxt.text.isdigit():
                raise ExprSyntaxError("expected integer exponent", nxt.offset)
            self.next()
            return Pow(base, sign * int(nxt.text))
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return Const(float(tok.text))
        if tok.kind == "name":
            self.next()
            mv = _VAR_RE.match(tok.text)
            if mv:
                kind, idx = mv.group(1), int(mv.group(2))
                limit = self.n if kind == "x" else self.m
                if not 1 <= idx <= limit:
                    raise VariableIndexError(tok.text, tok.offset, limit)
                return Var(kind, idx)
            if tok.text not in FUNCTIONS:
                raise UnknownIdentifierError(tok.text, tok.offset)
            self.expect("(")
            args = [self.expression(0)]
            while self.peek().kind == "op" and self.peek().text == ",":
                self.next()
                args.append(self.expression(0))
            self.expect(")")
            lo, hi = FUNCTIONS[tok.text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ExprSyntaxError(
                    f"{tok.text} takes {lo}{'' if hi == lo else '+'} argument(s)", tok.offset
                )
            return Call(tok.text, tuple(args))
        if tok.kind == "op" and tok.text == "(":
            self.next()
            node = self.expression(0)
            self.expect(")")
            return node
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", tok.offset)


# --------------------------------------------------------------------------
# Pretty printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 0
    return 3


def _fmt_const(value: float) -> str:
    text = repr(float(value))
    return text


def pretty(node: Node) -> str:
    """Render ``node`` as source text that parses back to the same tree."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        inner = pretty(node.arg)
        if isinstance(node.arg, (Neg, BinOp)) and (
            isinstance(node.arg, Neg) or node.arg.op in "+-"
        ):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = pretty(node.left)
        right = pretty(node.right)
        if _prec(node.left) < p or isinstance(node.left, Neg):
            left = f"({left})"
        if _prec(node.right) <= p or isinstance(node.right, Neg):
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Pow):
        base = pretty(node.base)
        if not isinstance(node.base, (Var, Const, Call)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(pretty(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# Code generation for the fast path


def _codegen(node: Node, lib: str) -> str:
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"{node.kind}[{node.index - 1}]"
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg, lib)})"
    if isinstance(node, BinOp):
        return f"({_codegen(node.left, lib)} {node.op} {_codegen(node.right, lib)})"
    if isinstance(node, Pow):
        if node.exponent == 0:
            return f"({_codegen(node.base, lib)} * 0.0 + 1.0)"
        return f"({_codegen(node.base, lib)} ** {node.exponent})"
    if isinstance(node, Call):
        args = [_codegen(a, lib) for a in node.args]
        if lib == "math":
            name = {"abs": "abs", "min": "min", "max": "max", "exp": "_exp", "log": "_log"}[node.name]
            return f"{name}({', '.join(args)})"
        if node.name in ("min", "max"):
            fn = "_np.minimum" if node.name == "min" else "_np.maximum"
            out = args[-1]
            for a in reversed(args[:-1]):
                out = f"{fn}({a}, {out})"
            return out
        return f"_np.{node.name}({args[0]})"
    raise TypeError(node)


def _compile(node: Node, lib: str):
    src = f"lambda x, u: {_codegen(node, lib)}"
    env = {"_np": np, "_exp": math.exp, "_log": math.log}
    return eval(compile(src, "<expr>", "eval"), env)  # noqa: S307 - generated from a parsed AST


# --------------------------------------------------------------------------
# Checked interpreter (used to locate domain errors and for dual numbers)


def _interp(node: Node, x, u):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, Var):
        return (x if node.kind == "x" else u)[node.index - 1]
    if isinstance(node, Neg):
        return -_interp(node.arg, x, u)
    if isinstance(node, BinOp):
        a = _interp(node.left, x, u)
        b = _interp(node.right, x, u)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(b == 0):
            raise DomainError("division by zero", pretty(node))
        return a / b
    if isinstance(node, Pow):
        a = _interp(node.base, x, u)
        if node.exponent < 0 and np.any(a == 0):
            raise DomainError("zero to a negative power", pretty(node))
        return _checked(np.power(np.asarray(a, dtype=float), node.exponent), node)
    if isinstance(node, Call):
        args = [_interp(a, x, u) for a in node.args]
        if node.name == "abs":
            return np.abs(args[0])
        if node.name == "min":
            return _fold(np.minimum, args)
        if node.name == "max":
            return _fold(np.maximum, args)
        if node.name == "exp":
            return _checked(np.exp(args[0]), node)
        if np.any(np.asarray(args[0]) <= 0):
            raise DomainError("log of non-positive value", pretty(node))
        return np.log(args[0])
    raise TypeError(node)


def _fold(fn, args):
    out = args[0]
    for a in args[1:]:
        out = fn(out, a)
    return out


def _checked(value, node):
    if not np.all(np.isfinite(value)):
        raise DomainError("overflow", pretty(node))
    return value


# --------------------------------------------------------------------------
# Expr


@dataclass(frozen=True)
class Expr:
    """A parsed expression together with its declared dimensions.

    Calling an ``Expr`` evaluates it.  Scalars go through generated
    pure-Python code; arrays (``x`` of shape ``(n, ...)``, ``u``
    broadcastable) go through generated numpy code.
    """

    root: Node
    n: int
    m: int
    source: str = field(default="", compare=False)
    _scalar: object = field(default=None, init=False, repr=False, compare=False)
    _vector: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_scalar", _compile(self.root, "math"))
        object.__setattr__(self, "_vector", _compile(self.root, "numpy"))

    def __str__(self) -> str:
        return pretty(self.root)

    def __call__(self, x, u) -> float:
        return evaluate(self, x, u)

    def __reduce__(self):
        return (parse, (pretty(self.root), self.n, self.m))

    def evaluate_array(self, x, u) -> np.ndarray:
        """Vectorized evaluation; ``x[i]`` and ``u[j]`` are broadcastable arrays."""
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                out = self._vector(x, u)
        except (FloatingPointError, ZeroDivisionError):
            with np.errstate(all="ignore"):
                _interp(self.root, x, u)
            raise DomainError("floating point error", pretty(self.root)) from None
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(*x, *u).shape if (len(x) + len(u)) else ())

    def variables(self) -> set:
        found = set()

        def walk(node):
            if isinstance(node, Var):
                found.add((node.kind, node.index))
            elif isinstance(node, Neg):
                walk(node.arg)
            elif isinstance(node, BinOp):
                walk(node.left)
                walk(node.right)
            elif isinstance(node, Pow):
                walk(node.base)
            elif isinstance(node, Call):
                for a in node.args:
                    walk(a)

        walk(self.root)
        return found


def parse(source: str, n: int, m: int) -> Expr:
    """Parse ``source`` into an :class:`Expr` over ``n`` x-variables and ``m`` parameters."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    root = _Parser(source, n, m).parse()
    return Expr(root, n, m, source)


def _as_vec(values, dim: int, what: str) -> tuple:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.shape != (dim,):
        raise ValueError(f"{what} must have {dim} component(s), got shape {arr.shape}")
    return tuple(float(v) for v in arr)


def evaluate(e: Expr, x: Sequence[float], u: Sequence[float]) -> float:
    """Value of ``e`` at the point ``(x, u)``."""
    xs = _as_vec(x, e.n, "x") if e.n else ()
    us = _as_vec(u, e.m, "u") if e.m else ()
    try:
        out = e._scalar(xs, us)
    except (ZeroDivisionError, ValueError, OverflowError):
        _interp(e.root, np.asarray(xs, dtype=float), np.asarray(us, dtype=float))
        raise DomainError("floating point error", pretty(e.root)) from None
    out = float(out)
    if not math.isfinite(out):
        raise DomainError("non-finite value", pretty(e.root))
    return out


# --------------------------------------------------------------------------
# Forward mode


@dataclass(frozen=True)
class DualValue:
    value: float
    deriv: float
    kink_flag: bool


def _dual(node: Node, x, u, dx, du):
    """Return (value, deriv, kink) arrays for the one-sided directional derivative."""
    if isinstance(node, Const):
        return np.float64(node.value), np.float64(0.0), np.False_
    if isinstance(node, Var):
        if node.kind == "x":
            return x[node.index - 1], dx[node.index - 1], np.False_
        return u[node.index - 1], du[node.index - 1], np.False_
    if isinstance(node, Neg):
        a, da, ka = _dual(node.arg, x, u, dx, du)
        return -a, -da, ka
    if isinstance(node, BinOp):
        a, da, ka = _dual(node.left, x, u, dx, du)
        b, db, kb = _dual(node.right, x, u, dx, du)
        k = ka | kb
        if node.op == "+":
            return a + b, da + db, k
        if node.op == "-":
            return a - b, da - db, k
        if node.op == "*":
            return a * b, da * b + a * db, k
        if np.any(b == 0):
            raise DomainError("division by zero", pretty(node))
        return a / b, (da * b - a * db) / (b * b), k
    if isinstance(node, Pow):
        a, da, ka = _dual(node.base, x, u, dx, du)
        p = node.exponent
        if p == 0:
            return np.ones_like(np.asarray(a, dtype=float)), np.zeros_like(np.asarray(a, dtype=float)), ka
        if p < 0 and np.any(a == 0):
            raise DomainError("zero to a negative power", pretty(node))
        a = np.asarray(a, dtype=float)
        val = _checked(np.power(a, p), node)
        return val, p * np.power(a, p - 1) * da, ka
    if isinstance(node, Call):
        parts = [_dual(arg, x, u, dx, du) for arg in node.args]
        if node.name == "abs":
            a, da, ka = parts[0]
            at_kink = a == 0
            deriv = np.where(at_kink, np.abs(da), np.sign(a) * da)
            return np.abs(a), deriv, ka | at_kink
        if node.name in ("min", "max"):
            pick_first = np.less if node.name == "min" else np.greater
            combine = np.minimum if node.name == "min" else np.maximum
            a, da, ka = parts[0]
            for b, db, kb in parts[1:]:
                tie = a == b
                first = pick_first(a, b)
                deriv = np.where(tie, combine(da, db), np.where(first, da, db))
                a = combine(a, b)
                da = deriv
                ka = ka | kb | tie
            return a, da, ka
        a, da, ka = parts[0]
        if node.name == "exp":
            val = _checked(np.exp(a), node)
            return val, val * da, ka
        if np.any(np.asarray(a) <= 0):
            raise DomainError("log of non-positive value", pretty(node))
        return np.log(a), da / a, ka
    raise TypeError(node)


def eval_dual(e: Expr, x, u, dx, du) -> DualValue:
    """One-sided derivative ``d/dt e(x + t dx, u + t du)`` at ``t = 0+``."""
    xs = np.asarray(_as_vec(x, e.n, "x") if e.n else (), dtype=float)
    us = np.asarray(_as_vec(u, e.m, "u") if e.m else (), dtype=float)
    dxs = np.asarray(_as_vec(dx, e.n, "dx") if e.n else (), dtype=float)
    dus = np.asarray(_as_vec(du, e.m, "du") if e.m else (), dtype=float)
    if np.abs(dxs).sum() + np.abs(dus).sum() <= 0:
        raise ValueError("direction must be non-zero")
    with np.errstate(all="ignore"):
        val, der, kink = _dual(e.root, xs, us, dxs, dus)
    val = float(val)
    if not math.isfinite(val):
        raise DomainError("non-finite value", pretty(e.root))
    return DualValue(val, float(der), bool(kink))


def eval_dual_array(e: Expr, x, u, dx, du):
    """Vectorized :func:`eval_dual`; returns ``(value, deriv, kink)`` arrays."""
    with np.errstate(all="ignore"):
        val, der, kink = _dual(e.root, x, u, dx, du)
    shape = np.broadcast(*x, *u).shape if (len(x) + len(u)) else ()
    return (
        np.broadcast_to(np.asarray(val, dtype=float), shape),
        np.broadcast_to(np.asarray(der, dtype=float), shape),
        np.broadcast_to(np.asarray(kink, dtype=bool), shape),
    )
