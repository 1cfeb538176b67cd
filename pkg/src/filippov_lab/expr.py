"""Arithmetic expressions in the plane variables ``x`` and ``y``.

Expressions are parsed into an immutable AST that can be evaluated,
differentiated symbolically and compiled into plain Python callables.
Symbolic derivatives are what make iterated Lie derivatives exact.

    >>> e = parse_expr("x^2 - x^3")
    >>> eval_expr(e, (0.5, 0.0))
    0.125
    >>> str(diff_expr(e, "x"))
    '((2.0 * x) - (3.0 * (x ^ 2)))'
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Pow",
    "ExprSyntaxError", "ExprDomainError",
    "parse_expr", "eval_expr", "diff_expr", "compile_expr", "to_source",
    "const", "as_expr", "subst_expr",
]

UNARY_FUNCS = ("neg", "sin", "cos", "exp")


class ExprSyntaxError(ValueError):
    """Raised on malformed input; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprDomainError(ArithmeticError):
    """Evaluation left the expression's domain (zero denominator, overflow)."""

    def __init__(self, message: str, point=None):
        super().__init__(message if point is None else f"{message} at {tuple(point)}")
        self.point = point


class Expr:
    """Base class of AST nodes. Nodes are frozen dataclasses."""

    __slots__ = ()

    def __str__(self) -> str:
        return _pretty(self)

    def __call__(self, x: float, y: float) -> float:
        return eval_expr(self, (x, y))

    # convenience builders, so scenario code can write X + b * H
    def __add__(self, other):
        return _add(self, as_expr(other))

    def __radd__(self, other):
        return _add(as_expr(other), self)

    def __sub__(self, other):
        return _sub(self, as_expr(other))

    def __rsub__(self, other):
        return _sub(as_expr(other), self)

    def __mul__(self, other):
        return _mul(self, as_expr(other))

    def __rmul__(self, other):
        return _mul(as_expr(other), self)

    def __truediv__(self, other):
        return _div(self, as_expr(other))

    def __neg__(self):
        return _neg(self)

    def __pow__(self, n: int):
        return _pow(self, n)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int


ZERO = Const(0.0)
ONE = Const(1.0)
X = Var("x")
Y = Var("y")


def const(v: float) -> Const:
    return Const(float(v))


def as_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float)):
        return Const(float(obj))
    if isinstance(obj, str):
        return parse_expr(obj)
    raise TypeError(f"cannot convert {type(obj).__name__} to Expr")


# -- constant-folding constructors ------------------------------------------

def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Binary("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    return Binary("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Binary("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def _pow(a: Expr, n: int) -> Expr:
    if n < 0 or int(n) != n:
        raise ValueError("exponent must be a non-negative integer")
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        return Const(a.value ** n)
    return Pow(a, n)


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    out = []
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            bad = len(src) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := '-' unary | '+' unary | power
    # power  := atom ('^' exponent)?
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            raise ExprSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Binary(op, e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Binary(op, e, rhs)
        return e

    def unary(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            pos = self.peek()[2]
            exp_node = self.exponent_atom()
            value = _fold_constant(exp_node)
            if value is None or value < 0 or value != int(value):
                raise ExprSyntaxError("exponent must be a non-negative integer", pos)
            return Pow(base, int(value))
        return base

    def exponent_atom(self) -> Expr:
        # a right-associative chain such as 2^3^2 is folded from the right
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.exponent_atom())
        return self.power()

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in ("x", "y"):
                return Var(val)
            if val in ("sin", "cos", "exp"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            raise ExprSyntaxError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected token {val or 'end of input'!r}", pos)


def _fold_constant(e: Expr):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return None
    if isinstance(e, Unary):
        v = _fold_constant(e.arg)
        if v is None:
            return None
        return {"neg": lambda t: -t, "sin": math.sin, "cos": math.cos, "exp": math.exp}[e.op](v)
    if isinstance(e, Pow):
        v = _fold_constant(e.base)
        return None if v is None else v ** e.exponent
    if isinstance(e, Binary):
        a, b = _fold_constant(e.left), _fold_constant(e.right)
        if a is None or b is None:
            return None
        if e.op == "/":
            return None if b == 0 else a / b
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    return None


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into an :class:`Expr`.

    Precedence, high to low: ``^`` (integer exponents only), unary minus,
    ``* /``, ``+ -``; binary operators are left-associative.
    """
    if not isinstance(src, str):
        raise TypeError("expression source must be text")
    return _Parser(src).parse()


# -- evaluation ---------------------------------------------------------------

def eval_expr(e: Expr, p: Sequence[float]) -> float:
    """Evaluate ``e`` at the point ``p = (x, y)`` by direct recursion."""
    x, y = float(p[0]), float(p[1])
    try:
        return _eval(e, x, y)
    except ZeroDivisionError:
        raise ExprDomainError("division by zero", (x, y)) from None
    except OverflowError:
        raise ExprDomainError("overflow", (x, y)) from None


def _eval(e: Expr, x: float, y: float) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Binary):
        a = _eval(e.left, x, y)
        b = _eval(e.right, x, y)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Pow):
        return _eval(e.base, x, y) ** e.exponent
    if isinstance(e, Unary):
        v = _eval(e.arg, x, y)
        if e.op == "neg":
            return -v
        if e.op == "sin":
            return math.sin(v)
        if e.op == "cos":
            return math.cos(v)
        return math.exp(v)
    raise TypeError(f"not an expression node: {e!r}")


def to_source(e: Expr) -> str:
    """Python source for ``e`` in the names ``x``, ``y``, ``sin``, ``cos``, ``exp``."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Binary):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Pow):
        # repeated products keep bit-compatibility with eval_expr's `**`
        return f"({to_source(e.base)} ** {e.exponent})"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_source(e.arg)})"
        return f"{e.op}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


_NAMESPACE = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


def compile_expr(*exprs: Expr) -> Callable[[float, float], object]:
    """Compile one or more expressions into ``f(x, y)``.

    A single expression compiles to a scalar function; several compile to a
    function returning a tuple. Division by zero raises ZeroDivisionError.
    """
    body = ", ".join(to_source(e) for e in exprs)
    if len(exprs) != 1:
        body = f"({body})"
    code = f"def _f(x, y):\n    return {body}\n"
    ns = dict(_NAMESPACE)
    exec(compile(code, "<expr>", "exec"), ns)
    return ns["_f"]


def _pretty(e: Expr) -> str:
    if isinstance(e, Const):
        r = repr(e.value)
        return f"({r})" if r.startswith("-") else r
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Binary):
        return f"({_pretty(e.left)} {e.op} {_pretty(e.right)})"
    if isinstance(e, Pow):
        return f"({_pretty(e.base)} ^ {e.exponent})"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_pretty(e.arg)})"
        return f"{e.op}({_pretty(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# -- differentiation ----------------------------------------------------------

def diff_expr(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var`` ('x' or 'y')."""
    if var not in ("x", "y"):
        raise ValueError("var must be 'x' or 'y'")
    return _diff(e, var)


def _diff(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = _diff(a, v), _diff(b, v)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        # quotient rule
        return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, 2))
    if isinstance(e, Pow):
        n = e.exponent
        if n == 0:
            return ZERO
        return _mul(_mul(Const(float(n)), _pow(e.base, n - 1)), _diff(e.base, v))
    if isinstance(e, Unary):
        du = _diff(e.arg, v)
        if e.op == "neg":
            return _neg(du)
        if e.op == "sin":
            return _mul(Unary("cos", e.arg), du)
        if e.op == "cos":
            return _neg(_mul(Unary("sin", e.arg), du))
        return _mul(Unary("exp", e.arg), du)
    raise TypeError(f"not an expression node: {e!r}")


def subst_expr(e: Expr, mapping) -> Expr:
    """Replace variables by expressions, e.g. ``{'x': -x}`` for a reflection."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}

    def go(n: Expr) -> Expr:
        if isinstance(n, Const):
            return n
        if isinstance(n, Var):
            return mapping.get(n.name, n)
        if isinstance(n, Unary):
            a = go(n.arg)
            return _neg(a) if n.op == "neg" else Unary(n.op, a)
        if isinstance(n, Pow):
            return _pow(go(n.base), n.exponent)
        a, b = go(n.left), go(n.right)
        return {"+": _add, "-": _sub, "*": _mul, "/": _div}[n.op](a, b)

    return go(e)
