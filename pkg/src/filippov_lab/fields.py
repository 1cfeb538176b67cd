"""Pointwise Filippov theory on a switching curve ``h = 0``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .expr import Expr, as_expr, compile_expr, diff_expr, eval_expr

__all__ = [
    "Tolerances", "VectorField2", "ScalarField", "FilippovSystem",
    "SigmaClassification", "FlatContactError", "DegenerateSlidingError",
    "NotOnSigmaError", "lie_derivative", "lie_derivatives", "contact_multiplicity",
    "classify_sigma_point", "sliding_vector", "sliding_weight",
]

MAX_LIE_ORDER = 8


@dataclass(frozen=True)
class Tolerances:
    on_sigma: float = 1e-10
    lie: float = 1e-9
    max_order: int = MAX_LIE_ORDER


DEFAULT_TOL = Tolerances()


class FlatContactError(ValueError):
    """No Lie derivative up to the maximal order exceeds the threshold."""


class DegenerateSlidingError(ValueError):
    pass


class NotOnSigmaError(ValueError):
    pass


class _Compiled:
    # Expression trees pickle cleanly; compiled callables do not. The cache is
    # rebuilt lazily after unpickling.
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


class VectorField2(_Compiled):
    """Planar vector field ``(f1, f2)`` given by expressions in ``x, y``."""

    def __init__(self, f1, f2):
        self.f1 = as_expr(f1)
        self.f2 = as_expr(f2)
        self._cache = {}

    def __repr__(self):
        return f"VectorField2({str(self.f1)!r}, {str(self.f2)!r})"

    def __eq__(self, other):
        return isinstance(other, VectorField2) and (self.f1, self.f2) == (other.f1, other.f2)

    def __hash__(self):
        return hash((self.f1, self.f2))

    @property
    def fn(self):
        f = self._cache.get("fn")
        if f is None:
            f = self._cache["fn"] = compile_expr(self.f1, self.f2)
        return f

    def __call__(self, x: float, y: float):
        return self.fn(x, y)

    def evaluate(self, p: Sequence[float]):
        return (eval_expr(self.f1, p), eval_expr(self.f2, p))

    @property
    def jacobian_fn(self):
        f = self._cache.get("jac")
        if f is None:
            f = self._cache["jac"] = compile_expr(
                diff_expr(self.f1, "x"), diff_expr(self.f1, "y"),
                diff_expr(self.f2, "x"), diff_expr(self.f2, "y"))
        return f

    def negated(self) -> "VectorField2":
        return VectorField2(-self.f1, -self.f2)

    def lie_expr(self, g: Expr) -> Expr:
        """Symbolic ``X g = f1 * dg/dx + f2 * dg/dy``."""
        return self.f1 * diff_expr(g, "x") + self.f2 * diff_expr(g, "y")

    def lie_chain(self, h: "ScalarField", order: int):
        """Expressions ``X h, X^2 h, ..., X^order h`` (cached per ``h``)."""
        key = ("lie", h.expr)
        chain = self._cache.setdefault(key, [])
        g = chain[-1] if chain else h.expr
        while len(chain) < order:
            g = self.lie_expr(g)
            chain.append(g)
        return chain[:order]


class ScalarField(_Compiled):
    """Switching function ``h``; Σ is its zero set."""

    def __init__(self, expr):
        self.expr = as_expr(expr)
        self.gradient = (diff_expr(self.expr, "x"), diff_expr(self.expr, "y"))
        self._cache = {}

    def __repr__(self):
        return f"ScalarField({str(self.expr)!r})"

    def __eq__(self, other):
        return isinstance(other, ScalarField) and self.expr == other.expr

    def __hash__(self):
        return hash(self.expr)

    @property
    def fn(self):
        f = self._cache.get("fn")
        if f is None:
            f = self._cache["fn"] = compile_expr(self.expr)
        return f

    @property
    def grad_fn(self):
        f = self._cache.get("grad")
        if f is None:
            f = self._cache["grad"] = compile_expr(*self.gradient)
        return f

    def __call__(self, x: float, y: float) -> float:
        return self.fn(x, y)

    def check_regular(self, points, min_norm: float = 1e-12):
        """Raise if ``|grad h|`` vanishes at any of the given zeros of ``h``."""
        for p in points:
            gx, gy = self.grad_fn(*p)
            if (gx * gx + gy * gy) ** 0.5 <= min_norm:
                raise ValueError(f"0 is not a regular value of h: grad h vanishes at {tuple(p)}")


@dataclass(frozen=True)
class FilippovSystem:
    """``Z = (X+, X-)`` with ``X+`` acting where ``h >= 0``."""

    xplus: VectorField2
    xminus: VectorField2
    h: ScalarField

    def negated(self) -> "FilippovSystem":
        return FilippovSystem(self.xplus.negated(), self.xminus.negated(), self.h)

    def lie(self, p, side: str = "+") -> float:
        X = self.xplus if side == "+" else self.xminus
        gx, gy = self.h.grad_fn(*p)
        fx, fy = X(*p)
        return gx * fx + gy * fy

    def __call__(self, x: float, y: float):
        # discontinuous evaluation, X+ on the closed upper side
        return self.xplus(x, y) if self.h(x, y) >= 0.0 else self.xminus(x, y)


@dataclass(frozen=True)
class SigmaClassification:
    kind: str                      # 'crossing' | 'sliding' | 'tangency'
    lie_plus: float
    lie_minus: float
    attracting: Optional[bool] = None          # sliding only
    side: Optional[str] = None                 # tangency: '+' or '-' ('both' if double)
    multiplicity: Optional[int] = None
    visible: Optional[bool] = None
    other: dict = field(default_factory=dict)  # tangency data of the second field when both are tangent


def lie_derivative(X: VectorField2, h: ScalarField, p: Sequence[float], order: int = 1,
                   max_order: int = MAX_LIE_ORDER) -> float:
    """Exact value of ``X^order h`` at ``p`` by symbolic chaining."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order > max_order:
        raise ValueError(f"Lie derivative order {order} exceeds the maximum {max_order}")
    return eval_expr(X.lie_chain(h, order)[-1], p)


def lie_derivatives(X: VectorField2, h: ScalarField, p, order: int):
    return [eval_expr(g, p) for g in X.lie_chain(h, order)]


def contact_multiplicity(X: VectorField2, h: ScalarField, p: Sequence[float], side: str = "+",
                         tol: Tolerances = DEFAULT_TOL):
    """Return ``(m, visible)`` for the contact of ``X`` with Σ at ``p``.

    ``visible`` is None for odd ``m``. Visibility follows the side convention:
    ``X^m h > 0`` for the upper field, ``< 0`` for the lower one.
    """
    if abs(eval_expr(h.expr, p)) > tol.on_sigma:
        raise NotOnSigmaError(f"point {tuple(p)} is not on the switching curve")
    for m in range(1, tol.max_order + 1):
        v = lie_derivative(X, h, p, m, tol.max_order)
        if abs(v) > tol.lie:
            if m % 2:
                return m, None
            return m, (v > 0) if side == "+" else (v < 0)
    raise FlatContactError(
        f"contact at {tuple(p)} exceeds max order {tol.max_order} (flat within tolerance)")


def classify_sigma_point(Z: FilippovSystem, p: Sequence[float],
                         tol: Tolerances = DEFAULT_TOL) -> SigmaClassification:
    if abs(eval_expr(Z.h.expr, p)) > tol.on_sigma:
        raise NotOnSigmaError(f"point {tuple(p)} is not on the switching curve")
    a = lie_derivative(Z.xplus, Z.h, p, 1)
    b = lie_derivative(Z.xminus, Z.h, p, 1)
    tan_plus, tan_minus = abs(a) <= tol.lie, abs(b) <= tol.lie
    if not (tan_plus or tan_minus):
        if a * b > 0:
            return SigmaClassification("crossing", a, b)
        return SigmaClassification("sliding", a, b, attracting=a < 0 < b)
    if tan_plus and tan_minus:
        mp, vp = contact_multiplicity(Z.xplus, Z.h, p, "+", tol)
        mm, vm = contact_multiplicity(Z.xminus, Z.h, p, "-", tol)
        return SigmaClassification("tangency", a, b, side="both", multiplicity=mp, visible=vp,
                                   other={"multiplicity": mm, "visible": vm})
    X, side = (Z.xplus, "+") if tan_plus else (Z.xminus, "-")
    m, vis = contact_multiplicity(X, Z.h, p, side, tol)
    return SigmaClassification("tangency", a, b, side=side, multiplicity=m, visible=vis)


def sliding_weight(a: float, b: float) -> float:
    """Weight ``lambda`` of ``X+`` in the sliding combination."""
    return b / (b - a)


def sliding_vector(Z: FilippovSystem, p: Sequence[float], tol: Tolerances = DEFAULT_TOL,
                   check: bool = True):
    """Filippov sliding vector ``(X-h X+ - X+h X-) / (X-h - X+h)`` at ``p``."""
    x, y = float(p[0]), float(p[1])
    gx, gy = Z.h.grad_fn(x, y)
    px, py = Z.xplus(x, y)
    mx, my = Z.xminus(x, y)
    a = gx * px + gy * py
    b = gx * mx + gy * my
    den = b - a
    if abs(den) <= tol.lie:
        raise DegenerateSlidingError(f"degenerate sliding at {(x, y)}: X-h - X+h = {den:g}")
    if check and not a * b < 0:
        raise ValueError(f"{(x, y)} is not a sliding point (X+h={a:g}, X-h={b:g})")
    lam = b / den
    mu = -a / den
    # convex form keeps <grad h, Z^s> at roundoff level
    return (lam * px + mu * mx, lam * py + mu * my)
