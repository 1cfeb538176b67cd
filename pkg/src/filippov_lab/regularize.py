"""Transition functions and the Sotomayor-Teixeira regularization.

The regularized field blends the two sides of a Filippov system through a
monotone transition function ``Phi`` on the band ``|h| <= eps``::

    Z_eps(p) = (1 + Phi(h/eps))/2 * X+(p) + (1 - Phi(h/eps))/2 * X-(p)

Outside the band the value is exactly ``X+`` or ``X-``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple


from .expr import to_source
from .fields import FilippovSystem

__all__ = [
    "TransitionFn", "MonotonicityError", "hermite_transition", "bump_transition",
    "phi_integral", "transition_from_spec", "RegularizedField", "regularized_field",
    "transition_jumps",
]

MAX_HERMITE_ORDER = 8


class MonotonicityError(ValueError):
    pass


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def _poly_add(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _one_minus_s2_pow(m):
    out = [Fraction(1)]
    for _ in range(m):
        out = _poly_mul(out, [Fraction(1), Fraction(0), Fraction(-1)])
    return out


def _peval(coeffs, s):
    acc = 0 * s
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


def _pderiv(coeffs):
    return [i * c for i, c in enumerate(coeffs)][1:] or [Fraction(0)]


@dataclass(frozen=True)
class TransitionFn:
    """Polynomial ``phi`` on ``[-1, 1]``, extended by ``sign(s)`` outside.

    ``coeffs`` are exact rationals in increasing degree. ``smoothness`` is the
    class ``n`` of ``C^n_ST``.
    """

    coeffs: Tuple[Fraction, ...]
    smoothness: int
    family: str = "hermite"
    c: float = 0.0
    verified_monotone: bool = False

    @property
    def float_coeffs(self):
        return [float(q) for q in self.coeffs]

    def phi(self, s):
        """Polynomial part, valid for any real ``s`` (no capping)."""
        return _peval(self.float_coeffs, s)

    def __call__(self, s: float) -> float:
        """Capped transition ``Phi``: ``sign(s)`` for ``|s| >= 1``."""
        if s >= 1.0:
            return 1.0
        if s <= -1.0:
            return -1.0
        return _peval(self.float_coeffs, s)

    def derivative_coeffs(self, order: int = 1):
        co = list(self.coeffs)
        for _ in range(order):
            co = _pderiv(co)
        return co

    def exact_value(self, s, order: int = 0) -> Fraction:
        return _peval(self.derivative_coeffs(order), Fraction(s))

    def check_identities(self) -> bool:
        """``phi(+-1) = +-1`` and ``phi^(i)(+-1) = 0`` for ``i <= n``, exactly."""
        if self.exact_value(1) != 1 or self.exact_value(-1) != -1:
            return False
        return all(self.exact_value(s, i) == 0
                   for i in range(1, self.smoothness + 1) for s in (1, -1))

    def is_monotone(self, n_grid: int = 1000) -> bool:
        # exact arithmetic: near +-1 the derivative is tiny and float Horner cancels
        dco = self.derivative_coeffs(1)
        return all(_peval(dco, Fraction(2 * i - n_grid - 1, n_grid + 1)) > 0 for i in range(1, n_grid + 1))

    def to_spec(self) -> dict:
        return {"family": self.family, "n": self.smoothness, "c": self.c}

    def label(self) -> str:
        return f"hermite:{self.smoothness}" if self.family == "hermite" \
            else f"bump:{self.smoothness}:{self.c:g}"


def _hermite_coeffs(n: int):
    # phi' proportional to (1 - s^2)^n, normalised so that phi(1) = 1
    d = _one_minus_s2_pow(n)
    integ = [Fraction(0)] + [c / (i + 1) for i, c in enumerate(d)]
    scale = 1 / _peval(integ, Fraction(1))
    return [c * scale for c in integ]


def hermite_transition(n: int = 1) -> TransitionFn:
    """Odd polynomial of degree ``2n+1`` with ``phi(1)=1`` and ``phi^(i)(1)=0``, ``i<=n``.

    >>> hermite_transition(1)(0.5)
    0.6875
    """
    if not 1 <= n <= MAX_HERMITE_ORDER:
        raise ValueError(f"smoothness class must be in 1..{MAX_HERMITE_ORDER}")
    fn = TransitionFn(tuple(_hermite_coeffs(n)), n, "hermite", 0.0)
    if not (fn.check_identities() and fn.is_monotone()):
        raise MonotonicityError(f"hermite transition of class {n} failed verification")
    return TransitionFn(fn.coeffs, n, "hermite", 0.0, True)


def bump_transition(n: int = 1, c: float = 0.05) -> TransitionFn:
    """Asymmetric family ``hermite_n(s) + c (1 - s^2)^(n+1)``; its integral is non-zero."""
    base = _hermite_coeffs(n)
    cq = Fraction(c).limit_denominator(10**12) if not isinstance(c, Fraction) else c
    bump = [cq * q for q in _one_minus_s2_pow(n + 1)]
    co = _poly_add(base, bump)
    while len(co) > 1 and co[-1] == 0:
        co.pop()
    fn = TransitionFn(tuple(co), n, "bump", float(c))
    if not fn.check_identities():
        raise MonotonicityError("endpoint conditions fail")  # cannot happen for this family
    if not fn.is_monotone():
        raise MonotonicityError(f"bump transition with c={c} is not monotone on (-1, 1)")
    return TransitionFn(fn.coeffs, n, "bump", float(c), True)


def transition_from_spec(spec) -> TransitionFn:
    """Build from ``{'family': 'hermite'|'bump', 'n': .., 'c': ..}`` or ``'bump:1:0.05'``."""
    if isinstance(spec, TransitionFn):
        return spec
    if isinstance(spec, str):
        parts = spec.split(":")
        fam = parts[0]
        n = int(parts[1]) if len(parts) > 1 else 1
        c = float(parts[2]) if len(parts) > 2 else 0.0
    else:
        fam = spec.get("family", "hermite")
        n = int(spec.get("n", 1))
        c = float(spec.get("c", 0.0))
    if fam == "hermite":
        return hermite_transition(n)
    if fam == "bump":
        return bump_transition(n, c)
    raise ValueError(f"unknown transition family {fam!r}")


def phi_integral(phi: TransitionFn) -> float:
    """Exact ``integral_{-1}^{1} phi(s) ds`` (rational arithmetic, then rounded)."""
    total = Fraction(0)
    for i, c in enumerate(phi.coeffs):
        if i % 2 == 0:
            total += 2 * c / (i + 1)
    return float(total)


def transition_jumps(phi: TransitionFn, max_order: int, at: float = 1.0, dps: int = 40):
    """Jumps of the one-sided derivatives of ``Phi`` across ``s = at`` (``+-1``).

    Derivatives are taken numerically with high-precision one-sided
    differences, independently of the exact coefficient identities.
    """
    import mpmath

    co = [mpmath.mpf(q.numerator) / q.denominator for q in phi.coeffs]
    outside = mpmath.mpf(1 if at > 0 else -1)

    def inner(s):
        return _peval(co, s)

    jumps = []
    with mpmath.workdps(dps):
        s0 = mpmath.mpf(at)
        side_in = -1 if at > 0 else 1
        for order in range(1, max_order + 1):
            d_in = mpmath.diff(inner, s0, order, direction=side_in)
            d_out = mpmath.diff(lambda s: outside, s0, order, direction=-side_in)
            jumps.append(float(abs(d_in - d_out)))
    return jumps


class RegularizedField:
    """Smooth field ``Z_eps`` built from a Filippov system and a transition function."""

    def __init__(self, base: FilippovSystem, phi: TransitionFn, eps: float):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.base = base
        self.phi = phi
        self.eps = float(eps)
        self._fn = None
        self._jac = None

    def __getstate__(self):
        return {"base": self.base, "phi": self.phi, "eps": self.eps}

    def __setstate__(self, state):
        self.__init__(state["base"], state["phi"], state["eps"])

    def __repr__(self):
        return f"RegularizedField(eps={self.eps:g}, phi={self.phi.label()})"

    @property
    def band(self):
        """``(h, grad h, eps)`` used by the integrator to cap steps in the layer."""
        return (self.base.h.fn, self.base.h.grad_fn, self.eps)

    def _build(self):
        Z, co = self.base, self.phi.float_coeffs
        dco = [float(q) for q in self.phi.derivative_coeffs(1)]
        horner = repr(co[-1])
        for c in reversed(co[:-1]):
            horner = f"({horner}) * s + {c!r}"
        dhorner = repr(dco[-1])
        for c in reversed(dco[:-1]):
            dhorner = f"({dhorner}) * s + {c!r}"
        p1, p2 = to_source(Z.xplus.f1), to_source(Z.xplus.f2)
        m1, m2 = to_source(Z.xminus.f1), to_source(Z.xminus.f2)
        h = to_source(Z.h.expr)
        hx, hy = to_source(Z.h.gradient[0]), to_source(Z.h.gradient[1])
        src = f"""
def _f(x, y):
    s = ({h}) / EPS
    if s >= 1.0:
        return ({p1}, {p2})
    if s <= -1.0:
        return ({m1}, {m2})
    P = {horner}
    wp = 0.5 * (1.0 + P)
    wm = 0.5 * (1.0 - P)
    return (wp * {p1} + wm * {m1}, wp * {p2} + wm * {m2})

def _jac(x, y):
    s = ({h}) / EPS
    if s >= 1.0:
        return JP(x, y)
    if s <= -1.0:
        return JM(x, y)
    P = {horner}
    dP = ({dhorner}) / EPS
    wp = 0.5 * (1.0 + P)
    wm = 0.5 * (1.0 - P)
    a11, a12, a21, a22 = JP(x, y)
    b11, b12, b21, b22 = JM(x, y)
    d1 = 0.5 * dP * (({p1}) - ({m1}))
    d2 = 0.5 * dP * (({p2}) - ({m2}))
    gx = {hx}
    gy = {hy}
    return (wp * a11 + wm * b11 + d1 * gx, wp * a12 + wm * b12 + d1 * gy,
            wp * a21 + wm * b21 + d2 * gx, wp * a22 + wm * b22 + d2 * gy)
"""
        ns = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "EPS": self.eps,
              "JP": Z.xplus.jacobian_fn, "JM": Z.xminus.jacobian_fn}
        exec(compile(src, "<regularized>", "exec"), ns)
        self._fn, self._jac = ns["_f"], ns["_jac"]

    @property
    def fn(self):
        if self._fn is None:
            self._build()
        return self._fn

    @property
    def jacobian_fn(self):
        if self._jac is None:
            self._build()
        return self._jac

    def __call__(self, x: float, y: float):
        return self.fn(x, y)

    def weight(self, x: float, y: float) -> float:
        """Weight ``(1 + Phi(h/eps))/2`` of ``X+`` at ``(x, y)``."""
        return 0.5 * (1.0 + self.phi(self.base.h(x, y) / self.eps))


def regularized_field(Z: FilippovSystem, phi: TransitionFn, eps: float) -> RegularizedField:
    return RegularizedField(Z, phi, eps)
