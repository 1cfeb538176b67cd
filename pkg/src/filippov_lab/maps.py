"""One-dimensional section maps and estimators of their constants.

Every map here is realised by integration between two axis-aligned sections:
transition maps near the tangency, exterior maps along the regular part of
the polycycle, first-return maps of the Filippov flow and of its
regularization, and the upper/lower transition maps of the regularized flow.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .fields import FilippovSystem, VectorField2
from .integrate import (DEFAULT_OPTIONS, IntegrationError, IntegratorOptions, MaxTimeExceeded, Section,
                        _run, _section_event, filippov_trajectory, flow_to_section, flow_with_variation)
from .regularize import RegularizedField, TransitionFn, phi_integral, regularized_field, transition_from_spec
from .scenarios import Scenario

__all__ = [
    "MapEvaluator", "MapDomainError", "Estimate", "SEstimate", "AsymptoticSections", "AsymptoticModel",
    "section_map", "tangent_orbit_height", "tangent_exit_x", "return_map_filippov", "filippov_return_map",
    "estimate_K", "exterior_sections", "exterior_map", "exterior_map_eps", "estimate_S",
    "lambda_star", "default_lambda", "asymptotic_sections", "upper_transition_map", "lower_transition_map",
    "estimate_alpha", "estimate_limit_constants", "return_map_eps", "asymptotic_model",
    "central_derivative",
]


class MapDomainError(ValueError):
    pass


def central_derivative(f: Callable[[float], float], u: float, step: Optional[float] = None) -> float:
    """Central difference with one Richardson level; default step ``max(1e-6, 1e-3 |u|)``."""
    h = step if step is not None else max(1e-6, 1e-3 * abs(u))
    d1 = (f(u + h) - f(u - h)) / (2 * h)
    d2 = (f(u + h / 2) - f(u - h / 2)) / h
    return (4 * d2 - d1) / 3


class MapEvaluator:
    """Map between two sections, ``coordinate -> coordinate``."""

    def __init__(self, fn, source: Section, target: Section, name: str = "map",
                 domain=None, check_range: bool = True, dfn=None, meta=None):
        self._fn = fn
        self.source = source
        self.target = target
        self.name = name
        self.domain = tuple(domain) if domain is not None else tuple(source.range)
        self.check_range = check_range
        self._dfn = dfn
        self.meta = dict(meta or {})

    def __repr__(self):
        return f"MapEvaluator({self.name}, domain={self.domain})"

    def evaluate(self, u: float) -> float:
        v = self._fn(float(u))
        if self.check_range and not self.target.contains(v, 1e-12):
            raise MapDomainError(f"{self.name}({u!r}) = {v!r} lies outside the target range {self.target.range}")
        return v

    __call__ = evaluate

    def derivative_at(self, u: float, step: Optional[float] = None) -> float:
        return central_derivative(self.evaluate, u, step)

    @property
    def has_variational(self) -> bool:
        return self._dfn is not None

    def variational_derivative(self, u: float) -> float:
        """Derivative from the variational equation (when the map supports it)."""
        if self._dfn is None:
            raise NotImplementedError(f"{self.name} has no variational derivative")
        return self._dfn(float(u))

    def grid(self, n: int = 64, lo=None, hi=None):
        lo = self.domain[0] if lo is None else lo
        hi = self.domain[1] if hi is None else hi
        return np.linspace(lo, hi, n)

    def is_monotone(self, n: int = 64, lo=None, hi=None):
        """``(monotone, sign)`` on an ``n``-point grid of the domain.

        With a variational derivative the sign of ``dfn`` decides; value
        differences of a strongly contracting map are below integration noise.
        """
        us = self.grid(n, lo, hi)
        if self._dfn is not None:
            d = np.array([self._dfn(u) for u in us])
        else:
            d = np.diff([self.evaluate(u) for u in us])
        if np.all(d > 0):
            return True, 1
        if np.all(d < 0):
            return True, -1
        return False, 0

    def tabulate(self, us: Sequence[float], derivative: bool = True) -> List[Dict[str, float]]:
        rows = []
        for u in us:
            row = {"input": float(u), "output": self.evaluate(u)}
            if derivative:
                row["derivative"] = self.derivative_at(u)
            rows.append(row)
        return rows

    def to_csv(self, us, dest=None, derivative: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        cols = ["input", "output"] + (["derivative"] if derivative else [])
        w.writerow(cols)
        for r in self.tabulate(us, derivative):
            w.writerow([repr(r[c]) for c in cols])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def spread(self, us) -> float:
        vals = [self.evaluate(u) for u in us]
        return max(vals) - min(vals)

    def collapse_spread(self, us) -> float:
        """Output spread over ``us`` from the integrated derivative, ``int |U'|``.

        Resolves spreads far below the integrator's absolute accuracy, where
        the raw ``max - min`` only measures integration noise.
        """
        us = np.asarray(us, float)
        d = np.abs([self.variational_derivative(u) for u in us])
        return float(sum(_log_trapezoid(d[i], d[i + 1], us[i + 1] - us[i]) for i in range(len(us) - 1)))


def _log_trapezoid(a, b, du):
    # exact for a derivative varying exponentially between the nodes
    if a <= 0 or b <= 0:
        return 0.5 * (a + b) * du
    r = math.log(b / a)
    return (b - a) / r * du if abs(r) > 1e-12 else 0.5 * (a + b) * du


@dataclass
class Estimate:
    value: float
    error: float
    rows: list = field(default_factory=list)
    notes: str = ""


def _richardson(vals, factor=2.0):
    # one level for an O(u) error term on a halving ladder
    return [(factor * b - a) / (factor - 1.0) for a, b in zip(vals[:-1], vals[1:])]


# --------------------------------------------------------------------------- basic maps

def section_map(X, source: Section, target: Section, opts: IntegratorOptions = DEFAULT_OPTIONS,
                name: str = "section_map") -> MapEvaluator:
    """Map induced by the flow of ``X`` (any field-like object or a Filippov system)."""
    if source == target:
        return MapEvaluator(lambda u: u, source, target, name + " (identity)")

    def fn(u):
        p, _, _ = flow_to_section(X, source.point(u), target, opts, record=False)
        return target.coordinate(p)

    dfn = None
    if hasattr(X, "jacobian_fn") and not isinstance(X, FilippovSystem):
        w0 = (0.0, 1.0) if source.kind == "vertical" else (1.0, 0.0)

        def dfn(u):
            return flow_with_variation(X, source.point(u), w0, target, opts)[3]

    return MapEvaluator(fn, source, target, name, dfn=dfn)


def tangent_orbit_height(X: VectorField2, p, x: float, opts: IntegratorOptions = DEFAULT_OPTIONS) -> float:
    """Ordinate where the orbit of ``X`` through ``p`` meets ``{x = x}`` (``ybar_x``)."""
    if x == p[0]:
        return p[1]
    fwd = x > p[0]
    Y = X if fwd else X.negated()
    sec = Section.vertical(x, direction="increasing" if fwd else "decreasing")
    q, _, _ = flow_to_section(Y, p, sec, opts, record=False)
    return q[1]


def tangent_exit_x(X: VectorField2, p, eps: float, opts: IntegratorOptions = DEFAULT_OPTIONS,
                   forward: bool = True) -> float:
    """Abscissa where the orbit of ``X`` through ``p`` meets ``{y = p_y + eps}``."""
    Y = X if forward else X.negated()
    q, _, _ = flow_to_section(Y, p, Section.horizontal(p[1] + eps, direction="increasing"), opts, record=False)
    return q[0]


# --------------------------------------------------------------------------- Filippov return maps

def return_map_filippov(scn: Scenario, u: float, opts: IntegratorOptions = DEFAULT_OPTIONS,
                        t_max: float = 60.0) -> float:
    """First return of the Filippov flow to the section through ``p``.

    Type (a): ``{x = p_x}``, coordinate ``y - p_y``; type (b): ``Σ`` to the
    right of ``p``, coordinate ``x - p_x``.
    """
    if scn.type not in ("a", "b"):
        raise ValueError("return map needs a type (a) or (b) polycycle")
    if not u > 0:
        raise MapDomainError("return-map input must be positive")
    sec = scn.polycycle.return_section
    off = sec.range[0]
    if not sec.contains(off + u):
        raise MapDomainError(f"u = {u} outside the return section [0, {scn.polycycle.eta}]")
    start = sec.point(off + u)
    target = Section(sec.kind, sec.value, (-math.inf, math.inf), sec.direction)
    try:
        traj = filippov_trajectory(scn.system, start, t_max, opts, stop=target, window=scn.window)
    except IntegrationError as exc:
        raise MapDomainError(f"orbit from u = {u} escapes the polycycle window: {exc}") from exc
    return sec.coordinate(traj.end) - off


def filippov_return_map(scn: Scenario, opts: IntegratorOptions = DEFAULT_OPTIONS) -> MapEvaluator:
    sec = scn.polycycle.return_section
    return MapEvaluator(lambda u: return_map_filippov(scn, u, opts), sec, sec, "pi_Gamma",
                        domain=(0.0, scn.polycycle.eta), check_range=False)


def estimate_K(scn: Scenario, u0: float = 1e-2, J: int = 8, opts: IntegratorOptions = DEFAULT_OPTIONS,
               check_opts: Optional[IntegratorOptions] = None) -> Estimate:
    """Leading coefficient ``K`` of the Filippov return map.

    Ratios ``pi(u)/u`` (type a) or ``pi(u)/u^(2k)`` (type b) on the ladder
    ``u_j = u0 2^-j`` are Richardson-extrapolated. Each rung is repeated at
    tighter tolerances; rungs whose discrepancy exceeds 1% of the value are
    discarded.
    """
    check_opts = check_opts or opts.with_(rel_tol=opts.rel_tol * 1e-2, abs_tol=opts.abs_tol * 1e-3)
    power = 1 if scn.type == "a" else 2 * scn.k
    rows, ratios = [], []
    for j in range(J + 1):
        u = u0 * 2.0 ** -j
        v = return_map_filippov(scn, u, opts)
        v_fine = return_map_filippov(scn, u, check_opts)
        err = abs(v - v_fine)
        keep = err <= 0.01 * abs(v_fine)
        rows.append({"u": u, "pi": v_fine, "ratio": v_fine / u ** power, "int_error": err, "kept": keep})
        if keep:
            ratios.append(v_fine / u ** power)
    if len(ratios) < 3:
        raise ValueError(f"estimate_K: only {len(ratios)} usable ladder rungs; ratios {ratios}")
    rich = _richardson(ratios)
    value = rich[-1]
    error = abs(rich[-1] - rich[-2])
    return Estimate(value, error, rows, f"Richardson over {len(ratios)} rungs, power {power}")


# --------------------------------------------------------------------------- exterior maps

def exterior_sections(scn: Scenario, eps: Optional[float] = None):
    """``(tau_u, tau_s, y_ref)``: sections of the exterior arc and the reference input."""
    pc = scn.polycycle
    px, py = pc.p
    if scn.type == "a":
        tu = Section.vertical(px + pc.theta, direction="increasing")
        ts = Section.vertical(px - pc.rho, direction="increasing")
        return tu, ts, tangent_orbit_height(scn.system.xplus, pc.p, px + pc.theta)
    if scn.type == "b":
        if eps is None:
            raise ValueError("type (b) exterior map ends on {y = -eps}; eps is required")
        tu = Section.vertical(px + pc.theta, direction="increasing")
        ts = Section.horizontal(py - eps, px - pc.rho, px + pc.theta, "increasing")
        return tu, ts, tangent_orbit_height(scn.system.xplus, pc.p, px + pc.theta)
    tu = Section.vertical(px, direction="increasing")
    ts = Section.vertical(px + pc.rho + pc.theta, direction="increasing")
    return tu, ts, py


def exterior_map(scn: Scenario, eps: Optional[float] = None, opts: IntegratorOptions = DEFAULT_OPTIONS,
                 sections=None) -> MapEvaluator:
    """Filippov exterior map ``D`` along the regular part of Γ."""
    tu, ts, yref = sections or exterior_sections(scn, eps)
    m = section_map(scn.system, tu, ts, opts, "D")
    m.meta["y_ref"] = yref
    m.check_range = False
    return m


def exterior_map_eps(scn: Scenario, phi, eps: float, opts: IntegratorOptions = DEFAULT_OPTIONS,
                     sections=None) -> MapEvaluator:
    """Exterior map ``D_eps`` of the regularized field along the same arc."""
    phi = transition_from_spec(phi)
    tu, ts, yref = sections or exterior_sections(scn, eps)
    m = section_map(regularized_field(scn.system, phi, eps), tu, ts, opts, "D_eps")
    m.meta["y_ref"] = yref
    m.check_range = False
    return m


@dataclass
class SEstimate:
    value: float
    fd: float
    fd_error: float
    closed_form: Optional[float]
    agree: Optional[bool]
    rows: list = field(default_factory=list)


class SEstimateMismatch(ValueError):
    pass


def estimate_S(scn: Scenario, phi, eps0: float = 4e-3, opts: Optional[IntegratorOptions] = None,
               strict: bool = True) -> SEstimate:
    """``eps``-coefficient ``S`` of ``D_eps - D``, by finite differences and in closed form.

    The closed form ``sum_i X2(q_i)/2 * int(phi)`` is used only for scenarios
    declared in prepared coordinates at each crossing (and is 0 without
    crossings). With both available they must agree within 5%.
    """
    if scn.type == "b":
        raise ValueError("S is defined for type (a) polycycles and prepared arcs")
    phi = transition_from_spec(phi)
    opts = opts or DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
    secs = exterior_sections(scn)
    tu, ts, yref = secs
    D = exterior_map(scn, opts=opts, sections=secs)
    d0 = D(yref)
    rows, slopes = [], []
    for j in range(3):
        eps = eps0 * 2.0 ** -j
        de = exterior_map_eps(scn, phi, eps, opts, sections=secs)(yref)
        s = (de - d0) / eps
        rows.append({"eps": eps, "D_eps": de, "D": d0, "slope": s})
        slopes.append(s)
    rich = _richardson(slopes)
    fd, fd_err = rich[-1], abs(rich[-1] - rich[-2])
    closed = None
    if scn.polycycle.m == 0:
        closed = 0.0
    elif scn.prepared_at_crossings:
        I = phi_integral(phi)
        closed = sum(scn.system.xplus(*q)[1] / 2.0 * I for q in scn.polycycle.crossings)
    agree = None
    if closed is not None:
        agree = abs(fd - closed) <= max(0.05 * abs(closed), 1e-4)
        if strict and not agree:
            raise SEstimateMismatch(f"finite-difference S = {fd:.6g} disagrees with closed form {closed:.6g}; "
                                    "the scenario is probably not in prepared coordinates")
    value = closed if closed is not None else fd
    return SEstimate(value, fd, fd_err, closed, agree, rows)


# --------------------------------------------------------------------------- transition maps

def lambda_star(k: int, n: int) -> float:
    return n / (1.0 + 2.0 * k * (n - 1))


def default_lambda(k: int, n: int) -> float:
    """Midpoint of ``(1/2k, lambda*)``, the range where existence is claimed."""
    return 0.5 * (1.0 / (2 * k) + lambda_star(k, n))


@dataclass
class AsymptoticSections:
    lambda_star: float
    x_eps: float
    y_hat: float
    ybar_minus_rho: float
    V_hat: Section
    H_hat: Section
    H_check: Section


def asymptotic_sections(k: int, n: int, alpha: float, lam: float, rho: float, eps: float,
                        eta: float = 1.0, C_beta: float = 1.0, ybar_minus_rho: Optional[float] = None,
                        dyX2: Optional[float] = None) -> AsymptoticSections:
    """Sections of the transition maps near a ``2k`` contact.

    ``y_hat = ybar_{-rho} + eps - C_beta eps^(2k lam)`` stands in for the
    section top, whose exact coefficient is not available; only the sign of
    the correction (negative) and its order enter the fixed-point argument.
    """
    if n < 2 * k - 1:
        raise ValueError(f"transition class n = {n} must satisfy n >= 2k - 1 = {2 * k - 1}")
    ls = lambda_star(k, n)
    if not 0 < lam < ls:
        raise ValueError(f"lambda = {lam} must lie in (0, lambda*) = (0, {ls:.6g})")
    if not C_beta > 0:
        raise ValueError("C_beta must be positive")
    if n > 2 * k - 1 and not eta > 0:
        raise ValueError("eta must be positive when n > 2k - 1")
    if n == 2 * k - 1 and k != 1 and dyX2 is not None:
        bound = -(dyX2 / alpha) ** (1.0 / (2 * k - 1))
        if not eta > bound:
            raise ValueError(f"eta must exceed {bound:.6g}")
    yb = alpha * rho ** (2 * k) / (2 * k) if ybar_minus_rho is None else ybar_minus_rho
    y_hat = yb + eps - C_beta * eps ** (2 * k * lam)
    if not y_hat > eps:
        raise ValueError(f"section top {y_hat:.6g} is not above eps = {eps:g}; decrease eps or increase rho")
    if not rho > eps ** lam:
        raise ValueError(f"rho = {rho} must exceed eps^lambda = {eps ** lam:.6g}")
    return AsymptoticSections(
        lambda_star=ls, x_eps=eta * eps ** ls, y_hat=y_hat, ybar_minus_rho=yb,
        V_hat=Section.vertical(-rho, eps, y_hat, "increasing"),
        H_hat=Section.horizontal(eps, -rho, -eps ** lam, "decreasing"),
        H_check=Section.horizontal(-eps, -rho, -eps ** lam, "increasing"))


def _guarded_flow(Zeps, p0, target, guard: Section, opts, label):
    ev_t = _section_event(target, "target")
    ev_g = _section_event(guard, "guard")
    fn = Zeps.fn
    res = _run(lambda s: fn(s[0], s[1]), list(p0), 0.0, opts.max_time, opts, [ev_t, ev_g],
               band=Zeps.band, record=False)
    if res.status != "event":
        raise MaxTimeExceeded(f"{label}: no hit of the target section from {tuple(p0)}")
    if res.event.name == "guard":
        raise MapDomainError(f"{label}: input {tuple(p0)} exits through {guard.kind} section "
                             f"at {guard.value:g} (section misconfigured)")
    return res.y[0], res.y[1]


def _transition_map(scn, phi, eps, rho, theta, lam, opts, lower, C_beta=1.0):
    phi = transition_from_spec(phi)
    k, n = scn.k, phi.smoothness
    px, py = scn.polycycle.p
    Zeps = regularized_field(scn.system, phi, eps)
    ls = lambda_star(k, n)
    if not 0 < lam < ls:
        raise ValueError(f"lambda = {lam} must lie in (0, lambda*) = (0, {ls:.6g})")
    if not rho > eps ** lam:
        raise ValueError(f"rho = {rho} must exceed eps^lambda = {eps ** lam:.6g}")
    target = Section.vertical(px + theta, direction="increasing")
    if lower:
        source = Section.horizontal(py - eps, px - rho, px - eps ** lam, "increasing")
        guard = Section.horizontal(py - 2 * eps - 1e-3, direction="decreasing")
        w0 = (1.0, 0.0)
        name = "L_eps"
    else:
        yb = tangent_orbit_height(scn.system.xplus, scn.polycycle.p, px - rho, opts)
        y_hat = yb + eps - C_beta * eps ** (2 * k * lam)
        if not y_hat > py + eps:
            raise ValueError(f"section top {y_hat:.6g} is not above eps; decrease eps")
        source = Section.vertical(px - rho, py + eps, y_hat, "increasing")
        guard = Section.horizontal(py - eps, direction="decreasing")
        w0 = (0.0, 1.0)
        name = "U_eps"

    def fn(u):
        p = _guarded_flow(Zeps, source.point(u), target, guard, opts, name)
        return target.coordinate(p)

    def dfn(u):
        return flow_with_variation(Zeps, source.point(u), w0, target, opts)[3]

    return MapEvaluator(fn, source, target, name, check_range=False, dfn=dfn,
                        meta={"eps": eps, "rho": rho, "theta": theta, "lambda": lam, "lambda_star": ls})


def upper_transition_map(scn: Scenario, phi, eps: float, rho: float = 0.3, theta: float = 0.2,
                         lam: float = 0.6, opts: IntegratorOptions = DEFAULT_OPTIONS,
                         C_beta: float = 1.0) -> MapEvaluator:
    """``U_eps`` from ``{-rho} x [eps, y_hat]`` to ``{x = theta}`` through the slow layer."""
    return _transition_map(scn, phi, eps, rho, theta, lam, opts, lower=False, C_beta=C_beta)


def lower_transition_map(scn: Scenario, phi, eps: float, rho: float = 0.3, theta: float = 0.2,
                         lam: float = 0.6, opts: IntegratorOptions = DEFAULT_OPTIONS) -> MapEvaluator:
    """``L_eps`` from ``[-rho, -eps^lam] x {-eps}`` to ``{x = theta}``."""
    return _transition_map(scn, phi, eps, rho, theta, lam, opts, lower=True)


# --------------------------------------------------------------------------- regularized return map

def return_map_eps(scn: Scenario, phi, eps: float, lam: Optional[float] = None,
                   opts: IntegratorOptions = DEFAULT_OPTIONS, C_beta: float = 1.0, right: float = 0.05) -> MapEvaluator:
    """First-return map ``pi_eps`` of the regularized flow.

    Type (a): on ``{x = -rho}``, domain ``[eps, y_hat]`` (the section of the
    upper transition map); the return is ``D_eps o U_eps``. Type (b): on
    ``{y = -eps}``, domain ``[-rho, right]``, containing the lower section
    ``[-rho, -eps^lam]``.
    """
    phi = transition_from_spec(phi)
    lam = default_lambda(scn.k, phi.smoothness) if lam is None else lam
    pc = scn.polycycle
    px, py = pc.p
    Zeps = regularized_field(scn.system, phi, eps)
    if scn.type == "a":
        yb = tangent_orbit_height(scn.system.xplus, pc.p, px - pc.rho, opts)
        y_hat = yb + eps - C_beta * eps ** (2 * scn.k * lam)
        sec = Section.vertical(px - pc.rho, py - 1.0, py + 1.0, "increasing")
        domain = (py + eps, y_hat)
        w0 = (0.0, 1.0)
        meta = {"ybar": yb, "y_hat": y_hat}
    elif scn.type == "b":
        sec = Section.horizontal(py - eps, px - pc.rho, px + pc.theta, "increasing")
        domain = (px - pc.rho, px + right)
        w0 = (1.0, 0.0)
        meta = {"lower_section": (px - pc.rho, px - eps ** lam)}
    else:
        raise ValueError("return_map_eps needs a type (a) or (b) scenario")

    def fn(u):
        p, _, _ = flow_to_section(Zeps, sec.point(u), sec, opts, record=False)
        return sec.coordinate(p)

    def dfn(u):
        return flow_with_variation(Zeps, sec.point(u), w0, sec, opts)[3]

    meta.update({"eps": eps, "lambda": lam, "phi": phi.label()})
    m = MapEvaluator(fn, sec, sec, "pi_eps", domain=domain, check_range=False, dfn=dfn, meta=meta)
    m.field = Zeps
    return m


# --------------------------------------------------------------------------- Lemma-type constants

def estimate_alpha(X, k: int = 1, p=(0.0, 0.0), x0: Optional[float] = None, J: int = 6,
                   opts: Optional[IntegratorOptions] = None) -> Estimate:
    """``alpha`` in ``ybar_x = alpha x^(2k) / (2k) + O(x^(2k+1))``.

    ``X`` is the upper field (or a scenario). The exponent from a log-log fit
    over the ladder must equal ``2k`` within 0.05.
    """
    if isinstance(X, Scenario):
        p, k, X = X.polycycle.p, X.k, X.system.xplus
    opts = opts or DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-15)
    x0 = x0 if x0 is not None else (0.1 if k == 1 else 0.4)
    xs = [x0 * 2.0 ** -j for j in range(J + 1)]
    ys = [tangent_orbit_height(X, p, p[0] + x, opts) - p[1] for x in xs]
    if min(ys) <= 0:
        raise ValueError("the orbit through p does not rise above Σ (contact not visible?)")
    slope = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
    rows = [{"x": x, "ybar": y, "scaled": 2 * k * y / x ** (2 * k)} for x, y in zip(xs, ys)]
    if abs(slope - 2 * k) > 0.05:
        raise ValueError(f"fitted exponent {slope:.4f} differs from 2k = {2 * k}; declared k is wrong")
    a = [r["scaled"] for r in rows]
    rich = _richardson(a)
    est = Estimate(rich[-1], abs(rich[-1] - rich[-2]), rows, f"exponent {slope:.6f}")
    est.exponent = slope
    return est


def _kappa_u_type_b(scn, theta, opts, J=5):
    """Coefficient of ``x^(2k)`` in ``T^u(x) - ybar_theta`` on ``[0, theta]``."""
    X, p, k = scn.system.xplus, scn.polycycle.p, scn.k
    yb = tangent_orbit_height(X, p, p[0] + theta, opts)
    tgt = Section.vertical(p[0] + theta, direction="increasing")
    vals = []
    for j in range(J + 1):
        x = theta * 0.25 * 2.0 ** -j
        q, _, _ = flow_to_section(X, (p[0] + x, p[1]), tgt, opts, record=False)
        vals.append((q[1] - yb) / x ** (2 * k))
    return _richardson(vals)[-1]


def estimate_limit_constants(scn: Scenario, ladder=None, opts: Optional[IntegratorOptions] = None,
                             K: Optional[float] = None, alpha: Optional[float] = None) -> dict:
    """Sequences of exterior/transition slopes along a halving ladder.

    Type (a): ``r_{theta,rho} = D'(ybar_theta)`` for ``(theta, rho)`` pairs,
    compared with ``K``. Type (b): ``kappa^u_theta`` along ``theta`` and
    ``r_{theta,eps}`` along ``(theta, eps)``, compared with ``-alpha/2k`` and
    ``-2kK/alpha``.
    """
    opts = opts or DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
    pc = scn.polycycle
    px, py = pc.p
    out = {"type": scn.type}
    if K is None:
        K = estimate_K(scn).value
    out["K"] = K
    if scn.type == "a":
        ladder = ladder or [(pc.theta * 2.0 ** -j, pc.rho * 2.0 ** -j) for j in range(4)]
        rows = []
        for theta, rho in ladder:
            tu = Section.vertical(px + theta, direction="increasing")
            ts = Section.vertical(px - rho, direction="increasing")
            yb = tangent_orbit_height(scn.system.xplus, pc.p, px + theta, opts)
            D = section_map(scn.system.xplus, tu, ts, opts, "D")
            r = D.derivative_at(yb)
            rows.append({"theta": theta, "rho": rho, "r": r, "gap": abs(r - K)})
        gaps = [r["gap"] for r in rows]
        out["r_theta_rho"] = rows
        out["target"] = K
        out["monotone_gap"] = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
        return out
    if scn.type != "b":
        raise ValueError("limit constants need a type (a) or (b) scenario")
    if alpha is None:
        alpha = estimate_alpha(scn).value
    k = scn.k
    out["alpha"] = alpha
    ladder = ladder or [(pc.theta * 2.0 ** -j, 1e-2 * 2.0 ** -j) for j in range(4)]
    krows, rrows = [], []
    for theta, eps in ladder:
        kap = _kappa_u_type_b(scn, theta, opts)
        krows.append({"theta": theta, "kappa_u": kap, "gap": abs(kap + alpha / (2 * k))})
        tu, ts, yb = (Section.vertical(px + theta, direction="increasing"),
                      Section.horizontal(py - eps, px - pc.rho, px + pc.theta, "increasing"),
                      tangent_orbit_height(scn.system.xplus, pc.p, px + theta, opts))
        D = section_map(scn.system, tu, ts, opts, "D")
        D.check_range = False
        r = D.derivative_at(yb)
        rrows.append({"theta": theta, "eps": eps, "r": r, "gap": abs(r + 2 * k * K / alpha)})
    out["kappa_u"] = krows
    out["r_theta_eps"] = rrows
    out["kappa_target"] = -alpha / (2 * k)
    out["r_target"] = -2 * k * K / alpha
    for key in ("kappa_u", "r_theta_eps"):
        g = [r["gap"] for r in out[key]]
        out[f"monotone_gap_{key}"] = all(b <= a + 1e-9 for a, b in zip(g[:-1], g[1:]))  # noise floor
    return out


@dataclass
class AsymptoticModel:
    K: float
    S: float
    alpha: float
    beta: object
    r_ext: float
    kappa_u: float
    kappa_s: float
    lambda_star: float
    eta: float
    provenance: dict = field(default_factory=dict)

    def sign_violations(self, ptype: str) -> List[str]:
        bad = []
        if not 1.0 / (2 * self.provenance.get("k", 1)) < self.lambda_star <= 1.0:
            bad.append("lambda_star outside (1/2k, 1]")
        if ptype == "a":
            for name in ("K", "r_ext", "kappa_u", "kappa_s"):
                if not getattr(self, name) > 0:
                    bad.append(f"{name} must be positive")
        else:
            if not self.r_ext < 0:
                bad.append("r_ext must be negative")
            if not self.kappa_u < 0:
                bad.append("kappa_u must be negative")
            if not self.kappa_s > 0:
                bad.append("kappa_s must be positive")
            if not self.K > 0:
                bad.append("K must be positive")
        return bad


def asymptotic_model(scn: Scenario, phi, eps: float = 1e-2, eta: float = 1.0,
                     opts: Optional[IntegratorOptions] = None) -> AsymptoticModel:
    """Collect the constants of the return-map expansion for a scenario."""
    phi = transition_from_spec(phi)
    opts = opts or DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
    pc = scn.polycycle
    px, py = pc.p
    k, n = scn.k, phi.smoothness
    K = estimate_K(scn)
    alpha = estimate_alpha(scn)
    X = scn.system.xplus
    prov = {"k": k, "n": n, "K": K.notes, "alpha": alpha.notes, "beta": "surrogate top, C_beta = 1"}
    if scn.type == "a":
        S = estimate_S(scn, phi, strict=False)
        yt = tangent_orbit_height(X, pc.p, px + pc.theta, opts)
        D = section_map(X, Section.vertical(px + pc.theta, direction="increasing"),
                        Section.vertical(px - pc.rho, direction="increasing"), opts)
        r = D.derivative_at(yt)
        sig = Section.vertical(px, py, py + pc.eta, "increasing")
        Tu = section_map(X, sig, Section.vertical(px + pc.theta, direction="increasing"), opts)
        Ts = section_map(X.negated(), sig, Section.vertical(px - pc.rho, direction="decreasing"), opts)
        ku, ks = Tu.derivative_at(1e-6, 1e-7), Ts.derivative_at(1e-6, 1e-7)
        S_val = S.value
        prov["S"] = "closed form" if S.closed_form is not None else "finite differences"
    else:
        lc = estimate_limit_constants(scn, [(pc.theta, eps)], opts, K=K.value, alpha=alpha.value)
        r = lc["r_theta_eps"][0]["r"]
        ku = lc["kappa_u"][0]["kappa_u"]
        sig = Section.horizontal(py, px, px + pc.theta, "increasing")
        Ts = section_map(scn.system.xminus.negated(), sig,
                         Section.horizontal(py - eps, direction="decreasing"), opts)
        ks = Ts.derivative_at(1e-3)
        S_val = float("nan")
        prov["S"] = "not defined for type (b)"
    return AsymptoticModel(K=K.value, S=S_val, alpha=alpha.value, beta="surrogate", r_ext=r,
                           kappa_u=ku, kappa_s=ks, lambda_star=lambda_star(k, n), eta=eta, provenance=prov)
